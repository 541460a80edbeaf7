#ifndef ROAMTOK_CSV_HPP
#define ROAMTOK_CSV_HPP

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <system_error>

#include "roamtok/errors.hpp"

namespace roamtok {

/// Shortest round-trip decimal form; identical bytes on every run.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << content;
  if (!os) throw Error("failed writing " + path.string());
}

}  // namespace roamtok

#endif  // ROAMTOK_CSV_HPP
