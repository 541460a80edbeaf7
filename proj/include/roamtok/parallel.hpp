#ifndef ROAMTOK_PARALLEL_HPP
#define ROAMTOK_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace roamtok {

/// Worker count: hardware concurrency, at least 1.
inline unsigned default_workers() {
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(k) for k in [0, count) on up to `workers` threads. Work is claimed
/// through an atomic counter, so results must be written to slot k and never
/// depend on execution order. The first exception thrown is rethrown after all
/// workers stop.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn, unsigned workers = default_workers()) {
  workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), count));
  if (workers <= 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      if (failed.load(std::memory_order_relaxed)) return;
      const std::size_t k = next.fetch_add(1);
      if (k >= count) return;
      try {
        fn(k);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace roamtok

#endif  // ROAMTOK_PARALLEL_HPP
