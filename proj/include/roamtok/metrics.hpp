#ifndef ROAMTOK_METRICS_HPP
#define ROAMTOK_METRICS_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "roamtok/errors.hpp"

namespace roamtok {

inline constexpr double kCiZ = 1.96;

/// Trial-averaged series with normal-approximation 95% half-widths.
struct MetricSeries {
  std::string name;
  std::vector<long> t;
  std::vector<double> value;
  std::vector<double> half_width;
  long trials = 0;

  std::size_t size() const noexcept { return t.size(); }

  /// Value at time `time`; throws if that time was not sampled.
  double at(long time) const {
    for (std::size_t k = 0; k < t.size(); ++k)
      if (t[k] == time) return value[k];
    throw MissingTrace("metric '" + name + "' has no sample at t=" + std::to_string(time));
  }

  bool all_finite() const {
    for (double v : value)
      if (!std::isfinite(v)) return false;
    for (double h : half_width)
      if (!std::isfinite(h)) return false;
    return true;
  }
};

/// Averages per-trial series sample-by-sample after scaling by `scale`.
/// All series must share length. Half-width = 1.96 sd / sqrt(R) (0 for R = 1).
inline MetricSeries aggregate_trials(std::string name, std::vector<long> times,
                                     const std::vector<const std::vector<double>*>& per_trial,
                                     double scale = 1.0) {
  if (per_trial.empty()) throw MissingTrace("no trials to aggregate for '" + name + "'");
  const std::size_t len = times.size();
  for (const auto* s : per_trial) {
    if (s == nullptr || s->size() != len) {
      throw MissingTrace("trial series for '" + name + "' has inconsistent length");
    }
  }
  MetricSeries out;
  out.name = std::move(name);
  out.t = std::move(times);
  out.trials = static_cast<long>(per_trial.size());
  out.value.assign(len, 0.0);
  out.half_width.assign(len, 0.0);
  const double r = static_cast<double>(per_trial.size());
  for (std::size_t k = 0; k < len; ++k) {
    double sum = 0.0;
    for (const auto* s : per_trial) sum += (*s)[k] * scale;
    const double mean = sum / r;
    double ss = 0.0;
    for (const auto* s : per_trial) {
      const double dlt = (*s)[k] * scale - mean;
      ss += dlt * dlt;
    }
    out.value[k] = mean;
    out.half_width[k] = per_trial.size() > 1 ? kCiZ * std::sqrt(ss / (r - 1.0)) / std::sqrt(r) : 0.0;
  }
  return out;
}

}  // namespace roamtok

#endif  // ROAMTOK_METRICS_HPP
