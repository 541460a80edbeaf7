#ifndef ROAMTOK_BASELINE_CI_HPP
#define ROAMTOK_BASELINE_CI_HPP

// Consensus+innovations baseline: every agent keeps an estimate and mixes a
// neighbor consensus term with a local innovation under decaying gains
//   s_i(t+1) = s_i - β(t) Σ_{l∈Ω_i(t)} (s_i - s_l) + α(t) K_i H_iᵀC_i⁻¹ (y_i - H_i s_i)
// with α(t) = a/(t+1)^τ1, β(t) = b/(t+1)^τ2 and Ω_i(t) the out-neighbors of i.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "roamtok/errors.hpp"
#include "roamtok/graph_process.hpp"
#include "roamtok/linalg.hpp"
#include "roamtok/metrics.hpp"
#include "roamtok/observation_model.hpp"
#include "roamtok/parallel.hpp"
#include "roamtok/random.hpp"
#include "roamtok/roaming_token.hpp"

namespace roamtok {

enum class GainMode { Identity, Constant };

inline std::string to_string(GainMode g) {
  return g == GainMode::Identity ? "identity" : "constant";
}

struct CiConfig {
  double a = 1.0;
  double b = 0.1;
  double tau1 = 1.0;
  double tau2 = 0.5;
  GainMode gain_mode = GainMode::Identity;
  std::vector<Matrix> gains;  ///< one L×L matrix per agent when Constant

  double alpha(long t) const { return a / std::pow(static_cast<double>(t) + 1.0, tau1); }
  double beta(long t) const { return b / std::pow(static_cast<double>(t) + 1.0, tau2); }

  /// Admissible region: a, b > 0 and 0 < τ2 < τ1 <= 1.
  bool admissible() const { return a > 0.0 && b > 0.0 && tau2 > 0.0 && tau2 < tau1 && tau1 <= 1.0; }

  void validate(std::size_t n, Eigen::Index dim) const {
    if (!(a > 0.0)) throw std::invalid_argument("ci.a must be positive");
    if (!(b > 0.0)) throw std::invalid_argument("ci.b must be positive");
    if (!(tau2 > 0.0 && tau2 < tau1 && tau1 <= 1.0)) {
      throw std::invalid_argument("ci step exponents must satisfy 0 < tau2 < tau1 <= 1");
    }
    check_gains(n, dim);
  }

  void check_gains(std::size_t n, Eigen::Index dim) const {
    if (gain_mode != GainMode::Constant) return;
    if (gains.size() != n) {
      throw std::invalid_argument("constant gain mode needs one matrix per agent");
    }
    for (const auto& g : gains)
      if (g.rows() != dim || g.cols() != dim)
        throw std::invalid_argument("gain matrices must be LxL");
  }

  std::string label() const {
    return "a=" + std::to_string(a) + " b=" + std::to_string(b) + " tau1=" + std::to_string(tau1) +
           " tau2=" + std::to_string(tau2) + " gain=" + to_string(gain_mode);
  }
};

/// K_i = n Σ_c⁻¹ for every agent (the centralized gain scale). Needs global
/// knowledge of Σ_c; offered as a stronger baseline than the identity gain.
inline std::vector<Matrix> scaled_fisher_inverse_gains(const GlobalModel& model) {
  const Matrix g = static_cast<double>(model.n()) * spd_inverse_via_solves(model.sigma_c());
  return std::vector<Matrix>(model.n(), g);
}

/// Estimates stored column-wise: column i is s_i(t).
struct CiNetworkState {
  Matrix estimates;

  static CiNetworkState zero(std::size_t n, Eigen::Index dim) {
    return {Matrix::Zero(dim, static_cast<Eigen::Index>(n))};
  }
};

/// One synchronous consensus+innovations step from s(t) to s(t+1).
inline CiNetworkState ci_step(const CiNetworkState& state, const GlobalModel& model,
                              const Adjacency& a, const MeasurementBatch& batch,
                              const CiConfig& cfg, long t) {
  const std::size_t n = model.n();
  const Eigen::Index dim = model.dim();
  if (state.estimates.rows() != dim || state.estimates.cols() != static_cast<Eigen::Index>(n)) {
    throw std::invalid_argument("ci_step: state must be L x n");
  }
  if (a.n() != n || batch.y.size() != n) throw std::invalid_argument("ci_step: size mismatch");
  cfg.check_gains(n, dim);
  const double alpha = cfg.alpha(t);
  const double beta = cfg.beta(t);

  CiNetworkState next{state.estimates};
  Vector consensus(dim);
  Vector innovation(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const auto si = state.estimates.col(ii);
    consensus.setZero();
    for (std::size_t l = 0; l < n; ++l)
      if (a(i, l)) consensus += si - state.estimates.col(static_cast<Eigen::Index>(l));
    const auto& agent = model.agent(i);
    innovation.noalias() = agent.info_gain() * (batch.y[i] - agent.H() * si);
    if (cfg.gain_mode == GainMode::Constant) innovation = cfg.gains[i] * innovation;
    next.estimates.col(ii) += -beta * consensus + alpha * innovation;
  }
  return next;
}

struct CiTrace {
  std::vector<long> t;
  std::vector<double> network_sq_err;  ///< (1/n) Σ_i ||s_i(t) - θ||²
  std::vector<std::vector<double>> agent_sq_err;  ///< [sample][agent], if requested
  double theta_sq_norm = 0.0;
};

/// Runs the baseline for t = 0..horizon from s_i(0) = 0, recording s(t)
/// before the tick-t update. Consumes the noise and graph streams exactly as
/// run_episode does, so the two see identical draws.
inline CiTrace run_ci_episode(const GlobalModel& model, const GraphProcessSpec& spec,
                              const CiConfig& cfg, long horizon, const RecordOptions& record,
                              TrialStreams& streams) {
  const std::size_t n = model.n();
  if (spec.n() != n) throw std::invalid_argument("graph and model disagree on n");
  if (horizon < 0) throw std::invalid_argument("horizon must be >= 0");
  const Vector& theta = model.theta();
  CiNetworkState state = CiNetworkState::zero(n, model.dim());
  MeasurementBatch batch;
  Adjacency adj(n);
  CiTrace trace;
  trace.theta_sq_norm = theta.squaredNorm();
  const bool all_ticks = record.sample_times.empty();
  std::size_t next_sample = 0;
  for (long t = 0; t <= horizon; ++t) {
    sample_measurements_into(model, t, streams.noise, batch);
    const bool sampled = all_ticks || (next_sample < record.sample_times.size() &&
                                       record.sample_times[next_sample] == t);
    if (sampled) {
      if (!all_ticks) ++next_sample;
      double total = 0.0;
      std::vector<double> per;
      if (record.per_agent) per.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double e = (state.estimates.col(static_cast<Eigen::Index>(i)) - theta).squaredNorm();
        total += e;
        if (record.per_agent) per[i] = e;
      }
      trace.t.push_back(t);
      trace.network_sq_err.push_back(total / static_cast<double>(n));
      if (record.per_agent) trace.agent_sq_err.push_back(std::move(per));
    }
    next_adjacency_into(spec, t, streams.graph, adj);
    state = ci_step(state, model, adj, batch, cfg, t);
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Grid search

struct CiGrid {
  std::vector<double> a{0.5, 1.0, 2.0};
  std::vector<double> b{0.1, 0.5, 1.0};
  std::vector<double> tau1{1.0};
  std::vector<double> tau2{0.25, 0.5};
  GainMode gain_mode = GainMode::Identity;
  std::vector<Matrix> gains;

  /// Cartesian product restricted to admissible points.
  std::vector<CiConfig> points() const {
    std::vector<CiConfig> out;
    for (double va : a)
      for (double vb : b)
        for (double v1 : tau1)
          for (double v2 : tau2) {
            CiConfig c{va, vb, v1, v2, gain_mode, gains};
            if (c.admissible()) out.push_back(std::move(c));
          }
    return out;
  }
};

struct GridPointScore {
  CiConfig config;
  double final_rmse = 0.0;  ///< +inf if any trial diverged
};

struct GridSearchResult {
  CiConfig best;
  MetricSeries curve;  ///< network r-MSE of the best point
  std::vector<GridPointScore> scores;
};

/// Mean network r-MSE (normalized by ||θ||², since s_i(0) = 0) over trials.
inline MetricSeries ci_network_rmse(const std::vector<CiTrace>& traces) {
  if (traces.empty()) throw MissingTrace("no consensus+innovations traces");
  std::vector<const std::vector<double>*> ptr;
  for (const auto& tr : traces) ptr.push_back(&tr.network_sq_err);
  return aggregate_trials("rmse_network_ci", traces.front().t, ptr,
                          1.0 / traces.front().theta_sq_norm);
}

/// Every grid point is run on the same per-trial streams derived from `seed`
/// (trial k -> derive(seed, k)); the point with the smallest finite mean
/// network r-MSE at the horizon wins, ties going to the earlier point.
inline GridSearchResult grid_search(const GlobalModel& model, const GraphProcessSpec& spec,
                                    const CiGrid& grid, long trials, long horizon,
                                    std::uint64_t seed, const RecordOptions& record = {}) {
  const auto pts = grid.points();
  if (pts.empty()) throw std::invalid_argument("grid has no admissible points");
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  GridSearchResult result;
  double best_score = std::numeric_limits<double>::infinity();
  std::size_t best_index = pts.size();
  MetricSeries best_curve;
  RecordOptions rec = record;
  rec.per_agent = false;
  for (std::size_t p = 0; p < pts.size(); ++p) {
    pts[p].validate(model.n(), model.dim());
    std::vector<CiTrace> traces(static_cast<std::size_t>(trials));
    parallel_for(traces.size(), [&](std::size_t k) {
      TrialStreams streams = TrialStreams::derive(seed, k);
      traces[k] = run_ci_episode(model, spec, pts[p], horizon, rec, streams);
    });
    MetricSeries curve = ci_network_rmse(traces);
    double score = curve.value.back();
    if (!curve.all_finite() || !std::isfinite(score)) score = std::numeric_limits<double>::infinity();
    result.scores.push_back({pts[p], score});
    if (score < best_score) {
      best_score = score;
      best_index = p;
      best_curve = std::move(curve);
    }
  }
  if (best_index == pts.size()) throw NonFiniteMetric("every grid point diverged");
  result.best = pts[best_index];
  result.curve = std::move(best_curve);
  return result;
}

}  // namespace roamtok

#endif  // ROAMTOK_BASELINE_CI_HPP
