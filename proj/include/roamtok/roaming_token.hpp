#ifndef ROAMTOK_ROAMING_TOKEN_HPP
#define ROAMTOK_ROAMING_TOKEN_HPP

// The roaming-token estimator. Every agent keeps a running information
// statistic x_i; a single token carries (d, K) = (Σ x_i(τ_i), Σ B_i) over the
// visited agents and produces s(t) = (I/α(t) + K)^{-1} d.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "roamtok/errors.hpp"
#include "roamtok/graph_process.hpp"
#include "roamtok/linalg.hpp"
#include "roamtok/observation_model.hpp"
#include "roamtok/random.hpp"
#include "roamtok/token_chain.hpp"

namespace roamtok {

inline constexpr double kEstimateResidualTol = 1e-8;

/// α(t): Linear is t + 1, Power is c (t + 1)^q.
struct AlphaSchedule {
  enum class Form { Linear, Power };
  Form form = Form::Linear;
  double c = 1.0;
  double q = 1.0;

  static AlphaSchedule linear() { return {}; }
  static AlphaSchedule power(double c, double q) {
    if (!(c > 0.0)) throw std::invalid_argument("alpha scale c must be positive");
    if (!(q > 0.0)) throw std::invalid_argument("alpha exponent q must be positive");
    return {Form::Power, c, q};
  }

  double operator()(long t) const {
    const double base = static_cast<double>(t) + 1.0;
    return form == Form::Linear ? base : c * std::pow(base, q);
  }

  /// t/α(t)^2 -> 0, i.e. growth faster than sqrt(t). The other rate condition
  /// (t α² e^{-c2 t} -> 0) holds for every polynomial schedule.
  bool optimal_rate_admissible() const { return form == Form::Linear || q > 0.5; }
};

struct AgentLocalState {
  Vector x;
  Vector x_snapshot;
  long k = 0;
  std::optional<long> last_visit;
  Vector last_seen_estimate;

  static AgentLocalState zero(Eigen::Index dim) {
    return {Vector::Zero(dim), Vector::Zero(dim), 0, std::nullopt, Vector::Zero(dim)};
  }
};

/// Absorbs one measurement: x <- x + (HᵀC⁻¹y - x)/k with k the new count.
inline void local_update(AgentLocalState& state, const AgentModel& agent, const Vector& y) {
  if (y.size() != agent.rows()) {
    throw InvalidModel("agent " + std::to_string(agent.id()) + ": measurement has size " +
                       std::to_string(y.size()) + ", expected " + std::to_string(agent.rows()));
  }
  ++state.k;
  const double w = 1.0 / static_cast<double>(state.k);
  state.x += w * (agent.info_gain() * y - state.x);
}

struct TokenPayload {
  Vector d;
  Matrix K;
  std::size_t position = 0;
  std::vector<char> visited;
  std::size_t visited_count = 0;

  static TokenPayload start(Eigen::Index dim, std::size_t n, std::size_t start_node) {
    if (start_node >= n) throw std::out_of_range("start node out of range");
    return {Vector::Zero(dim), Matrix::Zero(dim, dim), start_node, std::vector<char>(n, 0), 0};
  }

  bool has_visited(std::size_t i) const { return visited.at(i) != 0; }
};

/// Holder update: d += x - x̃, K += B on the first visit, then x̃ <- x, τ <- t.
inline void token_visit(TokenPayload& payload, AgentLocalState& state, const AgentModel& agent,
                        long t) {
  if (payload.position != agent.id()) {
    throw std::invalid_argument("token_visit: token is at " + std::to_string(payload.position) +
                                ", not at agent " + std::to_string(agent.id()));
  }
  payload.d += state.x - state.x_snapshot;
  if (!payload.visited[agent.id()]) {
    payload.visited[agent.id()] = 1;
    ++payload.visited_count;
    payload.K += agent.B();
  }
  state.x_snapshot = state.x;
  state.last_visit = t;
}

/// s(t) from the payload. (I/α + K) is positive definite whenever α > 0 and
/// K is PSD, so the Cholesky solve is always well posed; a large residual
/// signals a numerically broken K and raises SolveFailed.
inline Vector estimate(const TokenPayload& payload, const AlphaSchedule& schedule, long t) {
  const double alpha = schedule(t);
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha(t) must be positive");
  Matrix m = payload.K;
  m.diagonal().array() += 1.0 / alpha;
  return spd_solve(m, payload.d, kEstimateResidualTol);
}

// ---------------------------------------------------------------------------
// Episodes

/// Independent noise, graph and token streams for one trial. Two runs built
/// from the same (master, trial) observe the same measurements and A(t).
struct TrialStreams {
  Rng noise;
  Rng graph;
  Rng token;

  static TrialStreams derive(std::uint64_t master, std::uint64_t trial) {
    return {make_rng(master, trial, Stream::Noise), make_rng(master, trial, Stream::Graph),
            make_rng(master, trial, Stream::Token)};
  }
};

struct RecordOptions {
  bool central = false;          ///< oracle estimate on the same draws
  bool per_agent = false;        ///< per-agent last-seen errors and τ_i
  std::vector<long> sample_times;  ///< sorted; empty records every tick
};

/// Read-only view handed to an observer at the end of every tick.
struct TickView {
  long t;
  std::size_t holder;       ///< p(t)
  std::size_t next_holder;  ///< p(t+1)
  const MeasurementBatch& batch;
  const Adjacency& adjacency;  ///< A(t), used for the move
  const TokenPayload& payload;
  std::span<const AgentLocalState> agents;
  const Vector& estimate;
};

using TickObserver = std::function<void(const TickView&)>;

struct EpisodeTrace {
  std::vector<long> t;
  std::vector<std::size_t> holder;
  std::vector<std::size_t> visited_count;
  std::vector<double> token_sq_err;           ///< ||s(t) - θ||²
  std::vector<double> mean_last_seen_sq_err;  ///< mean over S(t) of ||s(τ_i) - θ||²
  std::vector<double> central_sq_err;         ///< ||θ̂_c(t) - θ||², if requested
  std::vector<std::vector<double>> last_seen_sq_err;  ///< [sample][agent], if requested
  std::vector<std::vector<long>> last_visit;          ///< [sample][agent], -1 unvisited
  Vector final_estimate;
  double theta_sq_norm = 0.0;
};

/// Runs ticks t = 0..horizon. Each tick: all agents measure and update x_i;
/// the holder updates the token; s(t) is computed and stored as the holder's
/// last-seen estimate; A(t) is drawn and the token moves.
inline EpisodeTrace run_episode(const GlobalModel& model, const GraphProcessSpec& spec,
                                const TransitionRule& rule, const AlphaSchedule& schedule,
                                long horizon, std::size_t start_node, const RecordOptions& record,
                                TrialStreams& streams, const TickObserver& observer = {}) {
  const std::size_t n = model.n();
  if (spec.n() != n) {
    throw std::invalid_argument("graph has " + std::to_string(spec.n()) + " nodes, model has " +
                                std::to_string(n) + " agents");
  }
  if (horizon < 0) throw std::invalid_argument("horizon must be >= 0");
  const Eigen::Index dim = model.dim();
  const Vector& theta = model.theta();

  std::vector<AgentLocalState> agents(n, AgentLocalState::zero(dim));
  std::vector<double> last_seen_err(n, 0.0);
  TokenPayload payload = TokenPayload::start(dim, n, start_node);
  MeasurementBatch batch;
  Adjacency adj(n);
  Vector s = Vector::Zero(dim);
  Vector x_sum(dim);

  EpisodeTrace trace;
  trace.theta_sq_norm = theta.squaredNorm();
  const bool all_ticks = record.sample_times.empty();
  const std::size_t expected =
      all_ticks ? static_cast<std::size_t>(horizon + 1) : record.sample_times.size();
  trace.t.reserve(expected);
  trace.holder.reserve(expected);
  trace.visited_count.reserve(expected);
  trace.token_sq_err.reserve(expected);
  trace.mean_last_seen_sq_err.reserve(expected);
  std::size_t next_sample = 0;

  for (long t = 0; t <= horizon; ++t) {
    sample_measurements_into(model, t, streams.noise, batch);
    for (std::size_t i = 0; i < n; ++i) local_update(agents[i], model.agent(i), batch.y[i]);

    const std::size_t holder = payload.position;
    token_visit(payload, agents[holder], model.agent(holder), t);
    s = estimate(payload, schedule, t);
    agents[holder].last_seen_estimate = s;
    const double err = (s - theta).squaredNorm();
    last_seen_err[holder] = err;

    const bool sampled = all_ticks || (next_sample < record.sample_times.size() &&
                                       record.sample_times[next_sample] == t);
    if (sampled) {
      if (!all_ticks) ++next_sample;
      trace.t.push_back(t);
      trace.holder.push_back(holder);
      trace.visited_count.push_back(payload.visited_count);
      trace.token_sq_err.push_back(err);
      double seen = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (payload.visited[i]) seen += last_seen_err[i];
      trace.mean_last_seen_sq_err.push_back(seen / static_cast<double>(payload.visited_count));
      if (record.central) {
        x_sum.setZero();
        for (const auto& a : agents) x_sum += a.x;
        trace.central_sq_err.push_back((model.solve_fisher(x_sum) - theta).squaredNorm());
      }
      if (record.per_agent) {
        std::vector<double> errs(n, 0.0);
        std::vector<long> taus(n, -1);
        for (std::size_t i = 0; i < n; ++i) {
          if (payload.visited[i]) errs[i] = last_seen_err[i];
          if (agents[i].last_visit) taus[i] = *agents[i].last_visit;
        }
        trace.last_seen_sq_err.push_back(std::move(errs));
        trace.last_visit.push_back(std::move(taus));
      }
    }

    next_adjacency_into(spec, t, streams.graph, adj);
    const TokenPosition moved = step_token({holder, t}, adj, rule, streams.token);
    payload.position = moved.node;

    if (observer) {
      observer(TickView{t, holder, moved.node, batch, adj, payload, agents, s});
    }
  }
  trace.final_estimate = s;
  return trace;
}

}  // namespace roamtok

#endif  // ROAMTOK_ROAMING_TOKEN_HPP
