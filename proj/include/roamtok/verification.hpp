#ifndef ROAMTOK_VERIFICATION_HPP
#define ROAMTOK_VERIFICATION_HPP

// Independent checks behind the `verify` command: rule support and
// stochasticity, irreducibility of the mean chain, window connectivity of
// deterministic sequences, sequential connectivity brute force, and the
// token state identity d = Σ x_i(τ_i), K = Σ B_i over visited agents.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "roamtok/csv.hpp"
#include "roamtok/graph_process.hpp"
#include "roamtok/linalg.hpp"
#include "roamtok/observation_model.hpp"
#include "roamtok/random.hpp"
#include "roamtok/roaming_token.hpp"
#include "roamtok/token_chain.hpp"

namespace roamtok {

struct CheckResult {
  std::string name;
  bool pass = true;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Rule support / stochasticity

/// Applies the rule to `samples` adjacency draws (all frames for a
/// deterministic sequence, plus the support graph) and checks every row sums
/// to 1 within `tol`, entries are nonnegative, and off-diagonal mass sits only
/// on edges.
inline CheckResult check_rule(const GraphProcessSpec& spec, const TransitionRule& rule,
                              long samples, std::uint64_t seed, double tol = 1e-12) {
  CheckResult r{"rule_support_and_stochasticity", true, ""};
  std::vector<Adjacency> graphs{spec.support()};
  if (const auto* det = std::get_if<DeterministicSequence>(&spec.kind())) {
    graphs.insert(graphs.end(), det->frames.begin(), det->frames.end());
  } else {
    Rng rng = make_rng(seed, 0, Stream::Sampling);
    for (long s = 0; s < samples; ++s) graphs.push_back(next_adjacency(spec, s, rng));
  }
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    const Matrix q = apply_rule(rule, graphs[g]);
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      const double sum = q.row(i).sum();
      if (std::abs(sum - 1.0) > tol || (q.row(i).array() < 0.0).any()) {
        r.pass = false;
        r.detail = "row " + std::to_string(i) + " of sample " + std::to_string(g) + " sums to " +
                   format_double(sum);
        return r;
      }
    }
    if (!respects_support(q, graphs[g])) {
      r.pass = false;
      r.detail = "sample " + std::to_string(g) + ": positive probability on a missing edge";
      return r;
    }
  }
  r.detail = std::to_string(graphs.size()) + " graphs checked";
  return r;
}

/// Mean chain irreducibility for i.i.d./static processes, computed exactly.
inline CheckResult check_irreducible(const GraphProcessSpec& spec, const TransitionRule& rule) {
  CheckResult r{"mean_chain_irreducible", true, ""};
  const Matrix q = exact_mean_transition_matrix(spec, rule);
  r.pass = is_irreducible(q);
  r.detail = std::string(spec.is_iid() && std::get<IidFailure>(spec.kind()).backbone.edge_count() <=
                                              kMaxEnumeratedEdges
                             ? "outcome enumeration"
                             : "row-factored exact mean") +
             ", chain floor " + format_double(chain_floor(q));
  if (!r.pass) r.detail += "; support graph of the mean chain is not strongly connected";
  return r;
}

/// Every ordered pair sequentially connected (with self-loops) within
/// frames[t0, t0 + m) for every t0 with a complete window. Returns the first
/// failing (t0, i, j) in `detail`.
inline CheckResult check_sequential_windows(const std::vector<Adjacency>& frames, std::size_t m) {
  CheckResult r{"sequential_connectivity", true, ""};
  if (frames.empty() || m == 0) return r;
  const std::size_t n = frames.front().n();
  for (std::size_t t0 = 0; t0 + m <= frames.size(); ++t0) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto reach = sequential_reach(frames, i, t0, t0 + m);
      for (std::size_t j = 0; j < n; ++j) {
        if (!reach[j]) {
          r.pass = false;
          r.detail = "no sequential path " + std::to_string(i) + " -> " + std::to_string(j) +
                     " in frames [" + std::to_string(t0) + ", " + std::to_string(t0 + m) + ")";
          return r;
        }
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Brute force over small deterministic sequences

struct WindowCoverCase {
  std::size_t n = 0;
  std::size_t b = 0;
  bool exhaustive = false;
  long sequences = 0;  ///< valid (window-connected) sequences checked
  long counterexamples = 0;
  std::string first_counterexample;
};

struct WindowCoverReport {
  std::vector<WindowCoverCase> cases;
  bool pass() const {
    return std::all_of(cases.begin(), cases.end(),
                       [](const WindowCoverCase& c) { return c.counterexamples == 0 && c.sequences > 0; });
  }
};

namespace detail {

inline Adjacency adjacency_from_mask(std::size_t n, std::uint64_t mask) {
  Adjacency a(n);
  std::size_t bit = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) {
        if ((mask >> bit) & 1U) a.set(i, j, true);
        ++bit;
      }
  return a;
}

inline std::string describe(const std::vector<Adjacency>& frames) {
  std::string s;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    s += "[";
    for (auto [i, j] : frames[k].edges()) s += std::to_string(i) + ">" + std::to_string(j) + " ";
    s += "]";
  }
  return s;
}

inline void check_one(WindowCoverCase& c, const std::vector<Adjacency>& frames, std::size_t window) {
  if (!window_union_connected(frames, c.b)) return;
  ++c.sequences;
  const auto res = check_sequential_windows(frames, window);
  if (!res.pass) {
    if (c.counterexamples == 0) c.first_counterexample = describe(frames) + ": " + res.detail;
    ++c.counterexamples;
  }
}

}  // namespace detail

/// For each n in [2, max_n] and b in [1, max_b]: every sequence satisfying the
/// b-window connectivity condition must be sequentially connected with
/// self-loops over every (n-1)b-frame window. Enumerates all sequences of
/// length (n-1)b when there are at most `exhaustive_limit` of them; otherwise
/// draws `samples` window-connected sequences of length (n-1)b + extra_frames
/// with varying edge densities.
inline WindowCoverReport window_cover_bruteforce(std::size_t max_n, std::size_t max_b, long samples,
                                      std::uint64_t seed, long exhaustive_limit = 300000,
                                      std::size_t extra_frames = 3) {
  WindowCoverReport rep;
  for (std::size_t n = 2; n <= max_n; ++n) {
    for (std::size_t b = 1; b <= max_b; ++b) {
      WindowCoverCase c;
      c.n = n;
      c.b = b;
      const std::size_t window = (n - 1) * b;
      const std::size_t bits = n * (n - 1);
      const double total = std::pow(2.0, static_cast<double>(bits * window));
      if (total <= static_cast<double>(exhaustive_limit)) {
        c.exhaustive = true;
        const std::uint64_t graphs = std::uint64_t{1} << bits;
        std::vector<std::uint64_t> idx(window, 0);
        std::vector<Adjacency> frames(window, Adjacency(n));
        for (;;) {
          for (std::size_t k = 0; k < window; ++k) frames[k] = detail::adjacency_from_mask(n, idx[k]);
          detail::check_one(c, frames, window);
          std::size_t k = 0;
          while (k < window && ++idx[k] == graphs) idx[k++] = 0;
          if (k == window) break;
        }
      } else {
        Rng rng = make_rng(seed, n * 16 + b, Stream::Sampling);
        const std::size_t len = window + extra_frames;
        while (c.sequences < samples) {
          // Build frame by frame, redrawing a frame until the window ending
          // at it is strongly connected.
          std::vector<Adjacency> frames;
          bool ok = true;
          for (std::size_t k = 0; k < len && ok; ++k) {
            int attempts = 0;
            for (;;) {
              const double density = 0.1 + 0.5 * uniform01(rng);
              Adjacency a(n);
              for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                  if (i != j && bernoulli(rng, density)) a.set(i, j, true);
              frames.push_back(std::move(a));
              if (frames.size() < b ||
                  is_strongly_connected(union_of(frames, frames.size() - b, frames.size())))
                break;
              frames.pop_back();
              if (++attempts > 10000) {
                ok = false;
                break;
              }
            }
          }
          if (!ok) continue;
          detail::check_one(c, frames, window);
        }
      }
      rep.cases.push_back(std::move(c));
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Token state identity

struct StateIdentityReport {
  long episodes = 0;
  long ticks_checked = 0;
  long violations = 0;
  long transition_violations = 0;  ///< moves along a missing edge
  double max_d_error = 0.0;        ///< relative
  double max_k_error = 0.0;        ///< relative
  std::string first_violation;
  bool pass() const { return violations == 0 && transition_violations == 0; }
};

/// Observes an episode and recomputes (d, K) at every tick from scratch: its
/// own measurement sums per agent, its own record of visit times, and
/// B_i = H_iᵀ C_i⁻¹ H_i recomputed from H_i and C_i. Also checks every token
/// move follows an edge of A(t) or stays put.
class StateIdentityOracle {
 public:
  StateIdentityOracle(const GlobalModel& model, double tol, StateIdentityReport& report)
      : model_(model), tol_(tol), report_(report) {
    const std::size_t n = model.n();
    sums_.resize(n);
    snapshot_mean_.resize(n);
    visited_.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& a = model.agent(i);
      sums_[i] = Vector::Zero(a.rows());
      snapshot_mean_[i] = Vector::Zero(a.rows());
      b_.push_back(a.H().transpose() * a.C().ldlt().solve(a.H()));
      g_.push_back(a.C().ldlt().solve(a.H()).transpose());
    }
  }

  void operator()(const TickView& v) {
    const std::size_t n = model_.n();
    for (std::size_t i = 0; i < n; ++i) sums_[i] += v.batch.y[i];
    const double count = static_cast<double>(v.t + 1);
    // The holder at t was visited at t: its snapshot is the mean of y(0..t).
    snapshot_mean_[v.holder] = sums_[v.holder] / count;
    visited_[v.holder] = 1;

    const Eigen::Index dim = model_.dim();
    Vector d_ref = Vector::Zero(dim);
    Matrix k_ref = Matrix::Zero(dim, dim);
    for (std::size_t i = 0; i < n; ++i) {
      if (!visited_[i]) continue;
      d_ref += g_[i] * snapshot_mean_[i];
      k_ref += b_[i];
    }
    const double de = (v.payload.d - d_ref).norm() / std::max(1.0, d_ref.norm());
    const double ke = (v.payload.K - k_ref).norm() / std::max(1.0, k_ref.norm());
    report_.max_d_error = std::max(report_.max_d_error, de);
    report_.max_k_error = std::max(report_.max_k_error, ke);
    ++report_.ticks_checked;
    if (!(de <= tol_ && ke <= tol_)) {
      if (report_.violations == 0) {
        report_.first_violation = "episode " + std::to_string(report_.episodes) + " t=" +
                                  std::to_string(v.t) + ": d error " + format_double(de) +
                                  ", K error " + format_double(ke);
      }
      ++report_.violations;
    }
    if (v.next_holder != v.holder && !v.adjacency(v.holder, v.next_holder)) {
      if (report_.transition_violations == 0 && report_.violations == 0) {
        report_.first_violation = "episode " + std::to_string(report_.episodes) + " t=" +
                                  std::to_string(v.t) + ": move " + std::to_string(v.holder) +
                                  " -> " + std::to_string(v.next_holder) + " without edge";
      }
      ++report_.transition_violations;
    }
  }

 private:
  const GlobalModel& model_;
  double tol_;
  StateIdentityReport& report_;
  std::vector<Vector> sums_;
  std::vector<Vector> snapshot_mean_;
  std::vector<char> visited_;
  std::vector<Matrix> b_;
  std::vector<Matrix> g_;
};

/// Runs `episodes` episodes of the given setup under the oracle.
inline StateIdentityReport check_state_identity(const GlobalModel& model,
                                                const GraphProcessSpec& spec,
                                                const TransitionRule& rule,
                                                const AlphaSchedule& schedule, long episodes,
                                                long horizon, std::uint64_t seed,
                                                double tol = 1e-10) {
  StateIdentityReport rep;
  for (long e = 0; e < episodes; ++e) {
    StateIdentityOracle oracle(model, tol, rep);
    TrialStreams streams = TrialStreams::derive(seed, static_cast<std::uint64_t>(e));
    Rng start_rng = make_rng(seed, static_cast<std::uint64_t>(e), Stream::Sampling);
    const auto start = static_cast<std::size_t>(start_rng() % model.n());
    run_episode(model, spec, rule, schedule, horizon, start, RecordOptions{}, streams,
                [&](const TickView& v) { oracle(v); });
    ++rep.episodes;
  }
  return rep;
}

}  // namespace roamtok

#endif  // ROAMTOK_VERIFICATION_HPP
