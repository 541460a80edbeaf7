#ifndef ROAMTOK_TOKEN_CHAIN_HPP
#define ROAMTOK_TOKEN_CHAIN_HPP

// Token transition rules Q(A), token moves, the averaged chain E[Q(A(t))],
// irreducibility and hitting-time tails.

#include <algorithm>
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
#include "roamtok/parallel.hpp"
#include "roamtok/random.hpp"

namespace roamtok {

enum class RuleKind {
  /// 1/outdeg(i) on each out-neighbor; self-hold when outdeg(i) = 0.
  OutDegreeReciprocal,
  /// delta_self on the diagonal, the rest split evenly over out-neighbors.
  Lazy,
  /// 1/n on every node regardless of A. Breaks the support constraint; only
  /// useful for exercising the verifier.
  UniformAll,
};

struct TransitionRule {
  RuleKind kind = RuleKind::OutDegreeReciprocal;
  double delta_self = 0.0;

  static TransitionRule out_degree_reciprocal() { return {RuleKind::OutDegreeReciprocal, 0.0}; }

  static TransitionRule lazy(double delta_self) {
    if (!(delta_self > 0.0 && delta_self < 1.0)) {
      throw std::invalid_argument("lazy rule needs delta_self in (0, 1)");
    }
    return {RuleKind::Lazy, delta_self};
  }

  static TransitionRule uniform_all() { return {RuleKind::UniformAll, 0.0}; }

  /// Smallest positive entry this rule can produce on an n-node graph.
  double floor(std::size_t n) const {
    const double spread = n > 1 ? 1.0 / static_cast<double>(n - 1) : 1.0;
    switch (kind) {
      case RuleKind::OutDegreeReciprocal: return spread;
      case RuleKind::Lazy: return n > 1 ? std::min(delta_self, (1.0 - delta_self) * spread) : 1.0;
      case RuleKind::UniformAll: return 1.0 / static_cast<double>(std::max<std::size_t>(n, 1));
    }
    return 0.0;
  }

  /// Guaranteed diagonal mass when the holder has out-neighbors.
  double self_mass() const noexcept { return kind == RuleKind::Lazy ? delta_self : 0.0; }
};

inline std::string to_string(RuleKind k) {
  switch (k) {
    case RuleKind::OutDegreeReciprocal: return "out_degree_reciprocal";
    case RuleKind::Lazy: return "lazy";
    case RuleKind::UniformAll: return "uniform_all";
  }
  return "?";
}

/// Q(A)_ij for a holder whose out-degree is `outdeg`.
inline double transition_probability(const TransitionRule& rule, const Adjacency& a,
                                     std::size_t i, std::size_t j, std::size_t outdeg) {
  if (rule.kind == RuleKind::UniformAll) return 1.0 / static_cast<double>(a.n());
  if (outdeg == 0) return i == j ? 1.0 : 0.0;
  const double move = rule.kind == RuleKind::Lazy ? 1.0 - rule.delta_self : 1.0;
  if (i == j) return rule.kind == RuleKind::Lazy ? rule.delta_self : 0.0;
  return a(i, j) ? move / static_cast<double>(outdeg) : 0.0;
}

inline Matrix apply_rule(const TransitionRule& rule, const Adjacency& a) {
  const std::size_t n = a.n();
  Matrix q = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t d = a.out_degree(i);
    for (std::size_t j = 0; j < n; ++j) {
      q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          transition_probability(rule, a, i, j, d);
    }
  }
  return q;
}

inline bool is_row_stochastic(const Matrix& q, double tol = 1e-12) {
  if (q.rows() != q.cols()) return false;
  if ((q.array() < 0.0).any()) return false;
  return ((q.rowwise().sum().array() - 1.0).abs() <= tol).all();
}

/// Q_ij > 0 only where A_ij = 1, off the diagonal.
inline bool respects_support(const Matrix& q, const Adjacency& a) {
  for (std::size_t i = 0; i < a.n(); ++i)
    for (std::size_t j = 0; j < a.n(); ++j)
      if (i != j && q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > 0.0 && !a(i, j))
        return false;
  return true;
}

struct TokenPosition {
  std::size_t node = 0;
  long t = 0;
};

/// Samples p(t+1) from row p(t) of Q(A(t)). Throws ChainViolation if the chosen
/// node is neither the holder nor an out-neighbor in A.
inline TokenPosition step_token(TokenPosition pos, const Adjacency& a, const TransitionRule& rule,
                                Rng& rng) {
  const std::size_t n = a.n();
  const std::size_t i = pos.node;
  const std::size_t d = a.out_degree(i);
  const double u = uniform01(rng);
  double acc = 0.0;
  std::size_t next = i;
  std::size_t last_positive = i;
  bool chosen = false;
  for (std::size_t j = 0; j < n; ++j) {
    const double p = transition_probability(rule, a, i, j, d);
    if (p <= 0.0) continue;
    last_positive = j;
    acc += p;
    if (u < acc) {
      next = j;
      chosen = true;
      break;
    }
  }
  if (!chosen) next = last_positive;  // rounding leaves u just above the row sum
  if (next != i && !a(i, next)) {
    throw ChainViolation("token moved " + std::to_string(i) + " -> " + std::to_string(next) +
                         " at t=" + std::to_string(pos.t) + " without an edge");
  }
  return {next, pos.t + 1};
}

// ---------------------------------------------------------------------------
// Averaged chain

inline constexpr long kDefaultMeanSamples = 100000;
inline constexpr std::size_t kMaxEnumeratedEdges = 20;

/// Exact E[Q(A(t))] by enumerating all 2^|E| failure outcomes of an i.i.d.
/// spec. Limited to kMaxEnumeratedEdges backbone edges.
inline Matrix enumerate_mean_transition_matrix(const GraphProcessSpec& spec,
                                               const TransitionRule& rule) {
  if (spec.is_static()) return apply_rule(rule, std::get<StaticGraph>(spec.kind()).graph);
  if (!spec.is_iid()) throw UnsupportedProcess("mean transition matrix needs an i.i.d. or static process");
  const auto& iid = std::get<IidFailure>(spec.kind());
  const auto edges = iid.backbone.edges();
  if (edges.size() > kMaxEnumeratedEdges) {
    throw UnsupportedProcess("outcome enumeration limited to " +
                             std::to_string(kMaxEnumeratedEdges) + " edges, backbone has " +
                             std::to_string(edges.size()));
  }
  const std::size_t n = iid.backbone.n();
  const auto ni = static_cast<Eigen::Index>(n);
  Matrix mean = Matrix::Zero(ni, ni);
  Adjacency a(n);
  const std::uint64_t outcomes = std::uint64_t{1} << edges.size();
  for (std::uint64_t mask = 0; mask < outcomes; ++mask) {
    a.clear();
    double w = 1.0;
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const bool present = (mask >> e) & 1U;
      if (present) a.set(edges[e].first, edges[e].second, true);
      w *= present ? 1.0 - iid.p_fail : iid.p_fail;
    }
    if (w == 0.0) continue;
    mean += w * apply_rule(rule, a);
  }
  return mean;
}

/// Exact E[Q(A(t))] for an i.i.d. spec of any size. Row i of Q(A) depends only
/// on which of i's backbone out-edges survive, and for the supported rules only
/// through how many do, so each row reduces to a binomial sum.
inline Matrix row_factored_mean_transition_matrix(const GraphProcessSpec& spec,
                                                  const TransitionRule& rule) {
  if (spec.is_static()) return apply_rule(rule, std::get<StaticGraph>(spec.kind()).graph);
  if (!spec.is_iid()) throw UnsupportedProcess("mean transition matrix needs an i.i.d. or static process");
  const auto& iid = std::get<IidFailure>(spec.kind());
  const std::size_t n = iid.backbone.n();
  const auto ni = static_cast<Eigen::Index>(n);
  Matrix mean = Matrix::Zero(ni, ni);
  if (rule.kind == RuleKind::UniformAll) {
    mean.setConstant(1.0 / static_cast<double>(n));
    return mean;
  }
  const double keep = 1.0 - iid.p_fail;
  const double move = rule.kind == RuleKind::Lazy ? 1.0 - rule.delta_self : 1.0;
  // binom[k] = P(Bin(m, keep) = k), built by repeated convolution.
  auto binomial = [keep](std::size_t m) {
    std::vector<double> pmf{1.0};
    for (std::size_t s = 0; s < m; ++s) {
      std::vector<double> nxt(pmf.size() + 1, 0.0);
      for (std::size_t k = 0; k < pmf.size(); ++k) {
        nxt[k] += pmf[k] * (1.0 - keep);
        nxt[k + 1] += pmf[k] * keep;
      }
      pmf.swap(nxt);
    }
    return pmf;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t d = iid.backbone.out_degree(i);
    const auto ii = static_cast<Eigen::Index>(i);
    if (d == 0) {
      mean(ii, ii) = 1.0;
      continue;
    }
    const auto all = binomial(d);
    const double p_isolated = all[0];
    mean(ii, ii) = p_isolated + (1.0 - p_isolated) * rule.self_mass();
    // Neighbor j survives with prob keep; the other d-1 contribute k more.
    const auto others = binomial(d - 1);
    double per_neighbor = 0.0;
    for (std::size_t k = 0; k < others.size(); ++k)
      per_neighbor += others[k] * move / static_cast<double>(k + 1);
    per_neighbor *= keep;
    for (std::size_t j = 0; j < n; ++j)
      if (iid.backbone(i, j)) mean(ii, static_cast<Eigen::Index>(j)) = per_neighbor;
  }
  return mean;
}

/// Static -> Q(A) exactly; IidFailure -> Monte Carlo average over `samples`
/// independent draws. Deterministic sequences have no stationary mean chain.
inline Matrix mean_transition_matrix(const GraphProcessSpec& spec, const TransitionRule& rule,
                                     long samples, Rng& rng) {
  if (spec.is_deterministic()) {
    throw UnsupportedProcess("mean transition matrix is undefined for deterministic sequences");
  }
  if (samples < 1) throw std::invalid_argument("samples must be >= 1");
  if (spec.is_static()) return apply_rule(rule, std::get<StaticGraph>(spec.kind()).graph);
  const auto n = static_cast<Eigen::Index>(spec.n());
  Matrix acc = Matrix::Zero(n, n);
  Adjacency a(spec.n());
  for (long s = 0; s < samples; ++s) {
    next_adjacency_into(spec, s, rng, a);
    acc += apply_rule(rule, a);
  }
  return acc / static_cast<double>(samples);
}

/// Exact mean chain, choosing full enumeration when the backbone is small
/// enough and the row-factored form otherwise.
inline Matrix exact_mean_transition_matrix(const GraphProcessSpec& spec,
                                           const TransitionRule& rule) {
  if (spec.is_iid() &&
      std::get<IidFailure>(spec.kind()).backbone.edge_count() <= kMaxEnumeratedEdges) {
    return enumerate_mean_transition_matrix(spec, rule);
  }
  return row_factored_mean_transition_matrix(spec, rule);
}

/// Support digraph of Q (off-diagonal positive entries).
inline Adjacency support_graph(const Matrix& q) {
  const auto n = static_cast<std::size_t>(q.rows());
  Adjacency a(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > 0.0)
        a.set(i, j, true);
  return a;
}

inline bool is_irreducible(const Matrix& q) {
  if (q.rows() != q.cols()) throw std::invalid_argument("transition matrix must be square");
  return is_strongly_connected(support_graph(q));
}

/// Smallest positive off-diagonal entry of Q (1 for a single node).
inline double chain_floor(const Matrix& q) {
  double lo = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < q.rows(); ++i)
    for (Eigen::Index j = 0; j < q.cols(); ++j)
      if (i != j && q(i, j) > 0.0) lo = std::min(lo, q(i, j));
  return std::isfinite(lo) ? lo : 1.0;
}

/// π with π Q = π, Σπ = 1, for an irreducible Q.
inline Vector stationary_distribution(const Matrix& q) {
  const Eigen::Index n = q.rows();
  Matrix sys = q.transpose() - Matrix::Identity(n, n);
  sys.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs[n - 1] = 1.0;
  return sys.fullPivLu().solve(rhs);
}

// ---------------------------------------------------------------------------
// Hitting times

/// Empirical P(T > t0 + s) for s = 0..horizon, where T is the first time
/// t >= t0 with p(t) in `target`, starting from `start` at time t0. Trial k
/// uses streams derived from (seed, k).
inline std::vector<double> hitting_time_samples(const GraphProcessSpec& spec,
                                                const TransitionRule& rule,
                                                const std::vector<std::size_t>& target, long t0,
                                                std::size_t start, long trials, long horizon,
                                                std::uint64_t seed) {
  if (target.empty()) throw std::invalid_argument("target set must be nonempty");
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (horizon < 0 || t0 < 0) throw std::invalid_argument("negative horizon or start time");
  const std::size_t n = spec.n();
  std::vector<char> in_target(n, 0);
  for (auto v : target) {
    if (v >= n) throw std::out_of_range("target node out of range");
    in_target[v] = 1;
  }
  if (start >= n) throw std::out_of_range("start node out of range");

  // hit_at[k] = elapsed steps until the hit, or horizon+1 if none.
  std::vector<long> hit_at(static_cast<std::size_t>(trials));
  parallel_for(static_cast<std::size_t>(trials), [&](std::size_t k) {
    Rng graph_rng = make_rng(seed, k, Stream::Graph);
    Rng token_rng = make_rng(seed, k, Stream::Token);
    Adjacency a(n);
    TokenPosition pos{start, t0};
    long s = 0;
    for (; s <= horizon; ++s) {
      if (in_target[pos.node]) break;
      next_adjacency_into(spec, pos.t, graph_rng, a);
      pos = step_token(pos, a, rule, token_rng);
    }
    hit_at[k] = s;
  });

  std::vector<double> tail(static_cast<std::size_t>(horizon + 1), 0.0);
  for (long s = 0; s <= horizon; ++s) {
    long survivors = 0;
    for (long h : hit_at) survivors += h > s ? 1 : 0;
    tail[static_cast<std::size_t>(s)] = static_cast<double>(survivors) / static_cast<double>(trials);
  }
  return tail;
}

/// Tail bound (1 - δ^n)^{(t - t0)/n - 1}, clipped to 1.
inline double visit_tail_bound(std::size_t n, double delta, long t, long t0) {
  if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must lie in (0, 1]");
  if (t < t0) throw std::invalid_argument("t must be >= t0");
  const double eps = std::pow(delta, static_cast<double>(n));
  const double base = 1.0 - eps;
  const double expo = static_cast<double>(t - t0) / static_cast<double>(n) - 1.0;
  // With ε = 1 the hit is certain within n steps; pow(0, 0) would report 1.
  if (base <= 0.0) return expo >= 0.0 && t > t0 ? 0.0 : 1.0;
  return std::min(1.0, std::pow(base, expo));
}

/// Constants of the exponential visit bounds P(i ∉ S(t)) <= c1 e^{-c2 t}.
/// c2 is stored positive: c2 = -log(1 - ε)/m.
struct TailConstants {
  double epsilon = 0.0;
  double m = 1.0;
  double c1 = 1.0;
  double c2 = 0.0;
  /// Alternative c1 = 1 - ε quoted for the windowed setting. Not a valid
  /// bound in general; kept for reporting only.
  double c1_window_variant = 1.0;

  static TailConstants from(double epsilon, double m) {
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in (0, 1]");
    TailConstants c;
    c.epsilon = epsilon;
    c.m = m;
    if (epsilon >= 1.0) {
      c.c1 = std::numeric_limits<double>::infinity();
      c.c2 = std::numeric_limits<double>::infinity();
    } else {
      c.c1 = 1.0 / (1.0 - epsilon);
      c.c2 = -std::log1p(-epsilon) / m;
    }
    c.c1_window_variant = 1.0 - epsilon;
    return c;
  }

  /// i.i.d. networks: m = n, ε = δ^n.
  static TailConstants iid(std::size_t n, double delta) {
    return from(std::pow(delta, static_cast<double>(n)), static_cast<double>(n));
  }

  /// b-window connected sequences with lazy rule: m = (n-1)b, ε = δ^m.
  static TailConstants windowed(std::size_t n, std::size_t b, double delta) {
    const double m = static_cast<double>((n > 1 ? n - 1 : 1) * b);
    return from(std::pow(delta, m), m);
  }

  /// c1 e^{-c2 t}, clipped to 1; equals (1 - ε)^{t/m - 1}.
  double node_bound(double t) const {
    if (!std::isfinite(c2)) return t >= m ? 0.0 : 1.0;
    return std::min(1.0, c1 * std::exp(-c2 * t));
  }

  /// n c1 e^{-c2 t}, clipped to 1.
  double all_visited_bound(std::size_t n, double t) const {
    if (!std::isfinite(c2)) return t >= m ? 0.0 : 1.0;
    return std::min(1.0, static_cast<double>(n) * c1 * std::exp(-c2 * t));
  }
};

}  // namespace roamtok

#endif  // ROAMTOK_TOKEN_CHAIN_HPP
