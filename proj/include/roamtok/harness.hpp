#ifndef ROAMTOK_HARNESS_HPP
#define ROAMTOK_HARNESS_HPP

// Monte Carlo experiment runner: paired token / consensus+innovations /
// central runs, the r-MSE metrics, optimality ratios and CSV output.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "roamtok/baseline_ci.hpp"
#include "roamtok/csv.hpp"
#include "roamtok/errors.hpp"
#include "roamtok/graph_process.hpp"
#include "roamtok/metrics.hpp"
#include "roamtok/observation_model.hpp"
#include "roamtok/parallel.hpp"
#include "roamtok/roaming_token.hpp"
#include "roamtok/token_chain.hpp"

namespace roamtok {

inline constexpr const char* kVersion = "roamtok 0.1.0";

// ---------------------------------------------------------------------------
// r-MSE metrics. Every normalizer is ||θ||²: all estimators start at zero.

inline MetricSeries rmse_network_ci(const std::vector<CiTrace>& traces) {
  return ci_network_rmse(traces);
}

inline MetricSeries rmse_token(const std::vector<EpisodeTrace>& traces) {
  if (traces.empty()) throw MissingTrace("no token traces");
  std::vector<const std::vector<double>*> ptr;
  for (const auto& tr : traces) ptr.push_back(&tr.token_sq_err);
  return aggregate_trials("rmse_token", traces.front().t, ptr, 1.0 / traces.front().theta_sq_norm);
}

/// Per trial: (1/|S(t)|) Σ_{i∈S(t)} ||s(τ_i(t)) - θ||² / ||θ||², then averaged.
inline MetricSeries rmse_last_seen(const std::vector<EpisodeTrace>& traces) {
  if (traces.empty()) throw MissingTrace("no token traces");
  std::vector<const std::vector<double>*> ptr;
  for (const auto& tr : traces) ptr.push_back(&tr.mean_last_seen_sq_err);
  return aggregate_trials("rmse_last_seen", traces.front().t, ptr,
                          1.0 / traces.front().theta_sq_norm);
}

inline MetricSeries rmse_central(const std::vector<EpisodeTrace>& traces) {
  if (traces.empty()) throw MissingTrace("no token traces");
  std::vector<const std::vector<double>*> ptr;
  for (const auto& tr : traces) {
    if (tr.central_sq_err.size() != tr.t.size()) {
      throw MissingTrace("central estimator was not recorded");
    }
    ptr.push_back(&tr.central_sq_err);
  }
  return aggregate_trials("rmse_central", traces.front().t, ptr,
                          1.0 / traces.front().theta_sq_norm);
}

enum class EstimateSource { Token, Central };

/// (t+1) · mean ||ŝ(t) - θ||² / trace(Σ_c⁻¹). The multiplier is the number of
/// measurements absorbed by tick t, under which the central estimator's ratio
/// is exactly 1 in expectation at every t.
inline MetricSeries optimality_ratio(const std::vector<EpisodeTrace>& traces,
                                     const GlobalModel& model,
                                     EstimateSource source = EstimateSource::Token) {
  if (traces.size() < 2) throw MissingTrace("optimality ratio needs at least 2 trials");
  const double tr = model.fisher_inverse_trace();
  std::vector<const std::vector<double>*> ptr;
  for (const auto& trc : traces) {
    const auto& s = source == EstimateSource::Token ? trc.token_sq_err : trc.central_sq_err;
    if (s.size() != trc.t.size()) throw MissingTrace("estimate series missing for ratio");
    ptr.push_back(&s);
  }
  MetricSeries out = aggregate_trials(
      source == EstimateSource::Token ? "optimality_ratio_token" : "optimality_ratio_central",
      traces.front().t, ptr, 1.0 / tr);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double mult = static_cast<double>(out.t[k] + 1);
    out.value[k] *= mult;
    out.half_width[k] *= mult;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Visit-time tails

struct TailCheckConfig {
  GraphProcessSpec graph;
  TransitionRule rule;
  std::size_t start_node = 0;
  long trials = 10000;
  long horizon = 200;
  std::uint64_t seed = 1;
};

struct TailCurve {
  std::string name;
  std::vector<double> empirical;  ///< index = t
  std::vector<double> bound;
};

struct TailReport {
  bool pass = true;
  double delta = 0.0;       ///< chain floor used for ε = δ^n
  double rule_floor = 0.0;  ///< floor of the rule itself
  TailConstants constants;
  std::vector<TailCurve> node_curves;  ///< P(i ∉ S(t))
  TailCurve all_visited;               ///< P(S(t) ≠ V)
  std::string first_violation;
  long trials = 0;
};

/// Binomial standard error sqrt(p̂(1-p̂)/N).
inline double binomial_se(double p, long trials) {
  return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(trials));
}

/// Empirical P(i ∉ S(t)) and P(S(t) ≠ V) against c1 e^{-c2 t} and
/// n c1 e^{-c2 t} with m = n and ε = δ^n. δ is the smallest positive
/// off-diagonal entry of the exact mean chain, which bounds every step of a
/// shortest path in the averaged chain. PASS iff empirical <= bound + 3 se.
inline TailReport verify_tail_bounds(const TailCheckConfig& cfg) {
  if (cfg.graph.is_deterministic()) {
    throw UnsupportedProcess("tail verification needs an i.i.d. or static process");
  }
  const std::size_t n = cfg.graph.n();
  if (cfg.start_node >= n) throw std::out_of_range("start node out of range");
  TailReport rep;
  rep.trials = cfg.trials;
  const Matrix qbar = exact_mean_transition_matrix(cfg.graph, cfg.rule);
  rep.delta = chain_floor(qbar);
  rep.rule_floor = cfg.rule.floor(n);
  rep.constants = TailConstants::iid(n, rep.delta);

  const auto horizon = static_cast<std::size_t>(cfg.horizon);
  // first[k][i] = first visit time of node i in trial k, horizon+1 if never.
  std::vector<std::vector<long>> first(static_cast<std::size_t>(cfg.trials));
  parallel_for(first.size(), [&](std::size_t k) {
    Rng graph_rng = make_rng(cfg.seed, k, Stream::Graph);
    Rng token_rng = make_rng(cfg.seed, k, Stream::Token);
    std::vector<long> fv(n, cfg.horizon + 1);
    std::size_t seen = 0;
    Adjacency a(n);
    TokenPosition pos{cfg.start_node, 0};
    for (long t = 0; t <= cfg.horizon; ++t) {
      if (fv[pos.node] > cfg.horizon) {
        fv[pos.node] = t;
        if (++seen == n) break;
      }
      next_adjacency_into(cfg.graph, t, graph_rng, a);
      pos = step_token(pos, a, cfg.rule, token_rng);
    }
    first[k] = std::move(fv);
  });

  rep.node_curves.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    rep.node_curves[i].name = "node_" + std::to_string(i);
    rep.node_curves[i].empirical.assign(horizon + 1, 0.0);
    rep.node_curves[i].bound.assign(horizon + 1, 0.0);
  }
  rep.all_visited.name = "all_visited";
  rep.all_visited.empirical.assign(horizon + 1, 0.0);
  rep.all_visited.bound.assign(horizon + 1, 0.0);
  const double r = static_cast<double>(cfg.trials);
  for (std::size_t t = 0; t <= horizon; ++t) {
    const auto tl = static_cast<long>(t);
    long incomplete = 0;
    std::vector<long> missing(n, 0);
    for (const auto& fv : first) {
      bool any = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (fv[i] > tl) {
          ++missing[i];
          any = true;
        }
      }
      incomplete += any ? 1 : 0;
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto& c = rep.node_curves[i];
      c.empirical[t] = static_cast<double>(missing[i]) / r;
      c.bound[t] = rep.constants.node_bound(static_cast<double>(t));
      if (c.empirical[t] > c.bound[t] + 3.0 * binomial_se(c.empirical[t], cfg.trials) && rep.pass) {
        rep.pass = false;
        rep.first_violation = "P(" + std::to_string(i) + " not in S(t)) = " +
                              format_double(c.empirical[t]) + " > bound " +
                              format_double(c.bound[t]) + " at t=" + std::to_string(t);
      }
    }
    auto& av = rep.all_visited;
    av.empirical[t] = static_cast<double>(incomplete) / r;
    av.bound[t] = rep.constants.all_visited_bound(n, static_cast<double>(t));
    if (av.empirical[t] > av.bound[t] + 3.0 * binomial_se(av.empirical[t], cfg.trials) && rep.pass) {
      rep.pass = false;
      rep.first_violation = "P(S(t) != V) = " + format_double(av.empirical[t]) + " > bound " +
                            format_double(av.bound[t]) + " at t=" + std::to_string(t);
    }
  }
  return rep;
}

/// CSV with columns t,empirical_tail,analytic_bound.
inline std::string tail_csv(const std::vector<double>& empirical, const std::vector<double>& bound,
                            long t0 = 0) {
  std::ostringstream os;
  os << "t,empirical_tail,analytic_bound\n";
  for (std::size_t k = 0; k < empirical.size(); ++k) {
    os << (t0 + static_cast<long>(k)) << ',' << format_double(empirical[k]) << ','
       << format_double(k < bound.size() ? bound[k] : std::nan("")) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// CSV writers

/// Long format: t,metric,value,ci_half_width,trials.
inline std::string metrics_csv(const std::vector<MetricSeries>& metrics) {
  std::ostringstream os;
  os << "t,metric,value,ci_half_width,trials\n";
  for (const auto& m : metrics)
    for (std::size_t k = 0; k < m.size(); ++k)
      os << m.t[k] << ',' << m.name << ',' << format_double(m.value[k]) << ','
         << format_double(m.half_width[k]) << ',' << m.trials << '\n';
  return os.str();
}

/// Wide format: t followed by one column per metric. All series must share t.
inline std::string wide_csv(const std::vector<MetricSeries>& metrics) {
  std::ostringstream os;
  os << 't';
  for (const auto& m : metrics) os << ',' << m.name;
  os << '\n';
  if (metrics.empty()) return os.str();
  for (std::size_t k = 0; k < metrics.front().size(); ++k) {
    os << metrics.front().t[k];
    for (const auto& m : metrics) {
      if (m.t.size() != metrics.front().t.size() || m.t[k] != metrics.front().t[k]) {
        throw MissingTrace("wide CSV needs series sampled at identical times");
      }
      os << ',' << format_double(m.value[k]);
    }
    os << '\n';
  }
  return os.str();
}

/// t,holder,visited_count,token_sq_err,mean_last_seen_sq_err.
inline std::string episode_csv(const EpisodeTrace& tr) {
  std::ostringstream os;
  os << "t,holder,visited_count,token_sq_err,mean_last_seen_sq_err\n";
  for (std::size_t k = 0; k < tr.t.size(); ++k)
    os << tr.t[k] << ',' << tr.holder[k] << ',' << tr.visited_count[k] << ','
       << format_double(tr.token_sq_err[k]) << ',' << format_double(tr.mean_last_seen_sq_err[k])
       << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Experiments

enum class Algorithm { Token, Ci, Central };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Token: return "token";
    case Algorithm::Ci: return "ci";
    case Algorithm::Central: return "central";
  }
  return "?";
}

struct ExperimentConfig {
  ExperimentConfig(GlobalModel m, GraphProcessSpec g) : model(std::move(m)), graph(std::move(g)) {}

  GlobalModel model;
  GraphProcessSpec graph;
  TransitionRule rule = TransitionRule::out_degree_reciprocal();
  AlphaSchedule schedule = AlphaSchedule::linear();
  std::size_t start_node = 0;
  std::set<Algorithm> algorithms{Algorithm::Token};
  CiConfig ci;
  std::optional<CiGrid> ci_grid;  ///< tune the baseline before the paired run
  long grid_trials = 20;
  long horizon = 1000;
  long trials = 10;
  std::uint64_t seed = 1;
  std::vector<long> sample_times;  ///< empty = every tick
  std::filesystem::path output_dir;  ///< empty = keep results in memory only
  nlohmann::json config_echo;        ///< effective config, copied to metadata.json
};

struct ExperimentResult {
  std::map<std::string, MetricSeries> metrics;
  std::vector<EpisodeTrace> token_traces;
  std::vector<CiTrace> ci_traces;
  std::optional<CiConfig> ci_used;
  std::optional<GridSearchResult> grid;
  std::vector<std::filesystem::path> files;
};

inline void require_finite(const MetricSeries& m) {
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (!std::isfinite(m.value[k]) || !std::isfinite(m.half_width[k])) {
      throw NonFiniteMetric("metric '" + m.name + "' is not finite at t=" + std::to_string(m.t[k]));
    }
  }
}

/// Runs every requested algorithm on shared per-trial draws: trial k of the
/// token run and of the baseline both use TrialStreams::derive(seed, k).
/// Results are aggregated in trial order, so they are independent of thread
/// scheduling. Files are written only after every computation succeeded; a
/// failed write removes whatever was already written.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.algorithms.empty()) throw ConfigError("run.algorithms: no algorithm requested");
  if (cfg.horizon < 1) throw ConfigError("run.horizon must be >= 1");
  if (cfg.trials < 1) throw ConfigError("run.trials must be >= 1");
  if (cfg.graph.n() != cfg.model.n()) {
    throw ConfigError("graph has " + std::to_string(cfg.graph.n()) + " nodes but model has " +
                      std::to_string(cfg.model.n()) + " agents");
  }
  for (std::size_t k = 0; k < cfg.sample_times.size(); ++k) {
    if (cfg.sample_times[k] < 0 || cfg.sample_times[k] > cfg.horizon ||
        (k > 0 && cfg.sample_times[k] <= cfg.sample_times[k - 1])) {
      throw ConfigError("run.sample_times must be strictly increasing within [0, horizon]");
    }
  }

  ExperimentResult res;
  RecordOptions rec;
  rec.sample_times = cfg.sample_times;
  rec.central = cfg.algorithms.count(Algorithm::Central) > 0;

  const bool want_token = cfg.algorithms.count(Algorithm::Token) || rec.central;
  if (want_token) {
    res.token_traces.resize(static_cast<std::size_t>(cfg.trials));
    parallel_for(res.token_traces.size(), [&](std::size_t k) {
      TrialStreams streams = TrialStreams::derive(cfg.seed, k);
      res.token_traces[k] = run_episode(cfg.model, cfg.graph, cfg.rule, cfg.schedule, cfg.horizon,
                                        cfg.start_node, rec, streams);
    });
  }
  if (cfg.algorithms.count(Algorithm::Token)) {
    res.metrics.emplace("rmse_token", rmse_token(res.token_traces));
    res.metrics.emplace("rmse_last_seen", rmse_last_seen(res.token_traces));
    if (cfg.trials >= 2) {
      res.metrics.emplace("optimality_ratio_token", optimality_ratio(res.token_traces, cfg.model));
    }
  }
  if (rec.central) {
    res.metrics.emplace("rmse_central", rmse_central(res.token_traces));
    if (cfg.trials >= 2) {
      res.metrics.emplace("optimality_ratio_central",
                          optimality_ratio(res.token_traces, cfg.model, EstimateSource::Central));
    }
  }
  if (cfg.algorithms.count(Algorithm::Ci)) {
    CiConfig ci = cfg.ci;
    if (cfg.ci_grid) {
      res.grid = grid_search(cfg.model, cfg.graph, *cfg.ci_grid, cfg.grid_trials, cfg.horizon,
                             cfg.seed, rec);
      ci = res.grid->best;
    }
    ci.validate(cfg.model.n(), cfg.model.dim());
    res.ci_used = ci;
    res.ci_traces.resize(static_cast<std::size_t>(cfg.trials));
    parallel_for(res.ci_traces.size(), [&](std::size_t k) {
      TrialStreams streams = TrialStreams::derive(cfg.seed, k);
      res.ci_traces[k] = run_ci_episode(cfg.model, cfg.graph, ci, cfg.horizon, rec, streams);
    });
    res.metrics.emplace("rmse_network_ci", rmse_network_ci(res.ci_traces));
  }
  for (const auto& [name, m] : res.metrics) require_finite(m);

  if (cfg.output_dir.empty()) return res;

  std::vector<MetricSeries> ordered;
  for (const char* key : {"rmse_token", "rmse_last_seen", "rmse_network_ci", "rmse_central",
                          "optimality_ratio_token", "optimality_ratio_central"}) {
    if (auto it = res.metrics.find(key); it != res.metrics.end()) ordered.push_back(it->second);
  }
  std::vector<MetricSeries> rmse_only;
  for (const auto& m : ordered)
    if (m.name.rfind("rmse_", 0) == 0) rmse_only.push_back(m);

  nlohmann::json meta;
  meta["version"] = kVersion;
  meta["seed"] = cfg.seed;
  meta["trials"] = cfg.trials;
  meta["horizon"] = cfg.horizon;
  meta["rmse_normalizer"] = "||theta||^2";
  meta["theta_sq_norm"] = cfg.model.theta().squaredNorm();
  meta["fisher_inverse_trace"] = cfg.model.fisher_inverse_trace();
  nlohmann::json algos = nlohmann::json::array();
  for (auto a : cfg.algorithms) algos.push_back(to_string(a));
  meta["algorithms"] = algos;
  if (res.ci_used) {
    meta["ci_used"] = {{"a", res.ci_used->a},
                       {"b", res.ci_used->b},
                       {"tau1", res.ci_used->tau1},
                       {"tau2", res.ci_used->tau2},
                       {"gain_mode", to_string(res.ci_used->gain_mode)}};
  }
  if (res.grid) {
    nlohmann::json scores = nlohmann::json::array();
    for (const auto& s : res.grid->scores) {
      scores.push_back({{"a", s.config.a},
                        {"b", s.config.b},
                        {"tau1", s.config.tau1},
                        {"tau2", s.config.tau2},
                        {"final_rmse", std::isfinite(s.final_rmse)
                                           ? nlohmann::json(s.final_rmse)
                                           : nlohmann::json("diverged")}});
    }
    meta["grid_scores"] = scores;
  }
  meta["config"] = cfg.config_echo;

  std::vector<std::pair<std::filesystem::path, std::string>> outputs;
  outputs.emplace_back(cfg.output_dir / "metrics.csv", metrics_csv(ordered));
  outputs.emplace_back(cfg.output_dir / "rmse_wide.csv", wide_csv(rmse_only));
  if (!res.token_traces.empty()) {
    outputs.emplace_back(cfg.output_dir / "episode_trace.csv", episode_csv(res.token_traces.front()));
  }
  outputs.emplace_back(cfg.output_dir / "metadata.json", meta.dump(2) + "\n");
  try {
    for (const auto& [path, content] : outputs) {
      write_text_file(path, content);
      res.files.push_back(path);
    }
  } catch (...) {
    std::error_code ec;
    for (const auto& p : res.files) std::filesystem::remove(p, ec);
    res.files.clear();
    throw;
  }
  return res;
}

}  // namespace roamtok

#endif  // ROAMTOK_HARNESS_HPP
