// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
// Each check recomputes its reference quantity in this file where it can.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "roamtok/config.hpp"
#include "roamtok/harness.hpp"
#include "roamtok/verification.hpp"

using namespace roamtok;

namespace {

RunSetup load(const std::string& name) {
  const std::string dir = ROAMTOK_CONFIG_DIR;
  return build_run_setup(load_config_file(dir + "/" + name), dir);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

/// Audits every token move and every rule application seen by an observer.
struct ChainAudit {
  std::atomic<long> moves{0};
  std::atomic<long> off_edge{0};
  std::atomic<long> rows{0};
  std::atomic<long> bad_rows{0};

  TickObserver observer(const TransitionRule& rule) {
    return [this, rule](const TickView& v) {
      ++moves;
      if (v.next_holder != v.holder && !v.adjacency(v.holder, v.next_holder)) ++off_edge;
      const Matrix q = apply_rule(rule, v.adjacency);
      for (Eigen::Index i = 0; i < q.rows(); ++i) {
        ++rows;
        if (std::abs(q.row(i).sum() - 1.0) > 1e-12) ++bad_rows;
      }
    };
  }
};

ChainAudit g_audit;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double fisher_inverse_trace_oracle(const GlobalModel& m) {
  Matrix sigma = Matrix::Zero(m.dim(), m.dim());
  for (const auto& a : m.agents()) sigma += a.H().transpose() * a.C().inverse() * a.H();
  return sigma.inverse().trace();
}

std::vector<EpisodeTrace> audited_token_runs(const ExperimentConfig& ex, long trials, long horizon,
                                             const RecordOptions& rec) {
  std::vector<EpisodeTrace> traces(static_cast<std::size_t>(trials));
  parallel_for(traces.size(), [&](std::size_t k) {
    TrialStreams streams = TrialStreams::derive(ex.seed, k);
    traces[k] = run_episode(ex.model, ex.graph, ex.rule, ex.schedule, horizon, ex.start_node, rec,
                            streams, g_audit.observer(ex.rule));
  });
  return traces;
}

bool is_reference_static_setup(const ExperimentConfig& ex) {
  if (!ex.graph.is_static() || ex.model.n() != 5 || ex.model.dim() != 2) return false;
  for (const auto& a : ex.model.agents())
    if (a.rows() != 1) return false;
  return is_strongly_connected(ex.graph.support()) &&
         ex.rule.kind == RuleKind::OutDegreeReciprocal && ex.schedule(0) == 1.0 &&
         ex.schedule(99) == 100.0;
}

// 1. t·mean||s(t)-θ||² / tr(Σ_c^{-1}) at t = 2e4.
Outcome optimality_ratio_check() {
  constexpr long kT = 20000;
  constexpr long kTrials = 2000;
  const auto setup = load("ref5_static.json");
  const auto& ex = setup.experiment;
  if (!is_reference_static_setup(ex)) return {false, "ref5_static.json is not the reference setup"};
  RecordOptions rec;
  rec.central = true;
  rec.sample_times = {kT};
  const auto traces = audited_token_runs(ex, kTrials, kT, rec);
  double tok = 0.0, cen = 0.0;
  for (const auto& tr : traces) {
    tok += tr.token_sq_err.back();
    cen += tr.central_sq_err.back();
  }
  const double tr_inv = fisher_inverse_trace_oracle(ex.model);
  const double ratio = static_cast<double>(kT) * tok / kTrials / tr_inv;
  const double central = static_cast<double>(kT) * cen / kTrials / tr_inv;
  const auto lib = optimality_ratio(traces, ex.model);
  return {ratio >= 0.9 && ratio <= 1.2,
          "ratio " + fmt(ratio) + " (library " + fmt(lib.value.back()) + " +- " +
              fmt(lib.half_width.back()) + "), central on same draws " + fmt(central) + ", " +
              std::to_string(kTrials) + " trials, t=" + std::to_string(kT)};
}

// 2. Median relative error at t = 1e5.
Outcome consistency_check() {
  constexpr long kT = 100000;
  constexpr long kTrials = 100;
  const auto setup = load("ref5_static.json");
  const auto& ex = setup.experiment;
  RecordOptions rec;
  rec.sample_times = {kT};
  const auto traces = audited_token_runs(ex, kTrials, kT, rec);
  std::vector<double> rel;
  for (const auto& tr : traces)
    rel.push_back((tr.final_estimate - ex.model.theta()).norm() / ex.model.theta().norm());
  std::sort(rel.begin(), rel.end());
  const double median = 0.5 * (rel[kTrials / 2 - 1] + rel[kTrials / 2]);
  return {median < 0.01, "median ||s(1e5)-theta||/||theta|| = " + fmt(median) + " over " +
                             std::to_string(kTrials) + " trials"};
}

// 3. Covariance of the central estimate after 1000 measurements.
Outcome central_covariance_check() {
  constexpr long kSteps = 1000;
  constexpr long kTrials = 10000;
  const auto setup = load("ref5_static.json");
  const auto& model = setup.experiment.model;
  std::vector<Vector> est(static_cast<std::size_t>(kTrials));
  parallel_for(est.size(), [&](std::size_t k) {
    Rng rng = make_rng(setup.experiment.seed + 1, k, Stream::Noise);
    std::vector<Vector> sums(model.n());
    for (std::size_t i = 0; i < model.n(); ++i) sums[i] = Vector::Zero(model.agent(i).rows());
    for (long t = 0; t < kSteps; ++t) {
      const auto b = sample_measurements(model, t, rng);
      for (std::size_t i = 0; i < model.n(); ++i) sums[i] += b.y[i];
    }
    for (auto& s : sums) s /= static_cast<double>(kSteps);
    est[k] = central_estimate(model, sums);
  });
  Vector mean = Vector::Zero(model.dim());
  for (const auto& e : est) mean += e;
  mean /= static_cast<double>(kTrials);
  Matrix cov = Matrix::Zero(model.dim(), model.dim());
  for (const auto& e : est) cov += (e - mean) * (e - mean).transpose();
  cov /= static_cast<double>(kTrials - 1);
  Matrix sigma = Matrix::Zero(model.dim(), model.dim());
  for (const auto& a : model.agents()) sigma += a.H().transpose() * a.C().inverse() * a.H();
  const Matrix target = sigma.inverse() / static_cast<double>(kSteps);
  const double rel = (cov - target).norm() / target.norm();
  return {rel <= 0.10, "Frobenius relative error " + fmt(rel) + " over " +
                           std::to_string(kTrials) + " trials"};
}

GlobalModel random_model(Rng& rng, std::size_t n) {
  for (;;) {
    const auto dim = static_cast<Eigen::Index>(1 + rng() % 3);
    std::vector<AgentModel> agents;
    for (std::size_t i = 0; i < n; ++i) {
      const auto m = static_cast<Eigen::Index>(1 + rng() % 2);
      Matrix h(m, dim);
      for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index c = 0; c < dim; ++c) h(r, c) = standard_normal(rng);
      Matrix g(m, m);
      for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index c = 0; c < m; ++c) g(r, c) = 0.5 * standard_normal(rng);
      Matrix c = g * g.transpose() + (0.2 + uniform01(rng)) * Matrix::Identity(m, m);
      agents.emplace_back(i, std::move(h), std::move(c));
    }
    Vector theta(dim);
    for (Eigen::Index k = 0; k < dim; ++k) theta[k] = 3.0 * standard_normal(rng);
    try {
      return GlobalModel(std::move(agents), std::move(theta));
    } catch (const SingularModel&) {
    }
  }
}

// 4. Incremental (d, K) against recomputation over random episodes.
Outcome state_identity_check() {
  constexpr long kEpisodes = 1000;
  constexpr long kHorizon = 200;
  Rng rng = make_rng(4242, 0, Stream::Sampling);
  StateIdentityReport rep;
  for (long e = 0; e < kEpisodes; ++e) {
    const std::size_t n = 2 + rng() % 7;
    const auto model = random_model(rng, n);
    Adjacency backbone(n);
    const double density = 0.2 + 0.8 * uniform01(rng);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j && bernoulli(rng, density)) backbone.set(i, j, true);
    const GraphProcessSpec spec(IidFailure{backbone, 0.9 * uniform01(rng)});
    const auto rule = bernoulli(rng, 0.5) ? TransitionRule::out_degree_reciprocal()
                                          : TransitionRule::lazy(0.1 + 0.8 * uniform01(rng));
    StateIdentityOracle oracle(model, 1e-10, rep);
    TrialStreams streams = TrialStreams::derive(77, static_cast<std::uint64_t>(e));
    const auto audit = g_audit.observer(rule);
    run_episode(model, spec, rule, AlphaSchedule::linear(), kHorizon, rng() % n, RecordOptions{},
                streams, [&](const TickView& v) {
                  oracle(v);
                  audit(v);
                });
    ++rep.episodes;
  }
  std::string detail = std::to_string(rep.episodes) + " episodes, " +
                       std::to_string(rep.ticks_checked) + " ticks, " +
                       std::to_string(rep.violations) + " violations, max rel. error d " +
                       fmt(rep.max_d_error) + " K " + fmt(rep.max_k_error);
  if (!rep.pass()) detail += "; " + rep.first_violation;
  return {rep.pass() && rep.violations == 0, detail};
}

// 5. Window-connected sequences are sequentially connected within (n-1)b frames.
Outcome window_cover_check() {
  const auto rep = window_cover_bruteforce(4, 2, 10000, 20240611);
  std::string detail;
  long total = 0, bad = 0;
  bool enough = true;
  for (const auto& c : rep.cases) {
    total += c.sequences;
    bad += c.counterexamples;
    if (!c.exhaustive && c.sequences < 10000) enough = false;
    detail += "n=" + std::to_string(c.n) + ",b=" + std::to_string(c.b) +
              (c.exhaustive ? " exh " : " smp ") + std::to_string(c.sequences) + "; ";
    if (!c.first_counterexample.empty()) detail += "[" + c.first_counterexample + "] ";
  }
  return {rep.pass() && enough && bad == 0,
          std::to_string(total) + " sequences, " + std::to_string(bad) + " counterexamples (" +
              detail.substr(0, detail.size() - 2) + ")"};
}

// 6. Empirical visit tails against the analytic bounds.
Outcome tail_check() {
  const auto setup = load("ref5_iid.json");
  const auto& ex = setup.experiment;
  TailCheckConfig cfg{ex.graph, ex.rule, ex.start_node, 10000, setup.verify.tail_horizon, ex.seed};
  const auto rep = verify_tail_bounds(cfg);
  double worst = -1.0;
  for (std::size_t t = 0; t < rep.all_visited.empirical.size(); ++t) {
    const double slack = rep.all_visited.empirical[t] -
                         (rep.all_visited.bound[t] +
                          3.0 * binomial_se(rep.all_visited.empirical[t], rep.trials));
    worst = std::max(worst, slack);
  }
  std::string detail = std::to_string(rep.trials) + " trajectories, delta " + fmt(rep.delta) +
                       ", c1 " + fmt(rep.constants.c1) + ", c2 " + fmt(rep.constants.c2) +
                       ", worst all-visited slack " + fmt(worst);
  if (!rep.pass) detail += "; " + rep.first_violation;
  return {rep.pass && rep.trials == 10000 && worst <= 0.0, detail};
}

// 7. Mean chain irreducible for every graph spec used above.
Outcome irreducibility_check() {
  bool ok = true;
  std::string detail;
  for (const char* name : {"ref5_static.json", "ref5_iid.json", "model_a_20.json"}) {
    const auto setup = load(name);
    const auto& ex = setup.experiment;
    const Matrix q = exact_mean_transition_matrix(ex.graph, ex.rule);
    const bool enumerated =
        ex.graph.is_iid() &&
        std::get<IidFailure>(ex.graph.kind()).backbone.edge_count() <= kMaxEnumeratedEdges;
    const bool irr = is_irreducible(q) && is_row_stochastic(q, 1e-12);
    ok = ok && irr;
    detail += std::string(name) + (irr ? " irreducible" : " REDUCIBLE") +
              (ex.graph.is_iid() ? (enumerated ? " (enumerated)" : " (row-factored)") : "") + "; ";
  }
  return {ok, detail.substr(0, detail.size() - 2)};
}

// 8. Token vs grid-tuned consensus+innovations on the 20-node model.
Outcome comparison_check() {
  const auto setup = load("model_a_20.json");
  ExperimentConfig ex = setup.experiment;
  const auto support = ex.graph.support();
  const auto* iid = std::get_if<IidFailure>(&ex.graph.kind());
  bool shape = iid && iid->p_fail == 0.5 && ex.model.n() == 20 && ex.model.dim() == 5 &&
               std::abs(relative_degree(support) - 0.12) <= 0.02 && ex.ci_grid.has_value();
  for (const auto& a : ex.model.agents())
    shape = shape && a.rows() == 1 && a.C()(0, 0) == 1.0;
  if (!shape) return {false, "model_a_20.json does not match the required setup"};

  const std::vector<long> times{100, 1000, 10000};
  ex.horizon = 10000;
  ex.trials = std::max<long>(ex.trials, 100);
  ex.sample_times = times;
  ex.algorithms = {Algorithm::Ci};
  ex.output_dir.clear();
  const auto ci = run_experiment(ex);

  RecordOptions rec;
  rec.sample_times = times;
  const auto token = rmse_token(audited_token_runs(ex, ex.trials, ex.horizon, rec));
  const auto& net = ci.metrics.at("rmse_network_ci");
  bool ok = true;
  std::string detail = std::to_string(ex.trials) + " paired trials, CI a=" + fmt(ci.ci_used->a) +
                       " b=" + fmt(ci.ci_used->b) + " tau2=" + fmt(ci.ci_used->tau2) + ";";
  for (long t : times) {
    ok = ok && token.at(t) <= net.at(t);
    detail += " t=" + std::to_string(t) + " token " + fmt(token.at(t)) + " ci " + fmt(net.at(t));
  }
  return {ok, detail};
}

// 9. Totals from every audited run above.
Outcome chain_mechanics_check() {
  bool rule_rows = true;
  for (std::size_t n = 1; n <= 4; ++n) {
    const std::size_t bits = n * (n - 1);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << bits); ++mask) {
      const auto a = detail::adjacency_from_mask(n, mask);
      for (const auto& rule : {TransitionRule::out_degree_reciprocal(), TransitionRule::lazy(0.3)}) {
        const Matrix q = apply_rule(rule, a);
        for (Eigen::Index i = 0; i < q.rows(); ++i) {
          ++g_audit.rows;
          if (std::abs(q.row(i).sum() - 1.0) > 1e-12) {
            ++g_audit.bad_rows;
            rule_rows = false;
          }
        }
      }
    }
  }
  const bool ok = g_audit.moves > 0 && g_audit.off_edge == 0 && g_audit.bad_rows == 0 && rule_rows;
  return {ok, std::to_string(g_audit.moves.load()) + " moves, " +
                  std::to_string(g_audit.off_edge.load()) + " off-edge, " +
                  std::to_string(g_audit.rows.load()) + " rule rows, " +
                  std::to_string(g_audit.bad_rows.load()) + " not summing to 1"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 optimality_ratio", optimality_ratio_check},
      {"2 consistency", consistency_check},
      {"3 central_covariance", central_covariance_check},
      {"4 state_identity", state_identity_check},
      {"5 window_cover_bruteforce", window_cover_check},
      {"6 visit_tail_bounds", tail_check},
      {"7 mean_chain_irreducible", irreducibility_check},
      {"8 token_vs_ci", comparison_check},
      {"9 chain_mechanics", chain_mechanics_check},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failed;
    std::printf("%s %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
                secs);
    std::fflush(stdout);
  }
  std::printf("%s overall: %d of %zu criteria failed\n", failed ? "FAIL" : "PASS", failed,
              criteria.size());
  return failed ? 1 : 0;
}
