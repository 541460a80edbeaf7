// roamtok: command-line front end for simulations, paired comparisons,
// verification reports, baseline grid searches and backbone generation.
//
// Exit codes: 0 success, 1 config error, 2 runtime failure, 3 verification FAIL.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "roamtok/config.hpp"
#include "roamtok/csv.hpp"
#include "roamtok/harness.hpp"
#include "roamtok/verification.hpp"

namespace fs = std::filesystem;
using namespace roamtok;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitVerifyFail = 3;

struct CommonArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("-c,--config", args.config, "JSON config file (or a metadata.json echo)")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--set", args.overrides, "override a config key, e.g. --set graph.p_fail=0.3")
      ->take_all();
  sub->add_option("--seed", args.seed, "master seed (wins over run.seed)");
  sub->add_option("-o,--out", args.out, "output directory (wins over run.output_dir)");
}

RunSetup load_setup(const CommonArgs& args) {
  Json cfg = load_config_file(args.config);
  // A metadata.json sidecar carries the effective config under "config".
  if (cfg.is_object() && cfg.contains("version") && cfg.contains("config")) cfg = cfg["config"];
  for (const auto& o : args.overrides) apply_override(cfg, o);
  if (!args.out.empty()) cfg["run"]["output_dir"] = fs::absolute(args.out).lexically_normal().string();
  RunSetup setup = build_run_setup(std::move(cfg), fs::path(args.config).parent_path(), args.seed);
  if (setup.seed_defaulted) {
    std::cerr << "warning: no seed given; using default seed " << kDefaultSeed << "\n";
  }
  return setup;
}

void print_summary(const ExperimentResult& res) {
  for (const auto& [name, m] : res.metrics) {
    if (m.size() == 0) continue;
    std::cout << name << " at t=" << m.t.back() << ": " << format_double(m.value.back()) << " +/- "
              << format_double(m.half_width.back()) << "\n";
  }
  if (res.ci_used) std::cout << "ci parameters: " << res.ci_used->label() << "\n";
  for (const auto& f : res.files) std::cout << "wrote " << f.string() << "\n";
}

int cmd_simulate(const CommonArgs& args) {
  RunSetup setup = load_setup(args);
  auto& ex = setup.experiment;
  if (ex.algorithms.count(Algorithm::Ci)) {
    throw ConfigError("simulate runs token and central only; use compare for the ci baseline");
  }
  print_summary(run_experiment(ex));
  return kExitOk;
}

int cmd_compare(const CommonArgs& args) {
  RunSetup setup = load_setup(args);
  auto& ex = setup.experiment;
  if (!setup.effective["run"].contains("algorithms")) {
    ex.algorithms = {Algorithm::Token, Algorithm::Ci};
  }
  if (ex.algorithms.empty()) throw ConfigError("run.algorithms: no algorithm requested");
  print_summary(run_experiment(ex));
  return kExitOk;
}

int cmd_gridsearch(const CommonArgs& args) {
  RunSetup setup = load_setup(args);
  const auto& ex = setup.experiment;
  const CiGrid grid = ex.ci_grid ? *ex.ci_grid : [&] {
    CiGrid g;
    g.gain_mode = ex.ci.gain_mode;
    g.gains = ex.ci.gains;
    return g;
  }();
  RecordOptions rec;
  rec.sample_times = ex.sample_times;
  const auto res = grid_search(ex.model, ex.graph, grid, ex.grid_trials, ex.horizon, ex.seed, rec);
  std::ostringstream table;
  table << "a,b,tau1,tau2,final_rmse\n";
  for (const auto& s : res.scores) {
    table << format_double(s.config.a) << ',' << format_double(s.config.b) << ','
          << format_double(s.config.tau1) << ',' << format_double(s.config.tau2) << ','
          << format_double(s.final_rmse) << '\n';
  }
  std::cout << table.str() << "best: " << res.best.label() << " final r-MSE "
            << format_double(res.curve.value.back()) << "\n";
  if (!ex.output_dir.empty()) {
    write_text_file(ex.output_dir / "grid_scores.csv", table.str());
    write_text_file(ex.output_dir / "grid_best_curve.csv", metrics_csv({res.curve}));
    Json meta{{"version", kVersion}, {"seed", ex.seed}, {"config", setup.effective}};
    write_text_file(ex.output_dir / "metadata.json", meta.dump(2) + "\n");
    std::cout << "wrote " << (ex.output_dir / "grid_scores.csv").string() << "\n";
  }
  return kExitOk;
}

void report(std::ostream& os, const CheckResult& c) {
  os << (c.pass ? "PASS " : "FAIL ") << c.name;
  if (!c.detail.empty()) os << ": " << c.detail;
  os << "\n";
}

int cmd_verify(const CommonArgs& args) {
  RunSetup setup = load_setup(args);
  const auto& ex = setup.experiment;
  const auto& vs = setup.verify;
  std::vector<CheckResult> checks;
  std::vector<std::pair<std::string, std::string>> files;

  checks.push_back(check_rule(ex.graph, ex.rule, vs.rule_samples, ex.seed));

  if (ex.graph.is_deterministic()) {
    const auto& det = std::get<DeterministicSequence>(ex.graph.kind());
    if (setup.window) {
      const std::size_t b = *setup.window;
      CheckResult w{"window_unions_strongly_connected", window_union_connected(det.frames, b), ""};
      w.detail = "b = " + std::to_string(b);
      checks.push_back(w);
      checks.push_back(check_sequential_windows(det.frames, (ex.graph.n() - 1) * b));
    }
  } else {
    checks.push_back(check_irreducible(ex.graph, ex.rule));
    CheckResult tail{"visit_tail_bounds", true, ""};
    try {
      const auto rep = verify_tail_bounds({.graph = ex.graph,
                                           .rule = ex.rule,
                                           .start_node = ex.start_node,
                                           .trials = vs.tail_trials,
                                           .horizon = vs.tail_horizon,
                                           .seed = ex.seed});
      tail.pass = rep.pass;
      tail.detail = rep.pass ? std::to_string(rep.trials) + " trajectories, delta " +
                                   format_double(rep.delta) + ", c1 " +
                                   format_double(rep.constants.c1) + ", c2 " +
                                   format_double(rep.constants.c2)
                             : rep.first_violation;
      files.emplace_back("tail_all_visited.csv",
                         tail_csv(rep.all_visited.empirical, rep.all_visited.bound));
      for (std::size_t i = 0; i < rep.node_curves.size(); ++i) {
        files.emplace_back("tail_node_" + std::to_string(i) + ".csv",
                           tail_csv(rep.node_curves[i].empirical, rep.node_curves[i].bound));
      }
    } catch (const ChainViolation& e) {
      tail.pass = false;
      tail.detail = e.what();
    }
    checks.push_back(tail);
  }

  const auto l7 = window_cover_bruteforce(vs.cover_max_n, vs.cover_max_b, vs.cover_samples, ex.seed);
  CheckResult seq{"sequential_connectivity_bruteforce", l7.pass(), ""};
  for (const auto& c : l7.cases) {
    if (!seq.detail.empty()) seq.detail += "; ";
    seq.detail += "n=" + std::to_string(c.n) + " b=" + std::to_string(c.b) + " " +
                  (c.exhaustive ? "exhaustive " : "sampled ") + std::to_string(c.sequences) +
                  " sequences, " + std::to_string(c.counterexamples) + " counterexamples";
    if (!c.first_counterexample.empty()) seq.detail += " (first: " + c.first_counterexample + ")";
  }
  checks.push_back(seq);

  CheckResult ident{"token_state_identity", true, ""};
  try {
    const auto rep = check_state_identity(ex.model, ex.graph, ex.rule, ex.schedule,
                                          vs.identity_episodes, vs.identity_horizon, ex.seed);
    ident.pass = rep.pass();
    ident.detail = std::to_string(rep.episodes) + " episodes, " + std::to_string(rep.ticks_checked) +
                   " ticks, max rel. error d " + format_double(rep.max_d_error) + ", K " +
                   format_double(rep.max_k_error);
    if (!rep.pass()) ident.detail += "; " + rep.first_violation;
  } catch (const ChainViolation& e) {
    ident.pass = false;
    ident.detail = e.what();
  } catch (const SequenceExhausted& e) {
    ident.pass = false;
    ident.detail = e.what();
  }
  checks.push_back(ident);

  std::ostringstream text;
  bool all = true;
  for (const auto& c : checks) {
    report(text, c);
    all = all && c.pass;
  }
  text << (all ? "PASS" : "FAIL") << " overall\n";
  std::cout << text.str();
  if (!ex.output_dir.empty()) {
    write_text_file(ex.output_dir / "verify_report.txt", text.str());
    for (const auto& [name, content] : files) write_text_file(ex.output_dir / name, content);
    Json meta{{"version", kVersion}, {"seed", ex.seed}, {"config", setup.effective}};
    write_text_file(ex.output_dir / "metadata.json", meta.dump(2) + "\n");
  }
  return all ? kExitOk : kExitVerifyFail;
}

struct GenGraphArgs {
  std::size_t n = 20;
  std::optional<double> radius;
  std::optional<double> degree;
  std::uint64_t seed = kDefaultSeed;
  bool seed_given = false;
  std::string out;
  std::string format = "json";
  int retries = kDefaultMaxRetries;
};

int cmd_gen_graph(const GenGraphArgs& a) {
  if (a.radius.has_value() == a.degree.has_value()) {
    throw ConfigError("gen-graph needs exactly one of --radius or --degree");
  }
  if (!a.seed_given) std::cerr << "warning: no seed given; using default seed " << kDefaultSeed << "\n";
  Rng rng(derive_seed(a.seed, 0, Stream::Backbone));
  Adjacency g(a.n);
  double radius = 0.0;
  try {
    if (a.radius) {
      radius = *a.radius;
      g = generate_geometric_backbone(a.n, radius, rng, a.retries);
    } else {
      auto b = generate_geometric_backbone_for_degree(a.n, *a.degree, rng, a.retries);
      g = std::move(b.graph);
      radius = b.radius;
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  std::string content;
  if (a.format == "json") {
    Json doc{{"n", a.n},
             {"radius", radius},
             {"relative_degree", a.n >= 2 ? relative_degree(g) : 0.0},
             {"seed", a.seed},
             {"adjacency", g.to_rows()}};
    content = doc.dump() + "\n";
  } else {
    std::ostringstream os;
    write_edge_list_csv(os, std::vector<Adjacency>{g});
    content = os.str();
  }
  if (a.out.empty()) {
    std::cout << content;
  } else {
    write_text_file(a.out, content);
    std::cerr << "wrote " << a.out << " (relative degree "
              << format_double(a.n >= 2 ? relative_degree(g) : 0.0) << ")\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"roamtok: roaming-token distributed estimation simulator"};
  app.footer(config_keys_help() +
             "\nExit codes: 0 success, 1 config error, 2 runtime failure, 3 verification FAIL.");
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  CommonArgs common;
  auto* simulate = app.add_subcommand("simulate", "run the roaming token (and the central oracle)");
  auto* compare = app.add_subcommand("compare", "paired token vs consensus+innovations run");
  auto* verify = app.add_subcommand("verify", "bound and invariant checks, PASS/FAIL report");
  auto* gridsearch = app.add_subcommand("gridsearch", "consensus+innovations parameter grid search");
  for (auto* sub : {simulate, compare, verify, gridsearch}) add_common(sub, common);

  GenGraphArgs gen;
  auto* gen_graph = app.add_subcommand("gen-graph", "strongly connected geometric backbone");
  gen_graph->add_option("-n,--nodes", gen.n, "node count")->check(CLI::PositiveNumber);
  gen_graph->add_option("--radius", gen.radius, "link radius in the unit square");
  gen_graph->add_option("--degree", gen.degree, "target relative degree edges/(n(n-1))");
  auto* seed_opt = gen_graph->add_option("--seed", gen.seed, "seed for the point set");
  gen_graph->add_option("-o,--out", gen.out, "output file (default: stdout)");
  gen_graph->add_option("--format", gen.format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
  gen_graph->add_option("--max-retries", gen.retries, "resampling budget")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*simulate) return cmd_simulate(common);
    if (*compare) return cmd_compare(common);
    if (*verify) return cmd_verify(common);
    if (*gridsearch) return cmd_gridsearch(common);
    if (*gen_graph) {
      gen.seed_given = seed_opt->count() > 0;
      return cmd_gen_graph(gen);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
