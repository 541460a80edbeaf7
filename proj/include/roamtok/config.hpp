#ifndef ROAMTOK_CONFIG_HPP
#define ROAMTOK_CONFIG_HPP

// JSON experiment configuration: parsing with line-precise errors, dotted
// key=value overrides, strict key validation and construction of the model,
// graph process, rule, schedule and baseline settings.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "roamtok/baseline_ci.hpp"
#include "roamtok/errors.hpp"
#include "roamtok/graph_process.hpp"
#include "roamtok/harness.hpp"
#include "roamtok/observation_model.hpp"
#include "roamtok/roaming_token.hpp"
#include "roamtok/token_chain.hpp"

namespace roamtok {

using Json = nlohmann::json;

inline constexpr std::uint64_t kDefaultSeed = 1;

/// Documented keys per section; anything else is rejected.
inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> schema{
      {"model",
       {"kind", "L", "theta", "agents", "noise", "n", "noise_var", "seed", "invertibility_floor"}},
      {"graph",
       {"kind", "n", "backbone", "adjacency", "adjacency_file", "radius", "relative_degree",
        "backbone_seed", "max_retries", "p_fail", "frames", "frames_file", "frame_count", "cycle",
        "window"}},
      {"chain", {"rule", "delta_self"}},
      {"token", {"alpha_form", "alpha_params", "start_node"}},
      {"ci", {"a", "b", "tau1", "tau2", "gain_mode", "gains", "grid", "grid_trials"}},
      {"run", {"horizon", "trials", "seed", "algorithms", "sample_times", "output_dir"}},
      {"verify",
       {"tail_trials", "tail_horizon", "identity_episodes", "identity_horizon", "cover_samples",
        "cover_max_n", "cover_max_b", "rule_samples"}},
  };
  return schema;
}

/// One line per key for --help.
inline std::string config_keys_help() {
  return R"(Config keys (JSON, one object per section):
  model.kind                explicit | gaussian_rows
  model.L                   parameter dimension
  model.theta               true parameter, list of L numbers (gaussian_rows default: 1..L)
  model.agents[].H          observation matrix, rows of L numbers (explicit)
  model.agents[].C          noise covariance, SPD (explicit)
  model.noise               gaussian | uniform | none
  model.n                   agent count (gaussian_rows)
  model.noise_var           noise variance (gaussian_rows, default 1)
  model.seed                seed for drawing H rows (gaussian_rows)
  model.invertibility_floor smallest admissible eigenvalue of H^T H and Sigma_c (1e-10)
  graph.kind                static | iid_failure | deterministic
  graph.n                   node count
  graph.backbone            explicit | complete | geometric
  graph.adjacency           0/1 matrix (backbone = explicit)
  graph.adjacency_file      JSON file with an "adjacency" matrix, e.g. from gen-graph
  graph.radius              geometric link radius
  graph.relative_degree     geometric target relative degree (alternative to radius)
  graph.backbone_seed       seed for the geometric point set
  graph.max_retries         resampling budget for strongly connected backbones (1000)
  graph.p_fail              per-direction link failure probability (iid_failure)
  graph.frames              list of 0/1 matrices (deterministic)
  graph.frames_file         edge-list CSV t,from,to (deterministic)
  graph.frame_count         frame count for frames_file (default: last t + 1)
  graph.cycle               repeat frames cyclically (deterministic, default true)
  graph.window              window size b for the window-connectivity check
  chain.rule                out_degree_reciprocal | lazy | uniform_all
  chain.delta_self          self-hold mass of the lazy rule (default 1/n)
  token.alpha_form          linear (alpha = t+1) | power (alpha = c (t+1)^q)
  token.alpha_params        [c, q] for power
  token.start_node          initial token holder
  ci.a, ci.b                step-size scales of the consensus+innovations baseline
  ci.tau1, ci.tau2          step-size exponents, 0 < tau2 < tau1 <= 1
  ci.gain_mode              identity | scaled_fisher_inverse | constant
  ci.gains                  per-agent LxL gains (constant)
  ci.grid                   {a:[...], b:[...], tau1:[...], tau2:[...]} grid search
  ci.grid_trials            trials per grid point (20)
  run.horizon               last tick T (ticks 0..T)
  run.trials                Monte Carlo trials
  run.seed                  master seed
  run.algorithms            subset of [token, ci, central]
  run.sample_times          record only these ticks (default: every tick)
  run.output_dir            output directory
  verify.tail_trials        trajectories for the visit-tail check (10000)
  verify.tail_horizon       horizon of the visit-tail check (200)
  verify.identity_episodes  episodes under the state-identity oracle (100)
  verify.identity_horizon   horizon of those episodes (200)
  verify.cover_samples     sampled sequences per (n, b) case (10000)
  verify.cover_max_n       largest n in the sequence brute force (4)
  verify.cover_max_b       largest window in the sequence brute force (2)
  verify.rule_samples       adjacency draws for the rule check (1000)
)";
}

/// Parses JSON text; syntax errors name the line and column.
inline Json parse_config_text(const std::string& text, const std::string& origin = "config") {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t upto = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t k = 0; k < upto; ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string msg = e.what();
    if (auto p = msg.find("parse error"); p != std::string::npos) msg = msg.substr(p);
    throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + msg);
  }
}

inline Json load_config_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

/// Applies "section.key=value". The value is read as JSON when it parses,
/// otherwise as a string.
inline void apply_override(Json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(raw);
  } catch (const Json::parse_error&) {
    value = raw;
  }
  Json* node = &cfg;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (!node->is_object() && !node->is_null()) {
      throw ConfigError("override key '" + key + "' descends into a non-object");
    }
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

/// Rejects unknown sections and keys, naming the first offender.
inline void validate_keys(const Json& cfg) {
  if (!cfg.is_object()) throw ConfigError("config root must be a JSON object");
  const auto& schema = config_schema();
  for (const auto& [section, body] : cfg.items()) {
    const auto it = schema.find(section);
    if (it == schema.end()) throw ConfigError("unknown config section '" + section + "'");
    if (!body.is_object()) throw ConfigError("config section '" + section + "' must be an object");
    for (const auto& [key, _] : body.items()) {
      if (!it->second.count(key)) throw ConfigError("unknown config key '" + section + "." + key + "'");
    }
  }
}

namespace detail {

template <typename T>
T get_or(const Json& sec, const char* key, T fallback, const std::string& section) {
  if (!sec.contains(key)) return fallback;
  try {
    return sec.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError("config key '" + section + "." + key + "' has the wrong type");
  }
}

template <typename T>
T require(const Json& sec, const char* key, const std::string& section) {
  if (!sec.contains(key)) throw ConfigError("missing config key '" + section + "." + key + "'");
  return get_or<T>(sec, key, T{}, section);
}

inline Matrix to_matrix(const Json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ConfigError(what + " must be a nonempty list of rows");
  const std::size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty()) throw ConfigError(what + " rows must be nonempty lists");
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ConfigError(what + " rows differ in length");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw ConfigError(what + " entries must be numbers");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

inline Vector to_vector(const Json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ConfigError(what + " must be a nonempty list");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) throw ConfigError(what + " entries must be numbers");
    v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
  }
  return v;
}

inline Adjacency to_adjacency(const Json& j, const std::string& what) {
  try {
    return Adjacency::from_rows(j.get<std::vector<std::vector<int>>>());
  } catch (const Json::exception&) {
    throw ConfigError(what + " must be a square 0/1 matrix");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

inline std::vector<double> to_list(const Json& j, const std::string& what) {
  try {
    return j.get<std::vector<double>>();
  } catch (const Json::exception&) {
    throw ConfigError(what + " must be a list of numbers");
  }
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return std::filesystem::absolute(path).lexically_normal();
}

}  // namespace detail

struct VerifySettings {
  long tail_trials = 10000;
  long tail_horizon = 200;
  long identity_episodes = 100;
  long identity_horizon = 200;
  long cover_samples = 10000;
  std::size_t cover_max_n = 4;
  std::size_t cover_max_b = 2;
  long rule_samples = 1000;
};

/// Everything a subcommand needs, built from one validated JSON document.
struct RunSetup {
  ExperimentConfig experiment;
  VerifySettings verify;
  std::optional<std::size_t> window;  ///< graph.window, if given
  Json effective;                     ///< config echo (paths made absolute)
  bool seed_defaulted = false;
};

inline GlobalModel build_model(const Json& sec) {
  const std::string s = "model";
  const auto kind = detail::get_or<std::string>(sec, "kind", "explicit", s);
  const auto noise_name = detail::get_or<std::string>(sec, "noise", "gaussian", s);
  NoiseKind noise;
  if (noise_name == "gaussian") noise = NoiseKind::Gaussian;
  else if (noise_name == "uniform") noise = NoiseKind::Uniform;
  else if (noise_name == "none") noise = NoiseKind::None;
  else throw ConfigError("model.noise must be gaussian, uniform or none");
  const double floor = detail::get_or<double>(sec, "invertibility_floor", kInvertibilityFloor, s);

  if (kind == "explicit") {
    if (!sec.contains("agents") || !sec["agents"].is_array() || sec["agents"].empty()) {
      throw ConfigError("model.agents must be a nonempty list");
    }
    const Vector theta = detail::to_vector(sec.value("theta", Json()), "model.theta");
    if (sec.contains("L") && detail::get_or<long>(sec, "L", 0, s) != theta.size()) {
      throw ConfigError("model.L does not match the length of model.theta");
    }
    std::vector<AgentModel> agents;
    for (std::size_t i = 0; i < sec["agents"].size(); ++i) {
      const auto& a = sec["agents"][i];
      const std::string tag = "model.agents[" + std::to_string(i) + "]";
      if (!a.is_object()) throw ConfigError(tag + " must be an object with H and C");
      for (const auto& [k, _] : a.items())
        if (k != "H" && k != "C") throw ConfigError("unknown config key '" + tag + "." + k + "'");
      if (!a.contains("H") || !a.contains("C")) throw ConfigError(tag + " needs H and C");
      try {
        agents.emplace_back(i, detail::to_matrix(a["H"], tag + ".H"),
                            detail::to_matrix(a["C"], tag + ".C"));
      } catch (const InvalidModel& e) {
        throw ConfigError(tag + ": " + e.what());
      }
    }
    try {
      return GlobalModel(std::move(agents), theta, noise, floor);
    } catch (const InvalidModel& e) {
      throw ConfigError(std::string("model: ") + e.what());
    }
  }
  if (kind == "gaussian_rows") {
    const auto n = detail::require<long>(sec, "n", s);
    const auto dim = detail::require<long>(sec, "L", s);
    if (n < 1 || dim < 1) throw ConfigError("model.n and model.L must be >= 1");
    Vector theta;
    if (sec.contains("theta")) {
      theta = detail::to_vector(sec["theta"], "model.theta");
      if (theta.size() != dim) throw ConfigError("model.theta must have L entries");
    } else {
      theta = Vector::LinSpaced(dim, 1.0, static_cast<double>(dim));
    }
    const double var = detail::get_or<double>(sec, "noise_var", 1.0, s);
    if (!(var > 0.0)) throw ConfigError("model.noise_var must be positive");
    Rng rng(derive_seed(detail::get_or<std::uint64_t>(sec, "seed", 0, s), 0, Stream::Model));
    return make_gaussian_rows_model(static_cast<std::size_t>(n), theta, var, rng, noise);
  }
  throw ConfigError("model.kind must be explicit or gaussian_rows");
}

inline Adjacency build_backbone(const Json& sec, const std::filesystem::path& base, Json& echo) {
  const std::string s = "graph";
  const auto backbone = detail::get_or<std::string>(
      sec, "backbone", sec.contains("adjacency") || sec.contains("adjacency_file") ? "explicit" : "",
      s);
  if (backbone == "explicit") {
    if (sec.contains("adjacency")) return detail::to_adjacency(sec["adjacency"], "graph.adjacency");
    if (sec.contains("adjacency_file")) {
      const auto path = detail::resolve(base, detail::get_or<std::string>(sec, "adjacency_file", "", s));
      echo["graph"]["adjacency_file"] = path.string();
      const Json doc = load_config_file(path);
      if (!doc.contains("adjacency")) throw ConfigError(path.string() + ": no 'adjacency' key");
      return detail::to_adjacency(doc["adjacency"], path.string());
    }
    throw ConfigError("graph.backbone=explicit needs graph.adjacency or graph.adjacency_file");
  }
  const auto n = detail::require<long>(sec, "n", s);
  if (n < 1) throw ConfigError("graph.n must be >= 1");
  if (backbone == "complete") return Adjacency::complete(static_cast<std::size_t>(n));
  if (backbone == "geometric") {
    Rng rng(derive_seed(detail::get_or<std::uint64_t>(sec, "backbone_seed", 0, s), 0,
                        Stream::Backbone));
    const int retries = detail::get_or<int>(sec, "max_retries", kDefaultMaxRetries, s);
    try {
      if (sec.contains("relative_degree")) {
        return generate_geometric_backbone_for_degree(
                   static_cast<std::size_t>(n), detail::get_or<double>(sec, "relative_degree", 0.0, s),
                   rng, retries)
            .graph;
      }
      return generate_geometric_backbone(static_cast<std::size_t>(n),
                                         detail::require<double>(sec, "radius", s), rng, retries);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("graph: ") + e.what());
    }
  }
  throw ConfigError("graph.backbone must be explicit, complete or geometric");
}

inline GraphProcessSpec build_graph(const Json& sec, const std::filesystem::path& base, Json& echo) {
  const std::string s = "graph";
  const auto kind = detail::require<std::string>(sec, "kind", s);
  if (kind == "static") return GraphProcessSpec(StaticGraph{build_backbone(sec, base, echo)});
  if (kind == "iid_failure") {
    const double p = detail::get_or<double>(sec, "p_fail", 0.5, s);
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("graph.p_fail must lie in [0, 1]");
    return GraphProcessSpec(IidFailure{build_backbone(sec, base, echo), p});
  }
  if (kind == "deterministic") {
    std::vector<Adjacency> frames;
    if (sec.contains("frames")) {
      if (!sec["frames"].is_array() || sec["frames"].empty()) {
        throw ConfigError("graph.frames must be a nonempty list of matrices");
      }
      for (std::size_t k = 0; k < sec["frames"].size(); ++k)
        frames.push_back(
            detail::to_adjacency(sec["frames"][k], "graph.frames[" + std::to_string(k) + "]"));
    } else if (sec.contains("frames_file")) {
      const auto n = detail::require<long>(sec, "n", s);
      const auto path = detail::resolve(base, detail::get_or<std::string>(sec, "frames_file", "", s));
      echo["graph"]["frames_file"] = path.string();
      std::ifstream is(path);
      if (!is) throw ConfigError("cannot read frames file " + path.string());
      frames = read_edge_list_csv(is, static_cast<std::size_t>(n),
                                  detail::get_or<std::size_t>(sec, "frame_count", 0, s));
      if (frames.empty()) throw ConfigError(path.string() + ": no frames");
    } else {
      throw ConfigError("graph.kind=deterministic needs graph.frames or graph.frames_file");
    }
    try {
      return GraphProcessSpec(DeterministicSequence{std::move(frames),
                                                    detail::get_or<bool>(sec, "cycle", true, s)});
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("graph: ") + e.what());
    }
  }
  throw ConfigError("graph.kind must be static, iid_failure or deterministic");
}

inline TransitionRule build_rule(const Json& sec, std::size_t n) {
  const std::string s = "chain";
  const auto rule = detail::get_or<std::string>(sec, "rule", "out_degree_reciprocal", s);
  if (rule == "out_degree_reciprocal") return TransitionRule::out_degree_reciprocal();
  if (rule == "uniform_all") return TransitionRule::uniform_all();
  if (rule == "lazy") {
    const double d = detail::get_or<double>(sec, "delta_self", 1.0 / static_cast<double>(n), s);
    if (!(d > 0.0 && d < 1.0)) throw ConfigError("chain.delta_self must lie in (0, 1)");
    return TransitionRule::lazy(d);
  }
  throw ConfigError("chain.rule must be out_degree_reciprocal, lazy or uniform_all");
}

inline AlphaSchedule build_schedule(const Json& sec) {
  const std::string s = "token";
  const auto form = detail::get_or<std::string>(sec, "alpha_form", "linear", s);
  if (form == "linear") return AlphaSchedule::linear();
  if (form == "power") {
    const auto p = detail::to_list(sec.value("alpha_params", Json()), "token.alpha_params");
    if (p.size() != 2) throw ConfigError("token.alpha_params must be [c, q]");
    if (!(p[0] > 0.0 && p[1] > 0.0)) throw ConfigError("token.alpha_params need c > 0 and q > 0");
    return AlphaSchedule::power(p[0], p[1]);
  }
  throw ConfigError("token.alpha_form must be linear or power");
}

inline GainMode parse_gains(const Json& sec, const GlobalModel& model, std::vector<Matrix>& gains) {
  const auto mode = detail::get_or<std::string>(sec, "gain_mode", "identity", "ci");
  if (mode == "identity") return GainMode::Identity;
  if (mode == "scaled_fisher_inverse") {
    gains = scaled_fisher_inverse_gains(model);
    return GainMode::Constant;
  }
  if (mode == "constant") {
    if (!sec.contains("gains") || !sec["gains"].is_array()) {
      throw ConfigError("ci.gain_mode=constant needs ci.gains (one matrix per agent)");
    }
    for (std::size_t i = 0; i < sec["gains"].size(); ++i)
      gains.push_back(detail::to_matrix(sec["gains"][i], "ci.gains[" + std::to_string(i) + "]"));
    return GainMode::Constant;
  }
  throw ConfigError("ci.gain_mode must be identity, scaled_fisher_inverse or constant");
}

/// Builds the full run setup. `seed_override` wins over run.seed; when neither
/// is present the default seed is used and `seed_defaulted` is set so the CLI
/// can warn.
inline RunSetup build_run_setup(Json cfg, const std::filesystem::path& base_dir,
                                std::optional<std::uint64_t> seed_override = std::nullopt) {
  validate_keys(cfg);
  for (const char* section : {"model", "graph"})
    if (!cfg.contains(section)) throw ConfigError(std::string("missing config section '") + section + "'");
  for (const char* section : {"chain", "token", "ci", "run", "verify"})
    if (!cfg.contains(section)) cfg[section] = Json::object();

  RunSetup setup{.experiment = ExperimentConfig(build_model(cfg["model"]),
                                                 GraphProcessSpec(StaticGraph{Adjacency(1)})),
                 .verify = {},
                 .window = std::nullopt,
                 .effective = cfg,
                 .seed_defaulted = false};
  auto& ex = setup.experiment;
  try {
    ex.graph = build_graph(cfg["graph"], base_dir, setup.effective);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("graph: ") + e.what());
  }
  if (cfg["graph"].contains("n") && cfg["graph"]["n"].get<long>() != static_cast<long>(ex.graph.n())) {
    throw ConfigError("graph.n does not match the adjacency size");
  }
  if (ex.graph.n() != ex.model.n()) {
    throw ConfigError("graph has " + std::to_string(ex.graph.n()) + " nodes but model has " +
                      std::to_string(ex.model.n()) + " agents");
  }
  if (cfg["graph"].contains("window")) {
    const auto b = detail::get_or<long>(cfg["graph"], "window", 1, "graph");
    if (b < 1) throw ConfigError("graph.window must be >= 1");
    setup.window = static_cast<std::size_t>(b);
  }
  ex.rule = build_rule(cfg["chain"], ex.graph.n());
  ex.schedule = build_schedule(cfg["token"]);
  const auto start = detail::get_or<long>(cfg["token"], "start_node", 0, "token");
  if (start < 0 || static_cast<std::size_t>(start) >= ex.model.n()) {
    throw ConfigError("token.start_node out of range");
  }
  ex.start_node = static_cast<std::size_t>(start);

  const auto& ci = cfg["ci"];
  ex.ci.a = detail::get_or<double>(ci, "a", ex.ci.a, "ci");
  ex.ci.b = detail::get_or<double>(ci, "b", ex.ci.b, "ci");
  ex.ci.tau1 = detail::get_or<double>(ci, "tau1", ex.ci.tau1, "ci");
  ex.ci.tau2 = detail::get_or<double>(ci, "tau2", ex.ci.tau2, "ci");
  ex.ci.gain_mode = parse_gains(ci, ex.model, ex.ci.gains);
  try {
    ex.ci.validate(ex.model.n(), ex.model.dim());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("ci: ") + e.what());
  }
  if (ci.contains("grid")) {
    const auto& g = ci["grid"];
    if (!g.is_object()) throw ConfigError("ci.grid must be an object");
    CiGrid grid;
    for (const auto& [k, _] : g.items()) {
      if (k != "a" && k != "b" && k != "tau1" && k != "tau2") {
        throw ConfigError("unknown config key 'ci.grid." + k + "'");
      }
    }
    if (g.contains("a")) grid.a = detail::to_list(g["a"], "ci.grid.a");
    if (g.contains("b")) grid.b = detail::to_list(g["b"], "ci.grid.b");
    if (g.contains("tau1")) grid.tau1 = detail::to_list(g["tau1"], "ci.grid.tau1");
    if (g.contains("tau2")) grid.tau2 = detail::to_list(g["tau2"], "ci.grid.tau2");
    grid.gain_mode = ex.ci.gain_mode;
    grid.gains = ex.ci.gains;
    if (grid.points().empty()) throw ConfigError("ci.grid has no admissible point");
    ex.ci_grid = grid;
  }
  ex.grid_trials = detail::get_or<long>(ci, "grid_trials", ex.grid_trials, "ci");
  if (ex.grid_trials < 1) throw ConfigError("ci.grid_trials must be >= 1");

  const auto& run = cfg["run"];
  ex.horizon = detail::get_or<long>(run, "horizon", ex.horizon, "run");
  ex.trials = detail::get_or<long>(run, "trials", ex.trials, "run");
  if (ex.horizon < 1) throw ConfigError("run.horizon must be >= 1");
  if (ex.trials < 1) throw ConfigError("run.trials must be >= 1");
  if (seed_override) {
    ex.seed = *seed_override;
  } else if (run.contains("seed")) {
    ex.seed = detail::get_or<std::uint64_t>(run, "seed", kDefaultSeed, "run");
  } else {
    ex.seed = kDefaultSeed;
    setup.seed_defaulted = true;
  }
  setup.effective["run"]["seed"] = ex.seed;
  if (run.contains("algorithms")) {
    std::vector<std::string> names;
    try {
      names = run["algorithms"].get<std::vector<std::string>>();
    } catch (const Json::exception&) {
      throw ConfigError("run.algorithms must be a list of names");
    }
    ex.algorithms.clear();
    for (const auto& a : names) {
      if (a == "token") ex.algorithms.insert(Algorithm::Token);
      else if (a == "ci") ex.algorithms.insert(Algorithm::Ci);
      else if (a == "central") ex.algorithms.insert(Algorithm::Central);
      else throw ConfigError("run.algorithms: unknown algorithm '" + a + "'");
    }
  }
  if (run.contains("sample_times")) {
    try {
      ex.sample_times = run["sample_times"].get<std::vector<long>>();
    } catch (const Json::exception&) {
      throw ConfigError("run.sample_times must be a list of integers");
    }
  }
  if (run.contains("output_dir")) {
    ex.output_dir = detail::get_or<std::string>(run, "output_dir", "", "run");
  }

  const auto& v = cfg["verify"];
  auto& vs = setup.verify;
  vs.tail_trials = detail::get_or<long>(v, "tail_trials", vs.tail_trials, "verify");
  vs.tail_horizon = detail::get_or<long>(v, "tail_horizon", vs.tail_horizon, "verify");
  vs.identity_episodes = detail::get_or<long>(v, "identity_episodes", vs.identity_episodes, "verify");
  vs.identity_horizon = detail::get_or<long>(v, "identity_horizon", vs.identity_horizon, "verify");
  vs.cover_samples = detail::get_or<long>(v, "cover_samples", vs.cover_samples, "verify");
  vs.cover_max_n = detail::get_or<std::size_t>(v, "cover_max_n", vs.cover_max_n, "verify");
  vs.cover_max_b = detail::get_or<std::size_t>(v, "cover_max_b", vs.cover_max_b, "verify");
  vs.rule_samples = detail::get_or<long>(v, "rule_samples", vs.rule_samples, "verify");
  if (vs.tail_trials < 1 || vs.tail_horizon < 0 || vs.identity_episodes < 0 ||
      vs.identity_horizon < 0 || vs.cover_samples < 1 || vs.rule_samples < 0) {
    throw ConfigError("verify settings must be nonnegative (trials and samples >= 1)");
  }

  ex.config_echo = setup.effective;
  return setup;
}

}  // namespace roamtok

#endif  // ROAMTOK_CONFIG_HPP
