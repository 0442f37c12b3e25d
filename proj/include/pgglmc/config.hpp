#pragma once

// Experiment configuration: a single JSON document, strictly validated.
//
// {
//   "potential": {"name": "quadratic", "dim": 2, "lambda": 1.0,
//                 "params": {"curvature": 1.0}, "L": <opt>, "alpha": <opt>},
//   "smoothing": {"mu": 0.1, "n": 10, "p": 2.0},
//   "lmc": {"eta": "auto" | 0.05, "steps": 1000, "chains": 100, "seed": 42,
//           "init": {"type": "point" | "gaussian", "mean": [..], "scale": 1.0},
//           "gradient": "black_box" | "exact", "burn_in": 0},
//   "report": {"thinning": 0, "trajectory": false, "csv": "states.csv", "json": "report.json",
//              "resamples": 5, "xstar_norm_sq": 0.0, "C": 0.0, "w2_init": <opt>}
// }
//
// Unknown keys are errors. "eta": "auto" resolves to 0.9 times the step-size cap.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pgglmc/common.hpp"
#include "pgglmc/corpus.hpp"
#include "pgglmc/lmc.hpp"
#include "pgglmc/smoothing.hpp"

namespace pgglmc {

using Json = nlohmann::json;

/// Malformed or out-of-range configuration; `field` is the dotted path when known.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : std::runtime_error(field.empty() ? message : "field '" + field + "': " + message), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

inline constexpr double kAutoEtaFraction = 0.9;

struct PotentialConfig {
  std::string name;
  std::size_t dim = 1;
  double lambda = 1.0;
  std::map<std::string, double> params;
  std::optional<double> L;
  std::optional<double> alpha;
  bool operator==(const PotentialConfig&) const = default;
};

struct SmoothingSection {
  double mu = 0.1;
  std::size_t n = 1;
  double p = 2.0;
  bool operator==(const SmoothingSection&) const = default;
};

struct LmcSection {
  std::optional<double> eta;  // nullopt means "auto"
  std::size_t steps = 1000;
  std::size_t chains = 1;
  std::uint64_t seed = 0;
  InitKind init_kind = InitKind::point;
  Vector init_mean;
  double init_scale = 1.0;
  GradientMode gradient = GradientMode::black_box;
  std::size_t burn_in = 0;
  bool operator==(const LmcSection&) const = default;
};

struct ReportSection {
  std::size_t thinning = 0;
  bool trajectory = false;
  std::string csv = "states.csv";
  std::string json = "report.json";
  std::size_t resamples = 5;
  double xstar_norm_sq = 0.0;
  double C = 0.0;
  std::optional<double> w2_init;
  bool operator==(const ReportSection&) const = default;
};

struct ExperimentConfig {
  PotentialConfig potential;
  SmoothingSection smoothing;
  LmcSection lmc;
  ReportSection report;
  bool operator==(const ExperimentConfig&) const = default;

  PotentialSpec potential_spec() const { return {potential.name, potential.dim, potential.params}; }

  /// Built-in potential with any user-declared (L, alpha) applied.
  Potential base_potential() const {
    Potential pot = make_builtin_potential(potential_spec());
    if (potential.L) pot.L = *potential.L;
    if (potential.alpha) pot.alpha = *potential.alpha;
    return pot;
  }

  RegularizedPotential regularized() const { return regularize(base_potential(), potential.lambda); }

  SmoothingConfig smoothing_config() const { return {smoothing.mu, smoothing.n, PggSpec{smoothing.p, potential.dim}}; }

  double resolve_eta(const RegularizedPotential& pot) const {
    if (lmc.eta) return *lmc.eta;
    return kAutoEtaFraction * max_step_size(pot, smoothing.mu, smoothing.p);
  }

  LmcConfig lmc_config(const RegularizedPotential& pot, unsigned threads) const {
    LmcConfig c;
    c.eta = resolve_eta(pot);
    c.steps = lmc.steps;
    c.chains = lmc.chains;
    c.seed = lmc.seed;
    c.init = InitLaw{lmc.init_kind, lmc.init_mean, lmc.init_scale};
    c.gradient = lmc.gradient;
    c.thinning = report.thinning;
    c.keep_trajectory = report.trajectory;
    c.burn_in = lmc.burn_in;
    c.threads = threads;
    return c;
  }
};

namespace detail {

class Reader {
 public:
  Reader(const Json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_, "expected an object");
  }

  ~Reader() = default;

  /// Reject keys that were never read.
  void finish() const {
    for (const auto& [key, value] : node_.items())
      if (!seen_.contains(key)) throw ConfigError(join(key), "unknown key");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_.contains(key);
  }

  const Json& at(const std::string& key) {
    if (!has(key)) throw ConfigError(join(key), "missing required field");
    return node_.at(key);
  }

  double number(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_number()) throw ConfigError(join(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(join(key), "must be finite");
    return x;
  }

  double number_or(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

  std::optional<double> optional_number(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return number(key);
  }

  std::uint64_t unsigned_integer(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      throw ConfigError(join(key), "expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }

  std::uint64_t unsigned_or(const std::string& key, std::uint64_t fallback) {
    return has(key) ? unsigned_integer(key) : fallback;
  }

  std::string string(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_string()) throw ConfigError(join(key), "expected a string");
    return v.get<std::string>();
  }

  std::string string_or(const std::string& key, const std::string& fallback) {
    return has(key) ? string(key) : fallback;
  }

  bool boolean_or(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const Json& v = node_.at(key);
    if (!v.is_boolean()) throw ConfigError(join(key), "expected true or false");
    return v.get<bool>();
  }

  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const Json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void check(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

}  // namespace detail

/// Parse and range-check a configuration document. Throws ConfigError.
inline ExperimentConfig parse_config(const Json& doc) {
  using detail::check;
  ExperimentConfig cfg;
  detail::Reader root(doc, "");

  {
    detail::Reader r(root.at("potential"), "potential");
    cfg.potential.name = r.string("name");
    const auto& table = builtin_potential_params();
    const auto entry = table.find(cfg.potential.name);
    if (entry == table.end()) {
      std::string names;
      for (const auto& n : builtin_potential_names()) names += (names.empty() ? "" : ", ") + n;
      throw ConfigError("potential.name", "unknown potential '" + cfg.potential.name + "' (known: " + names + ")");
    }
    cfg.potential.dim = r.unsigned_integer("dim");
    check(cfg.potential.dim >= 1, "potential.dim", "must be at least 1");
    cfg.potential.lambda = r.number("lambda");
    check(cfg.potential.lambda > 0.0, "potential.lambda", "must be positive");
    if (r.has("params")) {
      detail::Reader pr(r.at("params"), "potential.params");
      for (const auto& [key, def] : entry->second)
        if (pr.has(key)) cfg.potential.params[key] = pr.number(key);
      pr.finish();
    }
    cfg.potential.L = r.optional_number("L");
    if (cfg.potential.L) check(*cfg.potential.L >= 0.0, "potential.L", "must be nonnegative");
    cfg.potential.alpha = r.optional_number("alpha");
    if (cfg.potential.alpha)
      check(*cfg.potential.alpha >= 0.0 && *cfg.potential.alpha <= 1.0, "potential.alpha", "must lie in [0, 1]");
    r.finish();
    try {
      (void)cfg.base_potential();
    } catch (const ParameterError& e) {
      throw ConfigError("potential.params", e.what());
    }
  }
  {
    detail::Reader r(root.at("smoothing"), "smoothing");
    cfg.smoothing.mu = r.number("mu");
    check(cfg.smoothing.mu > 0.0, "smoothing.mu", "must be positive");
    cfg.smoothing.n = r.unsigned_integer("n");
    check(cfg.smoothing.n >= 1, "smoothing.n", "must be at least 1");
    cfg.smoothing.p = r.number("p");
    check(cfg.smoothing.p >= 1.0 && cfg.smoothing.p <= 2.0, "smoothing.p", "must lie in [1, 2]");
    r.finish();
  }
  {
    detail::Reader r(root.at("lmc"), "lmc");
    const Json& eta = r.at("eta");
    if (eta.is_string()) {
      check(eta.get<std::string>() == "auto", "lmc.eta", "expected a number or \"auto\"");
    } else {
      cfg.lmc.eta = r.number("eta");
      check(*cfg.lmc.eta > 0.0, "lmc.eta", "must be positive");
    }
    cfg.lmc.steps = r.unsigned_integer("steps");
    cfg.lmc.chains = r.unsigned_or("chains", 1);
    check(cfg.lmc.chains >= 1, "lmc.chains", "must be at least 1");
    cfg.lmc.seed = r.unsigned_integer("seed");
    cfg.lmc.burn_in = r.unsigned_or("burn_in", 0);
    const std::string gradient = r.string_or("gradient", "black_box");
    check(gradient == "black_box" || gradient == "exact", "lmc.gradient", "expected \"black_box\" or \"exact\"");
    cfg.lmc.gradient = gradient == "exact" ? GradientMode::exact : GradientMode::black_box;
    if (r.has("init")) {
      detail::Reader ir(r.at("init"), "lmc.init");
      const std::string type = ir.string_or("type", "point");
      check(type == "point" || type == "gaussian", "lmc.init.type", "expected \"point\" or \"gaussian\"");
      cfg.lmc.init_kind = type == "point" ? InitKind::point : InitKind::gaussian;
      if (ir.has("mean")) {
        const Json& m = ir.at("mean");
        check(m.is_array() && m.size() == cfg.potential.dim, "lmc.init.mean",
              "expected an array of " + std::to_string(cfg.potential.dim) + " numbers");
        for (const auto& v : m) {
          check(v.is_number() && std::isfinite(v.get<double>()), "lmc.init.mean", "entries must be finite numbers");
          cfg.lmc.init_mean.push_back(v.get<double>());
        }
      }
      cfg.lmc.init_scale = ir.number_or("scale", 1.0);
      check(cfg.lmc.init_scale > 0.0, "lmc.init.scale", "must be positive");
      ir.finish();
    }
    r.finish();
  }
  if (root.has("report")) {
    detail::Reader r(root.at("report"), "report");
    cfg.report.thinning = r.unsigned_or("thinning", 0);
    cfg.report.trajectory = r.boolean_or("trajectory", false);
    cfg.report.csv = r.string_or("csv", cfg.report.csv);
    cfg.report.json = r.string_or("json", cfg.report.json);
    cfg.report.resamples = r.unsigned_or("resamples", 5);
    check(cfg.report.resamples >= 1, "report.resamples", "must be at least 1");
    cfg.report.xstar_norm_sq = r.number_or("xstar_norm_sq", 0.0);
    check(cfg.report.xstar_norm_sq >= 0.0, "report.xstar_norm_sq", "must be nonnegative");
    cfg.report.C = r.number_or("C", 0.0);
    check(cfg.report.C >= 0.0, "report.C", "must be nonnegative");
    cfg.report.w2_init = r.optional_number("w2_init");
    if (cfg.report.w2_init) check(*cfg.report.w2_init >= 0.0, "report.w2_init", "must be nonnegative");
    r.finish();
  }
  root.finish();
  return cfg;
}

/// Parse from text, mapping syntax errors to line/column diagnostics.
inline ExperimentConfig parse_config_text(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ConfigError("", "JSON syntax error at line " + std::to_string(line) + ", column " +
                              std::to_string(column) + ": " + e.what());
  }
  return parse_config(doc);
}

/// Lossless echo: parse_config(to_json(c)) == c.
inline Json to_json(const ExperimentConfig& c) {
  Json potential{{"name", c.potential.name}, {"dim", c.potential.dim}, {"lambda", c.potential.lambda}};
  Json params = Json::object();
  for (const auto& [k, v] : c.potential.params) params[k] = v;
  potential["params"] = params;
  if (c.potential.L) potential["L"] = *c.potential.L;
  if (c.potential.alpha) potential["alpha"] = *c.potential.alpha;

  Json init{{"type", to_string(c.lmc.init_kind)}, {"scale", c.lmc.init_scale}};
  if (!c.lmc.init_mean.empty()) init["mean"] = c.lmc.init_mean;
  Json lmc{{"steps", c.lmc.steps},       {"chains", c.lmc.chains}, {"seed", c.lmc.seed},
           {"burn_in", c.lmc.burn_in},   {"init", init},           {"gradient", to_string(c.lmc.gradient)}};
  if (c.lmc.eta)
    lmc["eta"] = *c.lmc.eta;
  else
    lmc["eta"] = "auto";

  Json report{{"thinning", c.report.thinning},   {"trajectory", c.report.trajectory},
              {"csv", c.report.csv},             {"json", c.report.json},
              {"resamples", c.report.resamples}, {"xstar_norm_sq", c.report.xstar_norm_sq},
              {"C", c.report.C}};
  if (c.report.w2_init) report["w2_init"] = *c.report.w2_init;

  return Json{{"potential", potential},
              {"smoothing", {{"mu", c.smoothing.mu}, {"n", c.smoothing.n}, {"p", c.smoothing.p}}},
              {"lmc", lmc},
              {"report", report}};
}

}  // namespace pgglmc
