#pragma once

// Command implementations behind the pgglmc CLI. Each returns a process exit code:
// 0 ok, 2 configuration or I/O error, 3 chain divergence, 4 step-size cap or failed bound check.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "pgglmc/config.hpp"
#include "pgglmc/corpus.hpp"
#include "pgglmc/lmc.hpp"
#include "pgglmc/target.hpp"
#include "pgglmc/transport.hpp"
#include "pgglmc/verify.hpp"

namespace pgglmc {

inline constexpr const char* kSoftwareName = "pgglmc";
inline constexpr const char* kSoftwareVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitDivergence = 3, kExitTheoryGate = 4 };

struct CommandOptions {
  std::string config_path;
  std::string out_dir;  // empty: current directory (bounds writes no file)
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  bool quiet = false;
};

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot read config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

namespace detail {

inline std::filesystem::path output_path(const std::string& dir, const std::string& file) {
  const std::filesystem::path p(file);
  return p.is_absolute() ? p : std::filesystem::path(dir) / p;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("", "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw ConfigError("", "failed writing '" + path.string() + "'");
}

inline void append_g17(std::string& s, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  s += buf;
}

inline Json software_json() { return {{"name", kSoftwareName}, {"version", kSoftwareVersion}}; }

}  // namespace detail

/// Final states as CSV: header `chain,coordinate_0,...,coordinate_{d-1}`, %.17g values, LF line ends.
inline std::string states_csv(const Matrix& states) {
  std::string s = "chain";
  for (std::size_t j = 0; j < states.cols; ++j) s += ",coordinate_" + std::to_string(j);
  s += '\n';
  for (std::size_t i = 0; i < states.rows; ++i) {
    s += std::to_string(i);
    for (std::size_t j = 0; j < states.cols; ++j) {
      s += ',';
      detail::append_g17(s, states(i, j));
    }
    s += '\n';
  }
  return s;
}

/// Thinned trajectories as CSV: header `chain,step,coordinate_0,...`.
inline std::string trajectory_csv(const ChainResult& res) {
  const std::size_t d = res.final_states.cols;
  std::string s = "chain,step";
  for (std::size_t j = 0; j < d; ++j) s += ",coordinate_" + std::to_string(j);
  s += '\n';
  for (std::size_t c = 0; c < res.trajectories.size(); ++c) {
    const Matrix& m = res.trajectories[c];
    for (std::size_t i = 0; i < m.rows; ++i) {
      s += std::to_string(c) + ',' + std::to_string(res.trajectory_steps[i]);
      for (std::size_t j = 0; j < d; ++j) {
        s += ',';
        detail::append_g17(s, m(i, j));
      }
      s += '\n';
    }
  }
  return s;
}

struct BoundsReport {
  Json json;
  TheoryBound theorem;
  double eta = 0.0;
  double cap = 0.0;
};

/// Every bound quantity for a configuration, without running any chain.
/// Throws StepSizeError when eta is at or above the cap.
inline BoundsReport compute_bounds(const ExperimentConfig& cfg) {
  const Potential base = cfg.base_potential();
  const RegularizedPotential pot = regularize(base, cfg.potential.lambda);
  const SmoothingConfig scfg = cfg.smoothing_config();
  const double mu = scfg.mu, p = scfg.pgg.p, lambda = pot.lambda();
  const std::size_t d = pot.dim();

  BoundsReport out;
  out.cap = max_step_size(pot, mu, p);
  out.eta = cfg.resolve_eta(pot);

  const Lemma3Bound l3 = lemma3_w2_bound(pot, mu, p, cfg.report.xstar_norm_sq);
  double w2_init = 0.0;
  std::string w2_init_source = "config";
  if (cfg.report.w2_init) {
    w2_init = *cfg.report.w2_init;
  } else if (const auto law = make_target_law(cfg.potential_spec(), lambda)) {
    const InitLaw init{cfg.lmc.init_kind, cfg.lmc.init_mean, cfg.lmc.init_scale};
    w2_init = detail::initial_w2_bound(init, d, law->second_moment(), l3);
    w2_init_source = "coupling bound: sqrt(m2(target) + |m0|^2 + d s0^2) + smoothing distance";
  } else {
    w2_init_source = "unknown: initial term evaluated with W2(init) = 0";
  }
  out.theorem = theorem1_bound(pot, scfg, out.eta, cfg.lmc.steps, w2_init, cfg.report.xstar_norm_sq, cfg.report.C);
  const TheoryBound& tb = out.theorem;

  Json terms = Json::array();
  for (const auto& t : tb.terms) terms.push_back({{"name", t.name}, {"formula", t.formula}, {"value", t.value}});
  const double ML = tb.M + lambda;
  out.json = {
      {"parameters",
       {{"potential", base.name},
        {"d", d},
        {"L", base.L},
        {"alpha", base.alpha},
        {"lambda", lambda},
        {"mu", mu},
        {"n", scfg.n},
        {"p", p},
        {"eta", out.eta},
        {"eta_auto", !cfg.lmc.eta.has_value()},
        {"steps", cfg.lmc.steps},
        {"w2_init", w2_init},
        {"w2_init_source", w2_init_source},
        {"xstar_norm_sq", cfg.report.xstar_norm_sq},
        {"C", cfg.report.C}}},
      {"eta_cap", {{"formula", "2 / (M + 2 lambda)"}, {"value", out.cap}}},
      {"M",
       {{"formula", "L d^((1-alpha)/p) / (mu^(1-alpha) (1+alpha)^(1-alpha))"}, {"value", tb.M}}},
      {"a",
       {{"formula", "L mu^(1+alpha) d^((1+alpha)/p) / (1+alpha) + 0.5 lambda mu^2 (d+1)^(2/p)"}, {"value", tb.a}}},
      {"lemma1",
       {{"gap_bound", {{"formula", "L mu^(1+alpha) d^((1+alpha)/p) / (1+alpha)"},
                       {"value", lemma1_gap_bound(base, mu, p)}}},
        {"gap_envelope", {{"formula", "L mu^(1+alpha) (2d(d+p)/p)^((1+alpha)/(2p)) / (1+alpha)"},
                          {"value", lemma1_gap_envelope(base, mu, p)}}},
        {"lambda_correction", {{"formula", "0.5 lambda mu^2 (d+1)^(2/p)"},
                               {"value", lemma1_lambda_correction(lambda, mu, p, d)}}}}},
      {"lemma2",
       {{"bias_bound", {{"formula", "(M + lambda)^2 mu^2 d^(2/p)"},
                        {"value", lemma2_bias_bound(tb.M, lambda, mu, p, d)}}},
        {"variance_bound",
         {{"formula", "(1/n) (c0 + c1 ||grad U_mu(x)||)^2"},
          {"c0", 0.5 * ML * mu * std::pow(static_cast<double>(d) + 3.0, 3.0 / p)},
          {"c1", std::sqrt(2.0) * std::pow(static_cast<double>(d) + 2.0, 2.0 / p)}}}}},
      {"lemma3",
       {{"a", l3.a},
        {"w2_sq_general", l3.w2_sq_general},
        {"w2_general", l3.w2_general},
        {"w2_simplified", l3.w2_simplified},
        {"simplified_applicable", l3.simplified_applicable},
        {"reported", l3.w2()},
        {"formula_general", "4 (d + lambda |x*|^2) / lambda (a + e^a - 1)"},
        {"formula_simplified", "3 sqrt(d a / lambda), when a <= 0.1"}}},
      {"theorem1",
       {{"w2_mixing", tb.w2_mixing},
        {"w2_mixing_proof_form", tb.w2_mixing_proof_form},
        {"geometric_theorem", tb.geometric_theorem},
        {"geometric_proof", tb.geometric_proof},
        {"terms", terms},
        {"notes", tb.notes}}}};
  return out;
}

inline void print_bounds(std::ostream& os, const BoundsReport& b) {
  const auto& t = b.theorem;
  const auto& prm = b.json.at("parameters");
  auto g9 = [](double v) { return detail::fmt9(v); };
  os << "potential " << prm.at("potential").get<std::string>() << "  d=" << prm.at("d").get<std::size_t>()
     << "  lambda=" << g9(prm.at("lambda").get<double>()) << "  mu=" << g9(prm.at("mu").get<double>())
     << "  n=" << prm.at("n").get<std::size_t>() << "  p=" << g9(prm.at("p").get<double>()) << "\n";
  os << "eta = " << g9(b.eta) << "  (cap 2/(M + 2 lambda) = " << g9(b.cap) << ")  K = "
     << prm.at("steps").get<std::size_t>() << "\n";
  os << "M = " << g9(t.M) << "  a = " << g9(t.a) << "\n\n";
  os << "W2 bound after K steps:\n";
  for (const auto& term : t.terms)
    os << "  " << std::left << std::setw(20) << term.name << std::right << std::setw(17) << g9(term.value) << "   "
       << term.formula << "\n";
  os << "  " << std::left << std::setw(20) << "total" << std::right << std::setw(17) << g9(t.w2_mixing) << "\n";
  os << "  " << std::left << std::setw(20) << "total (exponent K)" << std::right << std::setw(17)
     << g9(t.w2_mixing_proof_form) << "\n\n";
  os << "W2 between target and smoothed target:\n";
  os << "  general     " << g9(t.lemma3.w2_general) << "\n";
  os << "  simplified  " << g9(t.lemma3.w2_simplified)
     << (t.lemma3.simplified_applicable ? "  (applicable)" : "  (not applicable)") << "\n";
  for (const auto& note : t.notes) os << "note: " << note << "\n";
}

inline int cmd_bounds(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    ExperimentConfig cfg = load_config(opt.config_path);
    if (opt.seed) cfg.lmc.seed = *opt.seed;
    const BoundsReport b = compute_bounds(cfg);
    if (!opt.quiet) print_bounds(out, b);
    if (!opt.out_dir.empty()) {
      Json doc{{"software", detail::software_json()}, {"config", to_json(cfg)}, {"bounds", b.json}};
      detail::write_text(detail::output_path(opt.out_dir, "bounds.json"), doc.dump(2) + "\n");
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const StepSizeError& e) {
    err << "step-size gate: " << e.what() << "\n";
    return kExitTheoryGate;
  } catch (const ParameterError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
}

inline int cmd_sample(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(opt.config_path);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  if (opt.seed) cfg.lmc.seed = *opt.seed;

  try {
    const Potential base = cfg.base_potential();
    const RegularizedPotential pot = regularize(base, cfg.potential.lambda);
    const SmoothingConfig scfg = cfg.smoothing_config();
    const LmcConfig lcfg = cfg.lmc_config(pot, opt.threads);
    const BoundsReport bounds = compute_bounds(cfg);

    Json warnings = Json::array();
    Rng cert_rng = make_stream(cfg.lmc.seed, 0xCE27);
    const CertificationReport cert = certify(base, cert_rng);
    if (!cert.passed()) {
      const std::string w = "declared (L, alpha) = (" + detail::fmt9(base.L) + ", " + detail::fmt9(base.alpha) +
                            ") failed spot certification: " + std::to_string(cert.holder_violations) +
                            " Holder and " + std::to_string(cert.descent_violations) + " descent violations";
      warnings.push_back(w);
      if (!opt.quiet) err << "warning: " << w << "\n";
    }

    const auto start = std::chrono::steady_clock::now();
    const ChainResult res = run_chain(pot, scfg, lcfg);
    const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    detail::write_text(detail::output_path(opt.out_dir, cfg.report.csv), states_csv(res.final_states));
    if (cfg.report.trajectory) {
      std::filesystem::path tp = detail::output_path(opt.out_dir, cfg.report.csv);
      tp.replace_filename(tp.stem().string() + "_trajectory" + tp.extension().string());
      detail::write_text(tp, trajectory_csv(res));
    }

    const std::size_t d = pot.dim();
    Json failures = Json::array();
    for (const auto& f : res.failures)
      failures.push_back({{"chain", f.chain}, {"step", f.step}, {"state_norm", f.state_norm}, {"message", f.message}});

    Vector mean(d, 0.0), var(d, 0.0), tmean(d, 0.0), tm2(d, 0.0);
    std::size_t alive = 0;
    std::vector<RunningStats> coord(d);
    for (std::size_t c = 0; c < res.final_states.rows; ++c) {
      const auto row = res.final_states.row(c);
      if (!all_finite(row)) continue;
      ++alive;
      for (std::size_t j = 0; j < d; ++j) {
        coord[j].add(row[j]);
        tmean[j] += res.moments[c].mean[j];
        tm2[j] += res.moments[c].second_moment[j];
      }
    }
    for (std::size_t j = 0; j < d; ++j) {
      mean[j] = coord[j].mean();
      var[j] = coord[j].variance();
      if (alive) {
        tmean[j] /= static_cast<double>(alive);
        tm2[j] /= static_cast<double>(alive);
      }
    }

    Json w2 = {{"available", false}};
    const auto law = make_target_law(cfg.potential_spec(), cfg.potential.lambda);
    if (res.ok() && law && lcfg.chains >= 2) {
      SampleSet states(res.final_states);
      const std::size_t N = std::min(states.size(), kMaxAssignmentSize);
      Rng pick = make_stream(cfg.lmc.seed, 0xD0D0);
      if (states.size() > N) states = subsample(states, N, pick);
      Json values = Json::array();
      RunningStats stats;
      for (std::size_t k = 0; k < cfg.report.resamples; ++k) {
        Rng rng = make_stream(cfg.lmc.seed ^ 0x7A6E7, k);
        const double w = w2_exact_assignment(states, SampleSet(law->sample(N, rng)));
        values.push_back(w);
        stats.add(w);
      }
      w2 = {{"available", true},
            {"method", "exact assignment against fresh target samples"},
            {"target", "regularized potential"},
            {"sample_size", N},
            {"resamples", cfg.report.resamples},
            {"mean", stats.mean()},
            {"spread", std::sqrt(stats.variance())},
            {"values", values}};
    }

    Json report{
        {"software", detail::software_json()},
        {"config", to_json(cfg)},
        {"resolved",
         {{"eta", lcfg.eta},
          {"eta_cap", bounds.cap},
          {"eta_auto", !cfg.lmc.eta.has_value()},
          {"M", bounds.theorem.M},
          {"a", bounds.theorem.a},
          {"threads", opt.threads},
          {"thinning", lcfg.effective_thinning()}}},
        {"run",
         {{"chains", lcfg.chains},
          {"steps", lcfg.steps},
          {"evals_total", res.evals_total},
          {"gradient_evals", res.gradient_evals},
          {"runtime_seconds", runtime},
          {"diverged_chains", res.failures.size()}}},
        {"failures", failures},
        {"moments",
         {{"final_mean", mean},
          {"final_variance", var},
          {"time_average_mean", tmean},
          {"time_average_second_moment", tm2},
          {"burn_in", lcfg.burn_in}}},
        {"w2_to_target", w2},
        {"bounds", bounds.json},
        {"certification",
         {{"checked", cert.checked},
          {"pairs", cert.pairs},
          {"holder_violations", cert.holder_violations},
          {"convexity_violations", cert.convexity_violations},
          {"descent_violations", cert.descent_violations},
          {"worst_holder_ratio", cert.worst_holder_ratio}}},
        {"warnings", warnings}};
    detail::write_text(detail::output_path(opt.out_dir, cfg.report.json), report.dump(2) + "\n");

    if (!res.ok()) {
      for (const auto& f : res.failures)
        err << "chain " << f.chain << " diverged at step " << f.step << " (|x| = " << detail::fmt9(f.state_norm)
            << "): " << f.message << "\n";
      return kExitDivergence;
    }
    if (!opt.quiet) {
      out << "wrote " << lcfg.chains << " chains x " << d << " coordinates to "
          << detail::output_path(opt.out_dir, cfg.report.csv).string() << "\n";
      out << "eta = " << detail::fmt9(lcfg.eta) << " (cap " << detail::fmt9(bounds.cap) << "), "
          << res.evals_total << " potential evaluations, " << detail::fmt9(runtime) << " s\n";
      if (w2.at("available").get<bool>())
        out << "W2 to target = " << detail::fmt9(w2.at("mean").get<double>()) << ", bound = "
            << detail::fmt9(bounds.theorem.w2_mixing) << "\n";
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const StepSizeError& e) {
    err << "step-size gate: " << e.what() << "\n";
    return kExitTheoryGate;
  } catch (const ParameterError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "output error: " << e.what() << "\n";
    return kExitConfig;
  }
}

inline void print_suite_table(std::ostream& os, const std::vector<SuiteResult>& results) {
  for (const auto& r : results) {
    os << "== " << r.suite << " (" << detail::fmt9(r.runtime_seconds) << " s)\n";
    for (const auto& c : r.checks)
      os << (c.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(60) << c.name << std::right
         << std::setw(17) << detail::fmt9(c.observed) << "  vs " << std::setw(17) << detail::fmt9(c.threshold)
         << "\n";
  }
}

inline int cmd_verify(const std::string& suite, const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  SuiteContext ctx;
  ctx.threads = opt.threads;
  try {
    if (!opt.config_path.empty()) {
      ctx.config = load_config(opt.config_path);
      ctx.seed = ctx.config->lmc.seed;
    }
    if (opt.seed) {
      ctx.seed = *opt.seed;
      if (ctx.config) ctx.config->lmc.seed = *opt.seed;
    }
    if (suite != "all" && std::find(suite_names().begin(), suite_names().end(), suite) == suite_names().end())
      throw UnknownSuite("unknown suite '" + suite + "' (expected moments, lemma1, lemma2, mixing, transport or all)");
    const std::vector<SuiteResult> results = run_suites(suite, ctx);
    if (!opt.quiet) print_suite_table(out, results);
    Json suites = Json::array();
    bool all = true;
    for (const auto& r : results) {
      suites.push_back(to_json(r));
      all = all && r.passed();
    }
    Json doc{{"software", detail::software_json()}, {"suite", suite}, {"seed", ctx.seed}, {"passed", all},
             {"suites", suites}};
    if (ctx.config) doc["config"] = to_json(*ctx.config);
    detail::write_text(detail::output_path(opt.out_dir, "verify_" + suite + ".json"), doc.dump(2) + "\n");
    return all ? kExitOk : kExitTheoryGate;
  } catch (const UnknownSuite& e) {
    err << e.what() << "\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const StepSizeError& e) {
    err << "step-size gate: " << e.what() << "\n";
    return kExitTheoryGate;
  } catch (const ParameterError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace pgglmc
