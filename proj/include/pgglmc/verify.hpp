#pragma once

// Property suites that check every closed-form bound against Monte Carlo or exact oracles.
// Each suite returns one row per assertion with the observed value, the threshold it was
// compared against, and the SE-based tolerance where the comparison is stochastic.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "pgglmc/common.hpp"
#include "pgglmc/config.hpp"
#include "pgglmc/corpus.hpp"
#include "pgglmc/lmc.hpp"
#include "pgglmc/pgg.hpp"
#include "pgglmc/smoothing.hpp"
#include "pgglmc/target.hpp"
#include "pgglmc/transport.hpp"

namespace pgglmc {

inline constexpr double kSeTolerance = 4.0;

struct Check {
  std::string suite;
  std::string name;
  bool passed = false;
  double observed = 0.0;
  double threshold = 0.0;
  std::string note;
};

struct SuiteResult {
  std::string suite;
  std::vector<Check> checks;
  double runtime_seconds = 0.0;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }
};

/// Sample sizes for the suites. desk() runs in seconds; acceptance() is the full-size gate.
struct SuiteScale {
  std::size_t moment_draws = 100000;
  std::size_t lemma1_points = 5;
  std::size_t lemma1_gap_draws = 20000;
  std::size_t lipschitz_pairs = 200;
  std::size_t lipschitz_draws = 400;
  std::size_t lemma2_trials = 2000;
  std::size_t ou_chains = 200;
  std::size_t ou_steps = 6000;
  std::size_t ou_burn_in = 1000;
  std::size_t dominance_chains = 256;
  std::size_t dominance_resamples = 2;
  std::size_t transport_instances = 30;

  static SuiteScale desk() { return {}; }

  static SuiteScale acceptance() {
    SuiteScale s;
    s.moment_draws = 1000000;
    s.lemma1_points = 20;
    s.lemma1_gap_draws = 40000;
    s.lipschitz_pairs = 1000;
    s.lipschitz_draws = 2000;
    s.lemma2_trials = 10000;
    s.ou_chains = 1000;
    s.ou_steps = 10000;
    s.ou_burn_in = 2000;
    s.dominance_chains = 1024;
    s.dominance_resamples = 5;
    s.transport_instances = 100;
    return s;
  }
};

struct SuiteContext {
  SuiteScale scale = SuiteScale::desk();
  std::uint64_t seed = 20240611;
  unsigned threads = 1;
  std::optional<ExperimentConfig> config;  // restricts lemma1, lemma2 and mixing to one target
};

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"moments", "lemma1", "lemma2", "mixing", "transport"};
  return names;
}

namespace detail {

inline std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string describe(const PotentialSpec& spec) {
  std::string s = spec.name + " d=" + std::to_string(spec.dim);
  for (const auto& [k, v] : spec.params) s += " " + k + "=" + fmt9(v);
  return s;
}

inline void push(SuiteResult& r, std::string name, bool passed, double observed, double threshold,
                 std::string note = {}) {
  r.checks.push_back({r.suite, std::move(name), passed, observed, threshold, std::move(note)});
}

struct Target {
  PotentialSpec spec;
  double lambda = 1.0;
};

inline std::vector<Target> corpus_targets(std::size_t dim, double lambda) {
  return {{{"quadratic", dim, {{"curvature", 1.0}}}, lambda},
          {{"power", dim, {{"alpha", 0.5}}}, lambda},
          {{"l1", dim, {}}, lambda},
          {{"huber", dim, {{"delta", 1.0}}}, lambda}};
}

template <class Urbg>
Vector random_point(Urbg& rng, std::size_t d, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vector x(d);
  for (double& v : x) v = u(rng);
  return x;
}

/// grad U_mu-bar(y) - grad U_mu-bar(x): closed form when registered, otherwise a common-random-number
/// pathwise average over m draws. `se` receives per-coordinate standard errors.
template <class Urbg>
void smoothed_gradient_difference(const RegularizedPotential& pot, const SmoothingConfig& cfg,
                                  std::span<const double> x, std::span<const double> y, std::size_t m, Urbg& rng,
                                  Vector& diff, Vector& se) {
  const std::size_t d = x.size();
  diff.assign(d, 0.0);
  se.assign(d, 0.0);
  if (pot.has_smoothed_gradient()) {
    Vector gx(d), gy(d);
    pot.smoothed_gradient(x, cfg.mu, cfg.pgg.p, gx);
    pot.smoothed_gradient(y, cfg.mu, cfg.pgg.p, gy);
    for (std::size_t j = 0; j < d; ++j) diff[j] = gy[j] - gx[j];
    return;
  }
  PggSampler sampler(cfg.pgg);
  std::vector<RunningStats> stats(d);
  Vector xi(d), sx(d), sy(d), gx(d), gy(d);
  for (std::size_t i = 0; i < m; ++i) {
    sampler.draw(rng, xi);
    for (std::size_t j = 0; j < d; ++j) {
      sx[j] = x[j] + cfg.mu * xi[j];
      sy[j] = y[j] + cfg.mu * xi[j];
    }
    pot.subgradient(sx, gx);
    pot.subgradient(sy, gy);
    for (std::size_t j = 0; j < d; ++j) stats[j].add(gy[j] - gx[j]);
  }
  for (std::size_t j = 0; j < d; ++j) {
    diff[j] = stats[j].mean();
    se[j] = stats[j].std_error();
  }
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace detail

/// Moment and normalizer checks for N_p.
inline SuiteResult run_moments_suite(const SuiteContext& ctx) {
  detail::Stopwatch clock;
  SuiteResult r{"moments", {}, 0.0};
  const std::vector<double> ps{1.0, 1.5, 2.0};
  const std::vector<std::size_t> dims{1, 3, 5};
  const std::vector<double> orders{1.0, 2.0, 4.0};

  struct Group {
    double p;
    std::size_t d;
    std::vector<RunningStats> stats;
  };
  std::vector<Group> groups;
  for (double p : ps)
    for (std::size_t d : dims) groups.push_back({p, d, std::vector<RunningStats>(orders.size())});

  parallel_for(groups.size(), ctx.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t g = begin; g < end; ++g) {
      Group& grp = groups[g];
      Rng rng = make_stream(ctx.seed, g);
      PggSampler sampler({grp.p, grp.d});
      Vector xi(grp.d);
      for (std::size_t i = 0; i < ctx.scale.moment_draws; ++i) {
        sampler.draw(rng, xi);
        double s = 0.0;
        for (double v : xi) s += std::pow(std::abs(v), grp.p);
        const double norm = std::pow(s, 1.0 / grp.p);
        for (std::size_t k = 0; k < orders.size(); ++k) grp.stats[k].add(std::pow(norm, orders[k]));
      }
    }
  });

  for (const Group& grp : groups) {
    for (std::size_t k = 0; k < orders.size(); ++k) {
      const double exact = pgg_norm_moment({grp.p, grp.d}, orders[k]);
      const double se = grp.stats[k].std_error();
      const double err = std::abs(grp.stats[k].mean() - exact);
      detail::push(r,
                   "moment.p=" + detail::fmt9(grp.p) + ".d=" + std::to_string(grp.d) +
                       ".n=" + detail::fmt9(orders[k]),
                   err <= kSeTolerance * se, err, kSeTolerance * se,
                   "|MC - Gamma ratio|, " + std::to_string(ctx.scale.moment_draws) + " draws, exact " +
                       detail::fmt9(exact) + ", SE " + detail::fmt9(se));
    }
  }

  for (std::size_t d = 1; d <= 5; ++d) {
    const double sq = pgg_norm_moment_rising({2.0, d}, 1);
    const double l1 = pgg_norm_moment_rising({1.0, d}, 1);
    const double dd = static_cast<double>(d);
    detail::push(r, "moment.closed_form.d=" + std::to_string(d), sq == dd && l1 == dd,
                 std::max(std::abs(sq - dd), std::abs(l1 - dd)), 0.0,
                 "E||xi||_2^2 (p=2) and E||xi||_1 (p=1) equal d exactly");
  }

  using boost::math::quadrature::exp_sinh;
  exp_sinh<double> integrator;
  for (double p : ps) {
    auto f = [p](double t) { return std::exp(-std::pow(t, p) / p); };
    const double one_d = 2.0 * integrator.integrate(f, 0.0, std::numeric_limits<double>::infinity());
    const double two_d = 4.0 * integrator.integrate(
                                   [&](double s) {
                                     return integrator.integrate(
                                         [&](double t) { return std::exp(-(std::pow(s, p) + std::pow(t, p)) / p); },
                                         0.0, std::numeric_limits<double>::infinity());
                                   },
                                   0.0, std::numeric_limits<double>::infinity());
    const double quad[2] = {one_d, two_d};
    for (std::size_t d = 1; d <= 2; ++d) {
      const double k = kappa({p, d});
      const double rel = std::abs(k - quad[d - 1]) / quad[d - 1];
      detail::push(r, "kappa.p=" + detail::fmt9(p) + ".d=" + std::to_string(d), rel <= 1e-6, rel, 1e-6,
                   "relative error against quadrature " + detail::fmt9(quad[d - 1]));
    }
  }
  r.runtime_seconds = clock.seconds();
  return r;
}

/// Smoothing gap and smoothed-gradient Lipschitz checks over the potential corpus.
inline SuiteResult run_lemma1_suite(const SuiteContext& ctx) {
  detail::Stopwatch clock;
  SuiteResult r{"lemma1", {}, 0.0};
  std::vector<detail::Target> targets;
  std::vector<double> mus{0.5, 0.1};
  std::vector<double> ps{1.0, 2.0};
  if (ctx.config) {
    targets.push_back({ctx.config->potential_spec(), ctx.config->potential.lambda});
    mus = {ctx.config->smoothing.mu};
    ps = {ctx.config->smoothing.p};
  } else {
    for (std::size_t d : {1, 4})
      for (auto& t : detail::corpus_targets(d, 0.5)) targets.push_back(t);
  }

  std::uint64_t index = 0;
  for (const auto& target : targets) {
    const Potential base = ctx.config ? ctx.config->base_potential() : make_builtin_potential(target.spec);
    const RegularizedPotential pot = regularize(base, target.lambda);
    const std::size_t d = base.dim;
    for (double p : ps) {
      for (double mu : mus) {
        const SmoothingConfig cfg{mu, 1, {p, d}};
        const std::string tag = detail::describe(target.spec) + " p=" + detail::fmt9(p) + " mu=" + detail::fmt9(mu);
        Rng rng = make_stream(ctx.seed, index++);

        const double bound = lemma1_gap_envelope(base, mu, p) + lemma1_lambda_correction(target.lambda, mu, p, d);
        double worst_upper = -std::numeric_limits<double>::infinity();
        double worst_lower = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < ctx.scale.lemma1_points; ++i) {
          const Vector x = detail::random_point(rng, d, 3.0);
          const McEstimate gap = smoothing_gap_mc(pot, cfg, x, ctx.scale.lemma1_gap_draws, rng);
          worst_upper = std::max(worst_upper, gap.value - kSeTolerance * gap.std_error);
          worst_lower = std::min(worst_lower, gap.value + kSeTolerance * gap.std_error);
        }
        detail::push(r, "lemma1.gap " + tag, worst_lower >= 0.0 && worst_upper <= bound, worst_upper, bound,
                     "max(gap - 4 SE) over " + std::to_string(ctx.scale.lemma1_points) +
                         " points vs L mu^(1+a) (2d(d+p)/p)^((1+a)/(2p))/(1+a) + lambda term; min(gap + 4 SE) = " +
                         detail::fmt9(worst_lower));

        const double M = smoothness_constant_M(pot, mu, p) + target.lambda;
        double worst = 0.0;
        Vector x(d), y(d), diff, se;
        for (std::size_t k = 0; k < ctx.scale.lipschitz_pairs; ++k) {
          detail::random_pair(rng, d, 3.0, x, y);
          const double gap = distance2(x, y);
          if (gap == 0.0) continue;
          detail::smoothed_gradient_difference(pot, cfg, x, y, ctx.scale.lipschitz_draws, rng, diff, se);
          // rounding in the two gradient evaluations, which dominates for nearly coincident pairs
          const double roundoff = 64.0 * std::numeric_limits<double>::epsilon() * M * (norm2(x) + norm2(y) + 1.0);
          worst = std::max(worst, (norm2(diff) - kSeTolerance * norm2(se) - roundoff) / gap);
        }
        detail::push(r, "lemma1.lipschitz " + tag, worst <= M, worst, M,
                     "max (||grad diff|| - 4 SE)/||x - y|| over " + std::to_string(ctx.scale.lipschitz_pairs) +
                         " pairs vs M + lambda" + (pot.has_smoothed_gradient() ? " (closed form)" : " (pathwise MC)"));
      }
    }
  }
  r.runtime_seconds = clock.seconds();
  return r;
}

/// Bias and variance of the black-box estimator against their envelopes.
inline SuiteResult run_lemma2_suite(const SuiteContext& ctx) {
  detail::Stopwatch clock;
  SuiteResult r{"lemma2", {}, 0.0};
  std::vector<detail::Target> targets;
  double mu = 0.1, p = 2.0;
  std::vector<std::size_t> ns{1, 2, 4, 8, 16, 32, 64, 100};
  if (ctx.config) {
    targets.push_back({ctx.config->potential_spec(), ctx.config->potential.lambda});
    mu = ctx.config->smoothing.mu;
    p = ctx.config->smoothing.p;
    const std::size_t n = ctx.config->smoothing.n;
    ns = {n, 2 * n, 4 * n};
  } else {
    targets = detail::corpus_targets(4, 1.0);
  }

  std::uint64_t index = 0;
  for (const auto& target : targets) {
    const Potential base = ctx.config ? ctx.config->base_potential() : make_builtin_potential(target.spec);
    const RegularizedPotential pot = regularize(base, target.lambda);
    const std::size_t d = base.dim;
    Rng point_rng = make_stream(ctx.seed, 1000 + index);
    const Vector x = detail::random_point(point_rng, d, 1.5);
    const bool quadratic_base = target.spec.name == "quadratic" || target.spec.name == "zero" ||
                                target.spec.name == "constant";
    std::vector<double> variances;
    for (std::size_t n : ns) {
      const SmoothingConfig cfg{mu, n, {p, d}};
      Rng rng = make_stream(ctx.seed, index++);
      const BiasVarianceReport rep = measure_bias_variance(pot, cfg, x, ctx.scale.lemma2_trials, rng, ctx.threads);
      const std::string tag = detail::describe(target.spec) + " p=" + detail::fmt9(p) + " mu=" + detail::fmt9(mu) +
                              " n=" + std::to_string(n);
      const double bias_tol = kSeTolerance * rep.bias_std_error;
      detail::push(r, "lemma2.bias " + tag, rep.empirical_bias_norm_sq <= rep.bias_bound + bias_tol,
                   rep.empirical_bias_norm_sq, rep.bias_bound + bias_tol,
                   "(M + lambda)^2 mu^2 d^(2/p) = " + detail::fmt9(rep.bias_bound) + " + 4 SE; reference " +
                       to_string(rep.reference_source));
      const double var_tol = kSeTolerance * rep.variance_std_error;
      detail::push(r, "lemma2.variance " + tag, rep.empirical_variance <= rep.variance_bound + var_tol,
                   rep.empirical_variance, rep.variance_bound + var_tol,
                   "(1/n)(0.5 (M + lambda) mu (d+3)^(3/p) + sqrt(2)(d+2)^(2/p)||grad U_mu||)^2 = " +
                       detail::fmt9(rep.variance_bound) + " + 4 SE");
      if (quadratic_base) {
        double worst = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double se = std::hypot(rep.mean_std_error[j], rep.reference_std_error[j]);
          worst = std::max(worst, std::abs(rep.mean_estimate[j] - rep.reference_gradient[j]) / se);
        }
        detail::push(r, "lemma2.unbiased " + tag, rep.unbiased_within(kSeTolerance), worst, kSeTolerance,
                     "max over coordinates of |mean - grad U_mu| / SE");
      }
      variances.push_back(rep.empirical_variance);
    }
    for (std::size_t i = 0; i + 1 < ns.size(); ++i) {
      const double expected = static_cast<double>(ns[i + 1]) / static_cast<double>(ns[i]);
      const double ratio = variances[i] / variances[i + 1];
      const double rel = std::abs(ratio / expected - 1.0);
      detail::push(r,
                   "lemma2.variance_scaling " + detail::describe(target.spec) + " n=" + std::to_string(ns[i]) + "->" +
                       std::to_string(ns[i + 1]),
                   rel <= 0.2, rel, 0.2,
                   "relative deviation of var(n)/var(n') from n'/n = " + detail::fmt9(expected));
    }
  }
  r.runtime_seconds = clock.seconds();
  return r;
}

namespace detail {

/// Per-coordinate stationary variance from post-burn-in time averages; SE from the spread across chains.
inline McEstimate stationary_variance(const ChainResult& res) {
  RunningStats m2, mean;
  for (const auto& mom : res.moments) {
    m2.add(mom.second_moment[0]);
    mean.add(mom.mean[0]);
  }
  return {m2.mean() - mean.mean() * mean.mean(), m2.std_error()};
}

struct DominanceCase {
  std::string label;
  PotentialSpec spec;
  Potential base;
  double lambda = 1.0;
  SmoothingConfig scfg;
  LmcConfig lcfg;
  double xstar_norm_sq = 0.0;
  std::optional<double> w2_init;
};

/// Upper bound on W2(init, target_mu): independent coupling to the target plus the smoothing distance.
inline double initial_w2_bound(const InitLaw& init, std::size_t d, double target_m2, const Lemma3Bound& l3) {
  double m2 = target_m2 + squared_norm(init.mean);
  if (init.kind == InitKind::gaussian) m2 += static_cast<double>(d) * init.scale * init.scale;
  return std::sqrt(m2) + l3.w2_general;
}

template <class Urbg>
Matrix sample_init(const InitLaw& init, std::size_t count, std::size_t d, Urbg& rng) {
  std::normal_distribution<double> normal;
  Matrix m(count, d);
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = init.mean.empty() ? 0.0 : init.mean[j];
      m(i, j) = init.kind == InitKind::gaussian ? c + init.scale * normal(rng) : c;
    }
  return m;
}

inline void run_dominance_case(SuiteResult& r, const DominanceCase& c, std::size_t resamples) {
  const RegularizedPotential pot = regularize(c.base, c.lambda);
  const auto law = make_target_law(c.spec, c.lambda);
  const std::string tag = c.label;
  if (!law) {
    push(r, "mixing.dominance " + tag, false, 0.0, 0.0, "no reference sampler for this target");
    return;
  }
  const std::size_t d = c.base.dim;
  const Lemma3Bound l3 = lemma3_w2_bound(pot, c.scfg.mu, c.scfg.pgg.p, c.xstar_norm_sq);
  const double w2_init = c.w2_init ? *c.w2_init : initial_w2_bound(c.lcfg.init, d, law->second_moment(), l3);
  const TheoryBound tb = theorem1_bound(pot, c.scfg, c.lcfg.eta, c.lcfg.steps, w2_init, c.xstar_norm_sq, 0.0);

  const ChainResult res = run_chain(pot, c.scfg, c.lcfg);
  if (!res.ok()) {
    push(r, "mixing.dominance " + tag, false, std::numeric_limits<double>::infinity(), tb.w2_mixing,
         std::to_string(res.failures.size()) + " chains diverged");
    return;
  }
  const std::size_t N = std::min(c.lcfg.chains, kMaxAssignmentSize);
  Rng pick = make_stream(c.lcfg.seed, 0xD0D0);
  SampleSet final_set(res.final_states);
  if (final_set.size() > N) final_set = subsample(final_set, N, pick);
  Rng init_rng = make_stream(c.lcfg.seed, 0x1417);
  const SampleSet init_set(sample_init(c.lcfg.init, N, d, init_rng));

  RunningStats w2_final, w2_start;
  for (std::size_t k = 0; k < resamples; ++k) {
    Rng rng = make_stream(c.lcfg.seed ^ 0x7A6E7, k);
    const SampleSet reference(law->sample(N, rng));
    w2_final.add(w2_exact_assignment(final_set, reference));
    w2_start.add(w2_exact_assignment(init_set, reference));
  }
  push(r, "mixing.dominance " + tag, w2_final.mean() <= tb.w2_mixing, w2_final.mean(), tb.w2_mixing,
       "exact-assignment W2 to the regularized target, N = " + std::to_string(N) + ", R = " +
           std::to_string(resamples) + ", spread " + fmt9(std::sqrt(w2_final.variance())) + "; bound with C = 0");
  push(r, "mixing.contraction " + tag, w2_final.mean() < w2_start.mean(), w2_final.mean(), w2_start.mean(),
       "W2 after K = " + std::to_string(c.lcfg.steps) + " steps vs W2 of the initial law");
}

inline DominanceCase default_dominance_case(const PotentialSpec& spec, double p, std::uint64_t seed,
                                            std::size_t chains, unsigned threads) {
  DominanceCase c;
  c.spec = spec;
  c.base = make_builtin_potential(spec);
  c.lambda = 0.5;
  c.scfg = {0.2, 10, {p, spec.dim}};
  const RegularizedPotential pot = regularize(c.base, c.lambda);
  c.lcfg.eta = kAutoEtaFraction * max_step_size(pot, c.scfg.mu, p);
  c.lcfg.steps = static_cast<std::size_t>(std::ceil(20.0 / (c.lambda * c.lcfg.eta)));
  c.lcfg.chains = chains;
  c.lcfg.seed = seed;
  c.lcfg.init = {InitKind::point, Vector{2.0, -2.0}, 1.0};
  c.lcfg.threads = threads;
  c.label = describe(spec) + " p=" + fmt9(p);
  return c;
}

}  // namespace detail

/// Stationary-variance oracle for the discretized OU chain and bound dominance on known targets.
inline SuiteResult run_mixing_suite(const SuiteContext& ctx) {
  detail::Stopwatch clock;
  SuiteResult r{"mixing", {}, 0.0};
  const SuiteScale& sc = ctx.scale;

  if (ctx.config) {
    const ExperimentConfig& cfg = *ctx.config;
    const RegularizedPotential pot = cfg.regularized();
    detail::DominanceCase c;
    c.label = detail::describe(cfg.potential_spec()) + " p=" + detail::fmt9(cfg.smoothing.p);
    c.spec = cfg.potential_spec();
    c.base = cfg.base_potential();
    c.lambda = cfg.potential.lambda;
    c.scfg = cfg.smoothing_config();
    c.lcfg = cfg.lmc_config(pot, ctx.threads);
    c.lcfg.keep_trajectory = false;
    c.xstar_norm_sq = cfg.report.xstar_norm_sq;
    c.w2_init = cfg.report.w2_init;
    detail::run_dominance_case(r, c, cfg.report.resamples);
    const auto law = make_target_law(c.spec, c.lambda);
    if (law && law->kind() == TargetLaw::Kind::gaussian && c.base.dim == 1 && c.lcfg.steps > c.lcfg.burn_in) {
      const ChainResult res = run_chain(pot, c.scfg, c.lcfg);
      if (res.ok()) {
        const double oracle = discretized_ou_variance(1.0 / law->gaussian_variance(), c.lcfg.eta);
        const McEstimate v = detail::stationary_variance(res);
        const bool exact = c.lcfg.gradient == GradientMode::exact;
        const double err = std::abs(v.value - oracle);
        const double tol = exact ? kSeTolerance * v.std_error : 0.05 * oracle;
        detail::push(r, std::string("mixing.ou_variance ") + to_string(c.lcfg.gradient), err <= tol, v.value, oracle,
                     exact ? "within 4 SE (SE " + detail::fmt9(v.std_error) + ")" : "within 5%");
      }
    }
    r.runtime_seconds = clock.seconds();
    return r;
  }

  // Discretized OU on U-bar = ||x||^2 / 2.
  const RegularizedPotential ou = regularize(zero_potential(1), 1.0);
  const double eta = 0.01;
  const double oracle = discretized_ou_variance(1.0, eta);
  struct OuCase {
    GradientMode mode;
    double p;
  };
  const OuCase cases[] = {{GradientMode::exact, 2.0}, {GradientMode::black_box, 1.0}, {GradientMode::black_box, 2.0}};
  std::uint64_t index = 0;
  for (const OuCase& oc : cases) {
    const SmoothingConfig scfg{0.01, 50, {oc.p, 1}};
    LmcConfig lcfg;
    lcfg.eta = eta;
    lcfg.steps = sc.ou_steps;
    lcfg.chains = sc.ou_chains;
    lcfg.burn_in = sc.ou_burn_in;
    lcfg.gradient = oc.mode;
    lcfg.seed = derive_seed(ctx.seed, 500 + index++);
    lcfg.threads = ctx.threads;
    const ChainResult res = run_chain(ou, scfg, lcfg);
    const McEstimate v = detail::stationary_variance(res);
    const bool exact = oc.mode == GradientMode::exact;
    const double err = std::abs(v.value - oracle);
    const double tol = exact ? kSeTolerance * v.std_error : 0.05 * oracle;
    const std::string name = exact ? "mixing.ou_variance exact"
                                   : "mixing.ou_variance black_box p=" + detail::fmt9(oc.p);
    detail::push(r, name, res.ok() && err <= tol, v.value, oracle,
                 "oracle 1/(lambda(1 - eta lambda/2)); " +
                     std::string(exact ? "tolerance 4 SE = " + detail::fmt9(tol) : "tolerance 5%") + ", " +
                     std::to_string(lcfg.chains) + " chains x " + std::to_string(lcfg.steps) + " steps, burn-in " +
                     std::to_string(lcfg.burn_in));
  }

  const std::vector<PotentialSpec> specs{
      {"l1", 2, {}}, {"power", 2, {{"alpha", 0.5}}}, {"quadratic", 2, {{"curvature", 1.0}}}};
  for (const auto& spec : specs) {
    for (double p : {1.0, 2.0}) {
      const auto c = detail::default_dominance_case(spec, p, derive_seed(ctx.seed, 700 + index++),
                                                    sc.dominance_chains, ctx.threads);
      detail::run_dominance_case(r, c, sc.dominance_resamples);
    }
  }
  r.runtime_seconds = clock.seconds();
  return r;
}

/// Assignment solver against brute force, the 1-D closed form, and the metric axioms.
inline SuiteResult run_transport_suite(const SuiteContext& ctx) {
  detail::Stopwatch clock;
  SuiteResult r{"transport", {}, 0.0};
  Rng rng = make_stream(ctx.seed, 0x7E5);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<std::size_t> size_pick(1, 8), dim_pick(1, 4);

  auto random_set = [&](std::size_t n, std::size_t d) {
    Matrix m(n, d);
    for (double& v : m.data) v = normal(rng);
    return SampleSet(std::move(m));
  };

  std::size_t mismatches = 0;
  for (std::size_t t = 0; t < ctx.scale.transport_instances; ++t) {
    const std::size_t n = size_pick(rng), d = dim_pick(rng);
    const SampleSet a = random_set(n, d), b = random_set(n, d);
    const Matrix cost = squared_distance_costs(a, b);
    const double solved = assignment_mean_cost(cost, solve_assignment(cost));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      best = std::min(best, assignment_mean_cost(cost, perm));
    } while (std::next_permutation(perm.begin(), perm.end()));
    if (solved != best) ++mismatches;
  }
  detail::push(r, "transport.brute_force", mismatches == 0, static_cast<double>(mismatches), 0.0,
               std::to_string(ctx.scale.transport_instances) + " random instances with N <= 8");

  double worst_rel = 0.0;
  for (std::size_t t = 0; t < ctx.scale.transport_instances; ++t) {
    std::uniform_int_distribution<std::size_t> n_pick(2, 120);
    const std::size_t n = n_pick(rng);
    const SampleSet a = random_set(n, 1), b = random_set(n, 1);
    const double closed = w2_exact_1d(a, b);
    const double assigned = w2_exact_assignment(a, b);
    worst_rel = std::max(worst_rel, std::abs(closed - assigned) / std::max(closed, 1e-300));
  }
  detail::push(r, "transport.one_dimensional", worst_rel <= 1e-12, worst_rel, 1e-12,
               "relative gap between sorted matching and assignment");

  double self = 0.0, asym = 0.0, triangle_excess = -std::numeric_limits<double>::infinity();
  double sliced_excess = -std::numeric_limits<double>::infinity();
  std::size_t positivity_failures = 0;
  for (std::size_t t = 0; t < ctx.scale.transport_instances; ++t) {
    std::uniform_int_distribution<std::size_t> n_pick(2, 60);
    const std::size_t n = n_pick(rng), d = dim_pick(rng);
    const SampleSet a = random_set(n, d), b = random_set(n, d), c = random_set(n, d);
    const double ab = w2_exact_assignment(a, b), ba = w2_exact_assignment(b, a);
    const double bc = w2_exact_assignment(b, c), ac = w2_exact_assignment(a, c);
    self = std::max(self, w2_exact_assignment(a, a));
    asym = std::max(asym, std::abs(ab - ba) / ab);
    triangle_excess = std::max(triangle_excess, (ac - ab - bc) / ac);
    if (!(ab > 0.0)) ++positivity_failures;
    sliced_excess = std::max(sliced_excess, (w2_sliced(a, b, 16, rng) - ab) / ab);
  }
  detail::push(r, "transport.identity", self == 0.0 && positivity_failures == 0, self, 0.0,
               "W2(a, a) = 0 and W2(a, b) > 0 for distinct samples");
  detail::push(r, "transport.symmetry", asym <= 1e-12, asym, 1e-12, "relative |W2(a,b) - W2(b,a)|");
  detail::push(r, "transport.triangle", triangle_excess <= 1e-12, triangle_excess, 1e-12,
               "max (W2(a,c) - W2(a,b) - W2(b,c)) / W2(a,c)");
  detail::push(r, "transport.sliced_lower_bound", sliced_excess <= 1e-12, sliced_excess, 1e-12,
               "sliced W2 never exceeds the exact distance");
  r.runtime_seconds = clock.seconds();
  return r;
}

/// Thrown for a suite name outside suite_names() and "all".
class UnknownSuite : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline SuiteResult run_suite(const std::string& name, const SuiteContext& ctx) {
  if (name == "moments") return run_moments_suite(ctx);
  if (name == "lemma1") return run_lemma1_suite(ctx);
  if (name == "lemma2") return run_lemma2_suite(ctx);
  if (name == "mixing") return run_mixing_suite(ctx);
  if (name == "transport") return run_transport_suite(ctx);
  throw UnknownSuite("unknown suite '" + name + "' (expected moments, lemma1, lemma2, mixing, transport or all)");
}

/// Runs one suite, or every suite for "all".
inline std::vector<SuiteResult> run_suites(const std::string& name, const SuiteContext& ctx) {
  std::vector<SuiteResult> out;
  if (name == "all") {
    for (const auto& s : suite_names()) out.push_back(run_suite(s, ctx));
  } else {
    out.push_back(run_suite(name, ctx));
  }
  return out;
}

inline Json to_json(const SuiteResult& r) {
  Json checks = Json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"name", c.name},
                      {"passed", c.passed},
                      {"observed", c.observed},
                      {"threshold", c.threshold},
                      {"note", c.note}});
  return {{"suite", r.suite}, {"passed", r.passed()}, {"runtime_seconds", r.runtime_seconds}, {"checks", checks}};
}

}  // namespace pgglmc
