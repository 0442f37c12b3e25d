#pragma once

// Langevin Monte Carlo on the smoothed regularized potential,
//
//   x_{k+1} = x_k - eta g_{mu,n}(x_k) + sqrt(2 eta) s_k,   s_k ~ N(0, I_d),
//
// and the closed-form W2 bounds for it. The injected diffusion noise s_k is always
// standard Gaussian; only the gradient perturbation uses N_p.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pgglmc/common.hpp"
#include "pgglmc/potential.hpp"
#include "pgglmc/smoothing.hpp"

namespace pgglmc {

inline constexpr double kDivergenceNorm = 1e8;

enum class InitKind { point, gaussian };
enum class GradientMode { black_box, exact };

inline const char* to_string(InitKind k) { return k == InitKind::point ? "point" : "gaussian"; }
inline const char* to_string(GradientMode m) { return m == GradientMode::black_box ? "black_box" : "exact"; }

/// Initial law: point mass at `mean`, or N(mean, scale^2 I). An empty mean is the origin.
struct InitLaw {
  InitKind kind = InitKind::point;
  Vector mean;
  double scale = 1.0;
};

struct LmcConfig {
  double eta = 0.01;
  std::size_t steps = 1000;
  std::size_t chains = 1;
  InitLaw init;
  std::uint64_t seed = 0;
  GradientMode gradient = GradientMode::black_box;
  std::size_t thinning = 0;  // 0 selects max(1, steps / 1000)
  bool keep_trajectory = false;
  std::size_t burn_in = 0;  // iterations excluded from per-chain running moments
  unsigned threads = 1;

  std::size_t effective_thinning() const noexcept {
    return thinning ? thinning : std::max<std::size_t>(1, steps / 1000);
  }

  /// Enforces 0 < eta < 2 / (M + 2 lambda) and the structural invariants.
  void validate(const RegularizedPotential& pot, const SmoothingConfig& scfg) const {
    scfg.validate();
    require(scfg.pgg.d == pot.dim(), "lmc: smoothing dimension does not match potential dimension");
    require(std::isfinite(eta) && eta > 0.0, "lmc: step size eta must be positive");
    const double cap = max_step_size(pot, scfg.mu, scfg.pgg.p);
    if (!(eta < cap))
      throw StepSizeError("lmc: step size eta = " + std::to_string(eta) + " violates eta < 2/(M + 2 lambda) = " +
                          std::to_string(cap));
    require(chains >= 1, "lmc: need at least one chain");
    require(init.mean.empty() || init.mean.size() == pot.dim(), "lmc: init mean has wrong dimension");
    require(init.kind == InitKind::point || (std::isfinite(init.scale) && init.scale > 0.0),
            "lmc: gaussian init needs a positive scale");
    if (gradient == GradientMode::exact)
      require(pot.has_smoothed_gradient(),
              "lmc: exact-gradient mode needs a closed-form smoothed gradient for '" + pot.base().name + "'");
  }
};

struct ChainFailure {
  std::size_t chain = 0;
  std::size_t step = 0;
  double state_norm = 0.0;
  std::string message;
};

/// Per-chain running moments of the iterates after burn-in.
struct ChainMoments {
  std::size_t count = 0;
  Vector mean;
  Vector second_moment;
};

struct Provenance {
  std::uint64_t seed = 0;
  double eta = 0.0;
  double mu = 0.0;
  std::size_t n = 0;
  double p = 0.0;
  double lambda = 0.0;
  std::size_t steps = 0;
  std::size_t chains = 0;
  GradientMode gradient = GradientMode::black_box;
};

struct ChainResult {
  Matrix final_states;                    // chains x d; NaN rows for diverged chains
  std::vector<Matrix> trajectories;       // per chain, thinned; empty unless requested
  std::vector<std::size_t> trajectory_steps;
  std::vector<ChainMoments> moments;      // per chain
  std::vector<ChainFailure> failures;     // sorted by chain index
  std::uint64_t evals_total = 0;          // potential evaluations
  std::uint64_t gradient_evals = 0;       // closed-form gradient calls (exact mode)
  Provenance config_echo;

  bool ok() const noexcept { return failures.empty(); }
};

/// x - eta grad + sqrt(2 eta) noise.
inline Vector langevin_update(std::span<const double> x, std::span<const double> grad, double eta,
                              std::span<const double> noise) {
  Vector next(x.size());
  const double scale = std::sqrt(2.0 * eta);
  for (std::size_t i = 0; i < x.size(); ++i) next[i] = x[i] - eta * grad[i] + scale * noise[i];
  return next;
}

/// One black-box LMC step with fresh perturbation and diffusion draws.
template <class Urbg>
Vector lmc_step(const RegularizedPotential& pot, const SmoothingConfig& cfg, std::span<const double> x, double eta,
                Urbg& rng) {
  require(std::isfinite(eta) && eta > 0.0, "lmc_step: eta must be positive");
  const GradientEstimate g = grad_estimate(pot, cfg, x, rng);
  std::normal_distribution<double> normal;
  Vector noise(x.size());
  for (double& v : noise) v = normal(rng);
  Vector next = langevin_update(x, g.value, eta, noise);
  const double r = norm2(next);
  if (!all_finite(next) || r > kDivergenceNorm) throw DivergenceError("lmc_step: iterate diverged", 0, r);
  return next;
}

namespace detail {

inline void run_one_chain(const RegularizedPotential& pot, const SmoothingConfig& scfg, const LmcConfig& lcfg,
                          std::size_t chain, ChainResult& out, std::optional<ChainFailure>& failure,
                          std::uint64_t& evals, std::uint64_t& grad_evals) {
  const std::size_t d = pot.dim();
  Rng rng = make_stream(lcfg.seed, chain);
  std::normal_distribution<double> normal;
  Vector x(d, 0.0);
  if (!lcfg.init.mean.empty()) x = lcfg.init.mean;
  if (lcfg.init.kind == InitKind::gaussian)
    for (double& v : x) v += lcfg.init.scale * normal(rng);

  ChainMoments& mom = out.moments[chain];
  mom.mean.assign(d, 0.0);
  mom.second_moment.assign(d, 0.0);
  const std::size_t thin = lcfg.effective_thinning();
  std::vector<double> traj;
  auto record = [&](std::size_t k) {
    if (lcfg.keep_trajectory && k % thin == 0) traj.insert(traj.end(), x.begin(), x.end());
    if (k >= lcfg.burn_in && k > 0) {
      ++mom.count;
      const double c = static_cast<double>(mom.count);
      for (std::size_t j = 0; j < d; ++j) {
        mom.mean[j] += (x[j] - mom.mean[j]) / c;
        mom.second_moment[j] += (x[j] * x[j] - mom.second_moment[j]) / c;
      }
    }
  };
  record(0);

  GradientEstimator estimator(pot, scfg);
  Vector grad(d);
  const double diffusion = std::sqrt(2.0 * lcfg.eta);
  for (std::size_t k = 1; k <= lcfg.steps; ++k) {
    try {
      if (lcfg.gradient == GradientMode::exact) {
        pot.smoothed_gradient(x, scfg.mu, scfg.pgg.p, grad);
        ++grad_evals;
      } else {
        evals += estimator.estimate(x, rng, grad);
      }
    } catch (const EvaluationError& e) {
      failure = ChainFailure{chain, k, norm2(x), e.what()};
      break;
    }
    for (std::size_t j = 0; j < d; ++j) x[j] = x[j] - lcfg.eta * grad[j] + diffusion * normal(rng);
    const double r = norm2(x);
    if (!std::isfinite(r) || r > kDivergenceNorm) {
      failure = ChainFailure{chain, k, r, "iterate left the finite region"};
      break;
    }
    record(k);
  }
  auto row = out.final_states.row(chain);
  if (failure) {
    std::fill(row.begin(), row.end(), std::numeric_limits<double>::quiet_NaN());
  } else {
    std::copy(x.begin(), x.end(), row.begin());
  }
  if (lcfg.keep_trajectory) {
    Matrix m(traj.size() / d, d);
    m.data = std::move(traj);
    out.trajectories[chain] = std::move(m);
  }
}

}  // namespace detail

/**
 * Runs `chains` independent chains of K steps. Chain c draws from make_stream(seed, c), so
 * results are bitwise reproducible and independent of the thread count. A diverging chain
 * is stopped and reported in `failures`; the other chains continue.
 */
inline ChainResult run_chain(const RegularizedPotential& pot, const SmoothingConfig& scfg, const LmcConfig& lcfg) {
  lcfg.validate(pot, scfg);
  const std::size_t d = pot.dim();
  ChainResult result;
  result.final_states = Matrix(lcfg.chains, d);
  result.moments.resize(lcfg.chains);
  if (lcfg.keep_trajectory) {
    result.trajectories.resize(lcfg.chains);
    const std::size_t thin = lcfg.effective_thinning();
    for (std::size_t k = 0; k <= lcfg.steps; k += thin) result.trajectory_steps.push_back(k);
  }
  std::vector<std::optional<ChainFailure>> failures(lcfg.chains);
  std::vector<std::uint64_t> evals(lcfg.chains, 0), grad_evals(lcfg.chains, 0);

  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c)
      detail::run_one_chain(pot, scfg, lcfg, c, result, failures[c], evals[c], grad_evals[c]);
  };
  parallel_for(lcfg.chains, lcfg.threads, worker);

  for (std::size_t c = 0; c < lcfg.chains; ++c) {
    if (failures[c]) result.failures.push_back(*failures[c]);
    result.evals_total += evals[c];
    result.gradient_evals += grad_evals[c];
  }
  result.config_echo = Provenance{lcfg.seed, lcfg.eta,  scfg.mu,     scfg.n,       scfg.pgg.p,
                                  pot.lambda(), lcfg.steps, lcfg.chains, lcfg.gradient};
  return result;
}

/// Stationary per-coordinate variance of the exact-gradient chain on U-bar = (c/2)||x||^2:
/// 1 / (c (1 - eta c / 2)).
inline double discretized_ou_variance(double curvature, double eta) {
  return 1.0 / (curvature * (1.0 - 0.5 * eta * curvature));
}

struct Lemma3Bound {
  double a = 0.0;
  double w2_sq_general = 0.0;   // 4 (d + lambda ||x*||^2) / lambda (a + e^a - 1)
  double w2_general = 0.0;      // square root of the above
  double w2_simplified = 0.0;   // 3 sqrt(d a / lambda)
  bool simplified_applicable = false;  // a <= 0.1 (and 8.24 lambda ||x*||^2 < 0.76 d)

  /// The form reported as the smoothing term: simplified when applicable, general otherwise.
  double w2() const noexcept { return simplified_applicable ? w2_simplified : w2_general; }
};

inline Lemma3Bound lemma3_w2_bound_from_a(double a, std::size_t dim, double lambda, double xstar_norm_sq) {
  if (!(lambda > 0.0)) throw UnsupportedParameter("smoothed-target distance bound is undefined for lambda = 0");
  require(a >= 0.0, "lemma3: a must be nonnegative");
  require(xstar_norm_sq >= 0.0, "lemma3: ||x*||^2 must be nonnegative");
  const double d = static_cast<double>(dim);
  Lemma3Bound b;
  b.a = a;
  b.w2_sq_general = 4.0 * (d + lambda * xstar_norm_sq) / lambda * (a + std::expm1(a));
  b.w2_general = std::sqrt(b.w2_sq_general);
  b.w2_simplified = 3.0 * std::sqrt(d * a / lambda);
  b.simplified_applicable = a <= 0.1 && 8.24 * lambda * xstar_norm_sq < 0.76 * d;
  return b;
}

inline Lemma3Bound lemma3_w2_bound(const RegularizedPotential& pot, double mu, double p, double xstar_norm_sq) {
  return lemma3_w2_bound_from_a(perturbation_scale_a(pot, mu, p), pot.dim(), pot.lambda(), xstar_norm_sq);
}

/// (1 - 0.5 lambda eta)^exponent, requiring a nonnegative base.
inline double geometric_factor(double lambda, double eta, double exponent) {
  const double base = 1.0 - 0.5 * lambda * eta;
  require(base >= 0.0, "geometric factor needs lambda eta <= 2");
  return std::pow(base, exponent);
}

struct BoundTerm {
  std::string name;
  std::string formula;
  double value = 0.0;
};

struct TheoryBound {
  double w2_mixing = 0.0;       // sum of the seven terms, geometric factor with exponent K/2
  double w2_mixing_proof_form = 0.0;  // same sum with exponent K
  double w2_smoothing = 0.0;
  double a = 0.0;
  double M = 0.0;
  double C = 0.0;
  double geometric_theorem = 0.0;  // (1 - 0.5 lambda eta)^(K/2)
  double geometric_proof = 0.0;    // (1 - 0.5 lambda eta)^K
  Lemma3Bound lemma3;
  std::array<BoundTerm, 7> terms;
  std::vector<std::string> notes;
};

/// Seven-term W2 mixing bound. C is the unspecified constant of the m2 term (0 drops it).
inline TheoryBound theorem1_bound(const RegularizedPotential& pot, const SmoothingConfig& scfg, double eta,
                                  std::size_t steps, double w2_init, double xstar_norm_sq, double C) {
  scfg.validate();
  const double lambda = pot.lambda();
  if (!(lambda > 0.0)) throw UnsupportedParameter("mixing bound is undefined for lambda = 0");
  require(std::isfinite(eta) && eta > 0.0, "theorem1: eta must be positive");
  require(w2_init >= 0.0, "theorem1: initial W2 must be nonnegative");
  require(C >= 0.0, "theorem1: C must be nonnegative");
  const double mu = scfg.mu;
  const double p = scfg.pgg.p;
  const double cap = max_step_size(pot, mu, p);
  if (!(eta < cap))
    throw StepSizeError("theorem1: eta = " + std::to_string(eta) + " violates eta < 2/(M + 2 lambda) = " +
                        std::to_string(cap));

  const double d = static_cast<double>(pot.dim());
  const double n = static_cast<double>(scfg.n);
  const double K = static_cast<double>(steps);
  TheoryBound tb;
  tb.M = smoothness_constant_M(pot, mu, p);
  tb.a = perturbation_scale_a(pot, mu, p);
  tb.C = C;
  tb.lemma3 = lemma3_w2_bound_from_a(tb.a, pot.dim(), lambda, xstar_norm_sq);
  tb.w2_smoothing = tb.lemma3.w2();
  const double ML = tb.M + lambda;
  tb.geometric_theorem = geometric_factor(lambda, eta, K / 2.0);
  tb.geometric_proof = geometric_factor(lambda, eta, K);

  tb.terms[0] = {"initial", "(1 - 0.5 lambda eta)^(K/2) W2(init, target_mu)", tb.geometric_theorem * w2_init};
  tb.terms[1] = {"discretization", "1.9 (M + lambda)/lambda (eta d)^(1/2)", 1.9 * ML / lambda * std::sqrt(eta * d)};
  tb.terms[2] = {"estimator_bias", "2 (M + lambda)/lambda mu d^(1/p)", 2.0 * ML / lambda * mu * std::pow(d, 1.0 / p)};
  tb.terms[3] = {"smoothing", tb.lemma3.simplified_applicable ? "3 sqrt(d a / lambda)"
                                                              : "sqrt(4 (d + lambda |x*|^2)/lambda (a + e^a - 1))",
                 tb.w2_smoothing};
  tb.terms[4] = {"variance_smoothing", "lambda^(-1/2) n^(-1/2) eta^(1/2) (M + lambda) mu (d+3)^(3/p)",
                 std::sqrt(eta) * ML * mu * std::pow(d + 3.0, 3.0 / p) / (std::sqrt(lambda) * std::sqrt(n))};
  tb.terms[5] = {"variance_gradient", "sqrt(M + lambda)/sqrt(lambda) n^(-1/2) eta^(1/2) d^(1/2) (d+2)^(1/p)",
                 std::sqrt(ML) / std::sqrt(lambda) / std::sqrt(n) * std::sqrt(eta) * std::sqrt(d) *
                     std::pow(d + 2.0, 1.0 / p)};
  const double dlogd = d * std::log(d);
  tb.terms[6] = {"regularization", "C lambda (d log d)^4", C * lambda * dlogd * dlogd * dlogd * dlogd};

  double sum = 0.0;
  for (const auto& t : tb.terms) sum += t.value;
  tb.w2_mixing = sum;
  tb.w2_mixing_proof_form = sum - tb.terms[0].value + tb.geometric_proof * w2_init;

  if (C == 0.0) tb.notes.push_back("C = 0: the regularization term is omitted (its constant is unspecified)");
  if (!tb.lemma3.simplified_applicable)
    tb.notes.push_back("a > 0.1 or large lambda ||x*||^2: smoothing term uses the general form");
  tb.notes.push_back("initial term uses exponent K/2; the exponent-K variant is w2_mixing_proof_form");
  return tb;
}

}  // namespace pgglmc
