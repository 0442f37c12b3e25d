#pragma once

// p-generalized Gaussian smoothing U_mu(x) = E U(x + mu xi) and the zeroth-order
// gradient estimator
//
//   g_{mu,n}(x) = (1/n) sum_i [(U(x + mu xi_i) - U(x)) / mu] (xi_i o |xi_i|^(p-2)),
//
// together with the bias/variance envelopes it is checked against.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <vector>

#include "pgglmc/common.hpp"
#include "pgglmc/pgg.hpp"
#include "pgglmc/potential.hpp"

namespace pgglmc {

struct SmoothingConfig {
  double mu = 0.1;
  std::size_t n = 1;
  PggSpec pgg;

  void validate() const {
    require(std::isfinite(mu) && mu > 0.0, "smoothing: mu must be positive");
    require(n >= 1, "smoothing: batch size n must be at least 1");
    pgg.validate();
  }
};

/// xi o |xi|^(p-2), computed as sign(xi) |xi|^(p-1) so that it stays finite at xi = 0.
inline double hadamard_weight(double xi, double p) noexcept {
  if (p == 2.0) return xi;
  if (xi == 0.0) return 0.0;
  const double m = std::pow(std::abs(xi), p - 1.0);
  return xi > 0.0 ? m : -m;
}

struct GradientEstimate {
  Vector value;
  std::size_t draws_used = 0;
  std::size_t function_evals = 0;
};

namespace detail {

inline std::string describe_point(std::span<const double> x) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ')';
  return os.str();
}

inline double checked_value(const RegularizedPotential& pot, std::span<const double> x) {
  const double v = pot.value(x);
  if (!std::isfinite(v))
    throw EvaluationError("potential '" + pot.base().name + "' is not finite at " + describe_point(x),
                          Vector(x.begin(), x.end()));
  return v;
}

inline void check_dim(const RegularizedPotential& pot, std::span<const double> x) {
  require(x.size() == pot.dim(), "point dimension " + std::to_string(x.size()) +
                                     " does not match potential dimension " + std::to_string(pot.dim()));
}

}  // namespace detail

/// Reusable estimator: owns the perturbation sampler and scratch buffers.
class GradientEstimator {
 public:
  GradientEstimator(const RegularizedPotential& pot, SmoothingConfig cfg)
      : pot_(&pot), cfg_(cfg), sampler_(cfg.pgg), xi_(pot.dim()), shifted_(pot.dim()) {
    cfg_.validate();
    require(cfg_.pgg.d == pot.dim(), "smoothing dimension does not match potential dimension");
  }

  const SmoothingConfig& config() const noexcept { return cfg_; }

  /// Writes g_{mu,n}(x) into `out` using n fresh draws. Returns the number of function evaluations.
  template <class Urbg>
  std::size_t estimate(std::span<const double> x, Urbg& rng, std::span<double> out) {
    const std::size_t d = pot_->dim();
    const double mu = cfg_.mu;
    const double p = cfg_.pgg.p;
    const double base = detail::checked_value(*pot_, x);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < cfg_.n; ++i) {
      sampler_.draw(rng, xi_);
      for (std::size_t j = 0; j < d; ++j) shifted_[j] = x[j] + mu * xi_[j];
      const double diff = (detail::checked_value(*pot_, shifted_) - base) / mu;
      for (std::size_t j = 0; j < d; ++j) out[j] += diff * hadamard_weight(xi_[j], p);
    }
    const double n = static_cast<double>(cfg_.n);
    for (double& v : out) v /= n;
    return cfg_.n + 1;
  }

 private:
  const RegularizedPotential* pot_;
  SmoothingConfig cfg_;
  PggSampler sampler_;
  Vector xi_;
  Vector shifted_;
};

template <class Urbg>
GradientEstimate grad_estimate(const RegularizedPotential& pot, const SmoothingConfig& cfg,
                               std::span<const double> x, Urbg& rng) {
  detail::check_dim(pot, x);
  GradientEstimator estimator(pot, cfg);
  GradientEstimate result;
  result.value.assign(x.size(), 0.0);
  result.function_evals = estimator.estimate(x, rng, result.value);
  result.draws_used = cfg.n;
  return result;
}

/// The estimator on caller-supplied draws (row-major, n rows of d), for reproducible comparisons.
inline GradientEstimate grad_estimate_from_draws(const RegularizedPotential& pot, const SmoothingConfig& cfg,
                                                 std::span<const double> x, std::span<const double> draws) {
  cfg.validate();
  detail::check_dim(pot, x);
  const std::size_t d = x.size();
  require(draws.size() == cfg.n * d, "grad_estimate_from_draws: expected n*d draws");
  const double mu = cfg.mu;
  const double p = cfg.pgg.p;
  const double base = detail::checked_value(pot, x);
  GradientEstimate result;
  result.value.assign(d, 0.0);
  Vector shifted(d);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const auto xi = draws.subspan(i * d, d);
    for (std::size_t j = 0; j < d; ++j) shifted[j] = x[j] + mu * xi[j];
    const double diff = (detail::checked_value(pot, shifted) - base) / mu;
    for (std::size_t j = 0; j < d; ++j) result.value[j] += diff * hadamard_weight(xi[j], p);
  }
  for (double& v : result.value) v /= static_cast<double>(cfg.n);
  result.draws_used = cfg.n;
  result.function_evals = cfg.n + 1;
  return result;
}

/// Monte Carlo mean of U(x + mu xi_i) over caller-supplied draws (m rows of d).
inline McEstimate smoothed_value_from_draws(const RegularizedPotential& pot, double mu, std::span<const double> x,
                                            std::span<const double> draws) {
  detail::check_dim(pot, x);
  const std::size_t d = x.size();
  require(!draws.empty() && draws.size() % d == 0, "smoothed_value_from_draws: draws must be m rows of d");
  RunningStats stats;
  Vector shifted(d);
  for (std::size_t i = 0; i < draws.size() / d; ++i) {
    for (std::size_t j = 0; j < d; ++j) shifted[j] = x[j] + mu * draws[i * d + j];
    stats.add(detail::checked_value(pot, shifted));
  }
  return {stats.mean(), stats.std_error()};
}

template <class Urbg>
McEstimate smoothed_value_mc(const RegularizedPotential& pot, const SmoothingConfig& cfg, std::span<const double> x,
                             std::size_t m, Urbg& rng) {
  cfg.validate();
  detail::check_dim(pot, x);
  require(m >= 1, "smoothed_value_mc: m must be at least 1");
  PggSampler sampler(cfg.pgg);
  RunningStats stats;
  Vector xi(x.size()), shifted(x.size());
  for (std::size_t i = 0; i < m; ++i) {
    sampler.draw(rng, xi);
    for (std::size_t j = 0; j < x.size(); ++j) shifted[j] = x[j] + cfg.mu * xi[j];
    stats.add(detail::checked_value(pot, shifted));
  }
  return {stats.mean(), stats.std_error()};
}

/// Paired estimate of the smoothing gap U_mu(x) - U(x); lower variance than differencing two means.
template <class Urbg>
McEstimate smoothing_gap_mc(const RegularizedPotential& pot, const SmoothingConfig& cfg, std::span<const double> x,
                            std::size_t m, Urbg& rng) {
  cfg.validate();
  detail::check_dim(pot, x);
  require(m >= 1, "smoothing_gap_mc: m must be at least 1");
  const double base = detail::checked_value(pot, x);
  PggSampler sampler(cfg.pgg);
  RunningStats stats;
  Vector xi(x.size()), shifted(x.size());
  for (std::size_t i = 0; i < m; ++i) {
    sampler.draw(rng, xi);
    for (std::size_t j = 0; j < x.size(); ++j) shifted[j] = x[j] + cfg.mu * xi[j];
    stats.add(detail::checked_value(pot, shifted) - base);
  }
  return {stats.mean(), stats.std_error()};
}

enum class ReferenceSource { closed_form, pathwise_monte_carlo, zeroth_order_monte_carlo };

inline const char* to_string(ReferenceSource s) {
  switch (s) {
    case ReferenceSource::closed_form: return "closed_form";
    case ReferenceSource::pathwise_monte_carlo: return "pathwise_monte_carlo";
    case ReferenceSource::zeroth_order_monte_carlo: return "zeroth_order_monte_carlo";
  }
  return "unknown";
}

struct ReferenceGradient {
  Vector value;
  Vector std_error;  // per coordinate; zero for closed forms
  ReferenceSource source = ReferenceSource::closed_form;
};

enum class ReferenceMode { automatic, monte_carlo_only };

/**
 * Ground truth for grad U_mu-bar(x).
 *
 * Uses the registered closed form when there is one. Otherwise averages m draws of
 * grad U-bar(x + mu xi) when a subgradient exists, falling back to the zeroth-order identity
 * grad U_mu(x) = (1/mu) E[(U(x + mu xi) - U(x)) xi o |xi|^(p-2)].
 */
template <class Urbg>
ReferenceGradient smoothed_gradient_reference(const RegularizedPotential& pot, const SmoothingConfig& cfg,
                                              std::span<const double> x, std::size_t m, Urbg& rng,
                                              ReferenceMode mode = ReferenceMode::automatic) {
  cfg.validate();
  detail::check_dim(pot, x);
  require(m >= 1, "smoothed_gradient_reference: m must be at least 1");
  const std::size_t d = x.size();
  ReferenceGradient ref;
  ref.value.assign(d, 0.0);
  ref.std_error.assign(d, 0.0);
  if (mode == ReferenceMode::automatic && pot.has_smoothed_gradient()) {
    pot.smoothed_gradient(x, cfg.mu, cfg.pgg.p, ref.value);
    ref.source = ReferenceSource::closed_form;
    return ref;
  }
  std::vector<RunningStats> stats(d);
  PggSampler sampler(cfg.pgg);
  Vector xi(d), shifted(d), g(d);
  const bool pathwise = pot.has_subgradient();
  const double base = pathwise ? 0.0 : detail::checked_value(pot, x);
  for (std::size_t i = 0; i < m; ++i) {
    sampler.draw(rng, xi);
    for (std::size_t j = 0; j < d; ++j) shifted[j] = x[j] + cfg.mu * xi[j];
    if (pathwise) {
      pot.subgradient(shifted, g);
    } else {
      const double diff = (detail::checked_value(pot, shifted) - base) / cfg.mu;
      for (std::size_t j = 0; j < d; ++j) g[j] = diff * hadamard_weight(xi[j], cfg.pgg.p);
    }
    for (std::size_t j = 0; j < d; ++j) stats[j].add(g[j]);
  }
  for (std::size_t j = 0; j < d; ++j) {
    ref.value[j] = stats[j].mean();
    ref.std_error[j] = stats[j].std_error();
  }
  ref.source = pathwise ? ReferenceSource::pathwise_monte_carlo : ReferenceSource::zeroth_order_monte_carlo;
  return ref;
}

/// U_mu(x) - U(x) <= L mu^(1+alpha) d^((1+alpha)/p) / (1+alpha). Asymptotic in d.
inline double lemma1_gap_bound(const Potential& pot, double mu, double p) {
  require(mu > 0.0, "lemma1_gap_bound: mu must be positive");
  const double d = static_cast<double>(pot.dim);
  const double a = pot.alpha;
  return pot.L * std::pow(mu, 1.0 + a) * std::pow(d, (1.0 + a) / p) / (1.0 + a);
}

/// The same gap before the large-d simplification: L mu^(1+alpha) (2d(d+p)/p)^((1+alpha)/(2p)) / (1+alpha).
/// Holds for every d.
inline double lemma1_gap_envelope(const Potential& pot, double mu, double p) {
  require(mu > 0.0, "lemma1_gap_envelope: mu must be positive");
  const double d = static_cast<double>(pot.dim);
  const double a = pot.alpha;
  return pot.L * std::pow(mu, 1.0 + a) * std::pow(2.0 * d * (d + p) / p, (1.0 + a) / (2.0 * p)) / (1.0 + a);
}

/// Contribution of the (lambda/2)||x||^2 term to the smoothing gap, bounded by (lambda/2) mu^2 (d+1)^(2/p).
inline double lemma1_lambda_correction(double lambda, double mu, double p, std::size_t dim) {
  return 0.5 * lambda * mu * mu * std::pow(static_cast<double>(dim) + 1.0, 2.0 / p);
}

/// ||E[zeta | x]||^2 <= (M + lambda)^2 mu^2 d^(2/p).
inline double lemma2_bias_bound(double M, double lambda, double mu, double p, std::size_t dim) {
  const double s = (M + lambda) * mu;
  return s * s * std::pow(static_cast<double>(dim), 2.0 / p);
}

/// E||zeta - E[zeta|x]||^2 <= (1/n) (0.5 (M+lambda) mu (d+3)^(3/p) + sqrt(2) (d+2)^(2/p) ||grad U_mu(x)||)^2.
inline double lemma2_variance_bound(double M, double lambda, double mu, double p, std::size_t dim, std::size_t n,
                                    double smoothed_grad_norm) {
  const double d = static_cast<double>(dim);
  const double inner = 0.5 * (M + lambda) * mu * std::pow(d + 3.0, 3.0 / p) +
                       std::sqrt(2.0) * std::pow(d + 2.0, 2.0 / p) * smoothed_grad_norm;
  return inner * inner / static_cast<double>(n);
}

struct BiasVarianceReport {
  double empirical_bias_norm_sq = 0.0;
  double bias_std_error = 0.0;  // delta-method SE of empirical_bias_norm_sq
  double empirical_variance = 0.0;
  double variance_std_error = 0.0;
  double bias_bound = 0.0;
  double variance_bound = 0.0;
  Vector reference_gradient;
  Vector reference_std_error;
  ReferenceSource reference_source = ReferenceSource::closed_form;
  Vector mean_estimate;
  Vector mean_std_error;  // per coordinate SE of mean_estimate
  std::size_t trials = 0;
  std::size_t n = 0;
  double M = 0.0;

  /// Each coordinate of the mean estimate lies within `k` standard errors of the reference.
  bool unbiased_within(double k) const {
    for (std::size_t j = 0; j < mean_estimate.size(); ++j) {
      const double se = std::hypot(mean_std_error[j], reference_std_error[j]);
      if (std::abs(mean_estimate[j] - reference_gradient[j]) > k * se) return false;
    }
    return true;
  }
};

/**
 * Empirical bias and variance of g_{mu,n}(x) over independent trials, next to the
 * bias and variance envelopes at the same (M, lambda, mu, d, p, n).
 *
 * Trial t draws from its own stream derived from one value of `rng`, so results do not
 * depend on `threads`.
 */
template <class Urbg>
BiasVarianceReport measure_bias_variance(const RegularizedPotential& pot, const SmoothingConfig& cfg,
                                         std::span<const double> x, std::size_t trials, Urbg& rng,
                                         unsigned threads = 1, std::size_t reference_draws = 0) {
  cfg.validate();
  detail::check_dim(pot, x);
  require(trials >= 2, "measure_bias_variance: need at least 2 trials");
  const std::size_t d = x.size();
  const std::uint64_t master = rng();

  BiasVarianceReport report;
  report.trials = trials;
  report.n = cfg.n;
  report.M = smoothness_constant_M(pot, cfg.mu, cfg.pgg.p);

  Rng ref_rng = make_stream(master, ~std::uint64_t{0});
  const std::size_t m = reference_draws ? reference_draws : 100 * trials;
  const ReferenceGradient ref = smoothed_gradient_reference(pot, cfg, x, m, ref_rng);
  report.reference_gradient = ref.value;
  report.reference_std_error = ref.std_error;
  report.reference_source = ref.source;

  std::vector<double> samples(trials * d);
  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      // Fresh per trial: the distributions cache spare variates between calls.
      GradientEstimator estimator(pot, cfg);
      Rng stream = make_stream(master, t);
      estimator.estimate(x, stream, std::span<double>(samples).subspan(t * d, d));
    }
  };
  parallel_for(trials, threads, worker);

  // Reductions run in trial order.
  report.mean_estimate.assign(d, 0.0);
  report.mean_std_error.assign(d, 0.0);
  std::vector<RunningStats> coord(d);
  for (std::size_t t = 0; t < trials; ++t)
    for (std::size_t j = 0; j < d; ++j) coord[j].add(samples[t * d + j]);
  double bias_sq = 0.0, bias_var = 0.0;
  const double T = static_cast<double>(trials);
  for (std::size_t j = 0; j < d; ++j) {
    report.mean_estimate[j] = coord[j].mean();
    report.mean_std_error[j] = coord[j].std_error();
    const double b = coord[j].mean() - ref.value[j];
    const double s2 = coord[j].variance() / T + ref.std_error[j] * ref.std_error[j];
    bias_sq += b * b;
    bias_var += 2.0 * s2 * s2 + 4.0 * b * b * s2;
  }
  report.empirical_bias_norm_sq = bias_sq;
  report.bias_std_error = std::sqrt(bias_var);

  RunningStats spread;
  for (std::size_t t = 0; t < trials; ++t) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = samples[t * d + j] - report.mean_estimate[j];
      s += c * c;
    }
    spread.add(s);
  }
  report.empirical_variance = spread.mean() * T / (T - 1.0);
  report.variance_std_error = spread.std_error() * T / (T - 1.0);

  const double p = cfg.pgg.p;
  report.bias_bound = lemma2_bias_bound(report.M, pot.lambda(), cfg.mu, p, d);
  report.variance_bound = lemma2_variance_bound(report.M, pot.lambda(), cfg.mu, p, d, cfg.n, norm2(ref.value));
  return report;
}

}  // namespace pgglmc
