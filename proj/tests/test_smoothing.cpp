#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "pgglmc/corpus.hpp"
#include "pgglmc/smoothing.hpp"

using namespace pgglmc;

namespace {

// Two-point Gaussian smoothing estimator written from scratch: (1/n) sum (f(x + mu u) - f(x)) / mu * u.
Vector gaussian_two_point(const std::function<double(const Vector&)>& f, const Vector& x, double mu,
                          const std::vector<Vector>& us) {
  const double fx = f(x);
  Vector g(x.size(), 0.0);
  for (const Vector& u : us) {
    Vector y(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) y[j] = x[j] + mu * u[j];
    const double slope = (f(y) - fx) / mu;
    for (std::size_t j = 0; j < x.size(); ++j) g[j] += slope * u[j];
  }
  for (double& v : g) v /= static_cast<double>(us.size());
  return g;
}

double exact_quadratic_gap(double c, double mu, double p, std::size_t d) {
  return 0.5 * c * mu * mu * pgg_sq_norm_moment_bound({p, d}).exact;
}

}  // namespace

TEST(HadamardWeight, Values) {
  EXPECT_EQ(hadamard_weight(0.0, 1.0), 0.0);
  EXPECT_EQ(hadamard_weight(0.0, 1.5), 0.0);
  EXPECT_EQ(hadamard_weight(-3.0, 2.0), -3.0);
  EXPECT_EQ(hadamard_weight(-3.0, 1.0), -1.0);
  EXPECT_EQ(hadamard_weight(2.5, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(hadamard_weight(4.0, 1.5), 2.0);
  EXPECT_DOUBLE_EQ(hadamard_weight(-4.0, 1.5), -2.0);
}

TEST(Estimator, GaussianCaseBitwiseEqualsIndependentEstimator) {
  Rng rng(2024);
  std::normal_distribution<double> normal;
  for (int k = 0; k < 200; ++k) {
    const std::size_t d = 1 + k % 6, n = 1 + k % 7;
    const auto pot = regularize(k % 2 ? power_potential(d, 0.5) : huber_potential(d, 0.3), 0.4);
    Vector x(d);
    for (double& v : x) v = 2.0 * normal(rng);
    std::vector<Vector> us(n, Vector(d));
    std::vector<double> flat;
    for (auto& u : us)
      for (double& v : u) {
        v = normal(rng);
        flat.push_back(v);
      }
    const SmoothingConfig cfg{0.05 * (1 + k % 3), n, {2.0, d}};
    const Vector lib = grad_estimate_from_draws(pot, cfg, x, flat).value;
    const Vector ref = gaussian_two_point([&](const Vector& y) { return pot.value(y); }, x, cfg.mu, us);
    for (std::size_t j = 0; j < d; ++j) EXPECT_EQ(lib[j], ref[j]);
  }
}

TEST(Estimator, GaussianCaseStreamEqualsNormalDraws) {
  // The p = 2 perturbation sampler consumes the generator exactly like std::normal_distribution.
  const auto pot = regularize(l1_potential(3), 1.0);
  const SmoothingConfig cfg{0.1, 5, {2.0, 3}};
  const Vector x{0.3, -1.0, 2.0};
  Rng a(7), b(7);
  const Vector lib = grad_estimate(pot, cfg, x, a).value;
  std::normal_distribution<double> normal;
  std::vector<Vector> us(5, Vector(3));
  for (auto& u : us)
    for (double& v : u) v = normal(b);
  const Vector ref = gaussian_two_point([&](const Vector& y) { return pot.value(y); }, x, cfg.mu, us);
  for (int j = 0; j < 3; ++j) EXPECT_EQ(lib[j], ref[j]);
}

TEST(Estimator, ReportsEvaluationCount) {
  const auto pot = regularize(l1_potential(2), 1.0);
  Rng rng(1);
  const auto g = grad_estimate(pot, {0.1, 9, {1.5, 2}}, Vector{1.0, 1.0}, rng);
  EXPECT_EQ(g.function_evals, 10U);
  EXPECT_EQ(g.draws_used, 9U);
}

TEST(Estimator, ConstantBaseLeavesOnlyRegularizer) {
  // Without the regularizer every finite difference of a constant is exactly zero.
  Potential flat = constant_potential(3, 5.0);
  const auto pot = unregularized(flat);
  Rng rng(4);
  const auto g = grad_estimate(pot, {0.2, 20, {1.0, 3}}, Vector{1.0, 2.0, 3.0}, rng);
  for (double v : g.value) EXPECT_EQ(v, 0.0);
}

TEST(Estimator, RejectsNonFiniteValues) {
  Potential bad = quadratic_potential(2);
  bad.value = [](std::span<const double> x) { return x[0] > 0.5 ? std::nan("") : 0.0; };
  const auto pot = regularize(bad, 1.0);
  Rng rng(5);
  try {
    grad_estimate(pot, {0.1, 4, {2.0, 2}}, Vector{1.0, 0.0}, rng);
    FAIL() << "expected EvaluationError";
  } catch (const EvaluationError& e) {
    ASSERT_EQ(e.point().size(), 2U);
    EXPECT_EQ(e.point()[0], 1.0);
  }
}

TEST(Estimator, RejectsDimensionMismatch) {
  const auto pot = regularize(l1_potential(2), 1.0);
  Rng rng(1);
  EXPECT_THROW(grad_estimate(pot, {0.1, 1, {2.0, 2}}, Vector{1.0, 2.0, 3.0}, rng), ParameterError);
  EXPECT_THROW(GradientEstimator(pot, {0.1, 1, {2.0, 3}}), ParameterError);
  EXPECT_THROW(GradientEstimator(pot, {0.0, 1, {2.0, 2}}), ParameterError);
  EXPECT_THROW(GradientEstimator(pot, {0.1, 0, {2.0, 2}}), ParameterError);
}

TEST(Estimator, UnbiasedForClosedFormSmoothedGradient) {
  for (double p : {1.0, 1.5, 2.0}) {
    for (const auto& base : {quadratic_potential(3, 2.0), l1_potential(3)}) {
      const auto pot = regularize(base, 0.5);
      Rng rng(31);
      const auto rep = measure_bias_variance(pot, {0.3, 4, {p, 3}}, Vector{0.2, -0.7, 1.1}, 20000, rng);
      EXPECT_EQ(rep.reference_source, ReferenceSource::closed_form);
      EXPECT_TRUE(rep.unbiased_within(4.0)) << base.name << " p=" << p;
    }
  }
}

TEST(Reference, PathwiseAgreesWithClosedForm) {
  const auto pot = regularize(l1_potential(2), 1.0);
  const SmoothingConfig cfg{0.4, 1, {1.5, 2}};
  const Vector x{0.1, -0.3};
  Rng rng(8);
  const auto exact = smoothed_gradient_reference(pot, cfg, x, 1, rng);
  const auto mc = smoothed_gradient_reference(pot, cfg, x, 200000, rng, ReferenceMode::monte_carlo_only);
  EXPECT_EQ(mc.source, ReferenceSource::pathwise_monte_carlo);
  for (int j = 0; j < 2; ++j) EXPECT_NEAR(mc.value[j], exact.value[j], 4.0 * mc.std_error[j]);
}

TEST(Reference, ZerothOrderFallbackAgreesWithClosedForm) {
  Potential base = quadratic_potential(2, 1.0);
  base.subgradient = nullptr;
  base.smoothed_gradient = nullptr;
  const auto pot = regularize(base, 1.0);
  const SmoothingConfig cfg{0.2, 1, {1.0, 2}};
  const Vector x{0.5, -1.0};
  Rng rng(10);
  const auto mc = smoothed_gradient_reference(pot, cfg, x, 400000, rng);
  EXPECT_EQ(mc.source, ReferenceSource::zeroth_order_monte_carlo);
  for (int j = 0; j < 2; ++j) EXPECT_NEAR(mc.value[j], 2.0 * x[j], 4.0 * mc.std_error[j]);
}

TEST(Reference, PathwiseMatchesFiniteDifferenceOfSmoothedValue) {
  // With common draws, the central difference of the sample-mean smoothed value is the
  // sample mean of the gradient up to O(h^2) for smooth potentials.
  const auto pot = regularize(huber_potential(3, 0.5), 0.2);
  const SmoothingConfig cfg{0.3, 1, {1.5, 3}};
  const Vector x{0.4, -0.1, 0.9};
  Rng rng(12);
  PggSampler sampler(cfg.pgg);
  std::vector<double> draws;
  for (int i = 0; i < 20000; ++i) {
    const Vector xi = sampler.draw(rng);
    draws.insert(draws.end(), xi.begin(), xi.end());
  }
  Vector mean_grad(3, 0.0), g(3), shifted(3);
  for (std::size_t i = 0; i < 20000; ++i) {
    for (int j = 0; j < 3; ++j) shifted[j] = x[j] + cfg.mu * draws[3 * i + j];
    pot.subgradient(shifted, g);
    for (int j = 0; j < 3; ++j) mean_grad[j] += g[j] / 20000.0;
  }
  for (int j = 0; j < 3; ++j) {
    const double h = 1e-5;
    Vector xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const double fd = (smoothed_value_from_draws(pot, cfg.mu, xp, draws).value -
                       smoothed_value_from_draws(pot, cfg.mu, xm, draws).value) /
                      (2 * h);
    EXPECT_NEAR(fd, mean_grad[j], 1e-6);
  }
}

TEST(Lemma1, QuadraticGapHasClosedForm) {
  const auto pot = regularize(quadratic_potential(3, 2.0), 1e-9);
  Rng rng(2);
  for (double p : {1.0, 2.0}) {
    const auto gap = smoothing_gap_mc(pot, {0.3, 1, {p, 3}}, Vector{1.0, 0.0, -1.0}, 400000, rng);
    EXPECT_NEAR(gap.value, exact_quadratic_gap(2.0 + 1e-9, 0.3, p, 3), 4.0 * gap.std_error);
  }
}

TEST(Lemma1, EnvelopeDominatesExactQuadraticGap) {
  for (double p : {1.0, 1.25, 1.5, 1.75, 2.0})
    for (std::size_t d : {1, 2, 3, 5, 10, 50, 200}) {
      const Potential q = quadratic_potential(d, 1.0);
      EXPECT_LE(exact_quadratic_gap(1.0, 0.1, p, d), lemma1_gap_envelope(q, 0.1, p) * (1 + 1e-12))
          << "p=" << p << " d=" << d;
    }
}

TEST(Lemma1, SimplifiedGapFailsInOneDimensionAtPOne) {
  // The large-d simplification L mu^2 d^(2/p) / 2 undershoots the exact gap mu^2 at d = 1, p = 1.
  const Potential q = quadratic_potential(1, 1.0);
  EXPECT_LT(lemma1_gap_bound(q, 0.1, 1.0), exact_quadratic_gap(1.0, 0.1, 1.0, 1));
  EXPECT_GE(lemma1_gap_envelope(q, 0.1, 1.0), exact_quadratic_gap(1.0, 0.1, 1.0, 1));
}

TEST(Lemma1, GapIsNonnegativeAndBounded) {
  Rng rng(77);
  for (const auto& base : {l1_potential(2), power_potential(2, 0.5), huber_potential(2, 1.0)})
    for (double mu : {0.5, 0.1}) {
      const auto pot = regularize(base, 0.5);
      const SmoothingConfig cfg{mu, 1, {1.5, 2}};
      const double bound = lemma1_gap_envelope(base, mu, 1.5) + lemma1_lambda_correction(0.5, mu, 1.5, 2);
      for (int i = 0; i < 5; ++i) {
        const Vector x{std::sin(i * 1.3), std::cos(i * 0.7)};
        const auto gap = smoothing_gap_mc(pot, cfg, x, 50000, rng);
        EXPECT_GE(gap.value, -4.0 * gap.std_error);
        EXPECT_LE(gap.value, bound + 4.0 * gap.std_error) << base.name;
      }
    }
}

TEST(Lemma2, BoundArithmetic) {
  EXPECT_DOUBLE_EQ(lemma2_bias_bound(2.0, 1.0, 0.1, 2.0, 4), 9.0 * 0.01 * 4.0);
  const double c0 = 0.5 * 3.0 * 0.1 * std::pow(7.0, 1.5);
  const double c1 = std::sqrt(2.0) * 6.0;
  EXPECT_NEAR(lemma2_variance_bound(2.0, 1.0, 0.1, 2.0, 4, 5, 0.5), (c0 + c1 * 0.5) * (c0 + c1 * 0.5) / 5.0, 1e-12);
  EXPECT_DOUBLE_EQ(lemma2_variance_bound(2.0, 1.0, 0.1, 1.5, 4, 1, 0.5),
                   4.0 * lemma2_variance_bound(2.0, 1.0, 0.1, 1.5, 4, 4, 0.5));
}

TEST(Lemma2, EmpiricalQuantitiesWithinBounds) {
  Rng rng(55);
  for (const auto& base : {quadratic_potential(4), l1_potential(4), power_potential(4, 0.5)}) {
    const auto pot = regularize(base, 1.0);
    const auto rep = measure_bias_variance(pot, {0.1, 8, {2.0, 4}}, Vector{0.5, -0.2, 1.0, 0.3}, 4000, rng);
    EXPECT_LE(rep.empirical_bias_norm_sq, rep.bias_bound + 4.0 * rep.bias_std_error) << base.name;
    EXPECT_LE(rep.empirical_variance, rep.variance_bound + 4.0 * rep.variance_std_error) << base.name;
  }
}

TEST(Lemma2, VarianceHalvesWhenBatchDoubles) {
  const auto pot = regularize(l1_potential(4), 1.0);
  const Vector x{0.5, -0.2, 1.0, 0.3};
  Rng rng(56);
  const auto r1 = measure_bias_variance(pot, {0.1, 10, {2.0, 4}}, x, 8000, rng);
  const auto r2 = measure_bias_variance(pot, {0.1, 20, {2.0, 4}}, x, 8000, rng);
  EXPECT_NEAR(r1.empirical_variance / r2.empirical_variance, 2.0, 0.4);
}

TEST(Lemma2, ResultsDoNotDependOnThreadCount) {
  const auto pot = regularize(power_potential(3, 0.5), 1.0);
  const Vector x{0.5, -0.2, 1.0};
  Rng a(9), b(9);
  const auto r1 = measure_bias_variance(pot, {0.1, 3, {1.5, 3}}, x, 1000, a, 1, 5000);
  const auto r4 = measure_bias_variance(pot, {0.1, 3, {1.5, 3}}, x, 1000, b, 4, 5000);
  EXPECT_EQ(r1.mean_estimate, r4.mean_estimate);
  EXPECT_EQ(r1.empirical_variance, r4.empirical_variance);
  EXPECT_EQ(r1.empirical_bias_norm_sq, r4.empirical_bias_norm_sq);
}
