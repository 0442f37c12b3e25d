#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "pgglmc/corpus.hpp"
#include "pgglmc/pgg.hpp"
#include "pgglmc/potential.hpp"

using namespace pgglmc;

namespace {

std::vector<Potential> corpus(std::size_t d) {
  return {zero_potential(d),         constant_potential(d, 3.0), quadratic_potential(d, 2.0),
          power_potential(d, 0.0),   power_potential(d, 0.5),    power_potential(d, 1.0),
          l1_potential(d),           huber_potential(d, 0.5)};
}

Vector random_vector(Rng& rng, std::size_t d, double scale) {
  std::normal_distribution<double> n;
  Vector x(d);
  for (double& v : x) v = scale * n(rng);
  return x;
}

}  // namespace

TEST(Constants, SmoothnessMatchesHandArithmetic) {
  // L = 2, alpha = 0.5, d = 4, p = 2, mu = 0.25: M = 2 * 4^0.25 / (0.25^0.5 * 1.5^0.5).
  Potential pot = power_potential(4, 0.5);
  pot.L = 2.0;
  const auto reg = regularize(pot, 0.3);
  EXPECT_NEAR(smoothness_constant_M(reg, 0.25, 2.0), 2.0 * std::sqrt(2.0) / (0.5 * std::sqrt(1.5)), 1e-14);
  // a = 2 * 0.25^1.5 * 4^0.75 / 1.5 + 0.15 * 0.0625 * 5.
  EXPECT_NEAR(perturbation_scale_a(reg, 0.25, 2.0),
              2.0 * 0.125 * std::pow(4.0, 0.75) / 1.5 + 0.5 * 0.3 * 0.0625 * 5.0, 1e-14);
  EXPECT_NEAR(max_step_size(reg, 0.25, 2.0), 2.0 / (smoothness_constant_M(reg, 0.25, 2.0) + 0.6), 1e-15);
}

TEST(Constants, SmoothCaseReducesToL) {
  const auto reg = regularize(quadratic_potential(7, 3.0), 1.0);
  for (double mu : {1e-3, 0.1, 2.0})
    for (double p : {1.0, 1.5, 2.0}) EXPECT_DOUBLE_EQ(smoothness_constant_M(reg, mu, p), 3.0);
}

TEST(Constants, MonotoneInMu) {
  for (double alpha : {0.0, 0.25, 0.5, 0.9}) {
    const auto reg = regularize(power_potential(3, alpha), 0.5);
    double prev_M = std::numeric_limits<double>::infinity(), prev_a = 0.0;
    for (double mu : {0.001, 0.01, 0.1, 1.0}) {
      const double M = smoothness_constant_M(reg, mu, 1.5);
      const double a = perturbation_scale_a(reg, mu, 1.5);
      EXPECT_LT(M, prev_M);
      EXPECT_GT(a, prev_a);
      prev_M = M;
      prev_a = a;
    }
  }
}

TEST(Constants, RejectNonPositiveMu) {
  const auto reg = regularize(l1_potential(2), 1.0);
  EXPECT_THROW(smoothness_constant_M(reg, 0.0, 2.0), ParameterError);
  EXPECT_THROW(perturbation_scale_a(reg, -1.0, 2.0), ParameterError);
}

TEST(Regularize, RequiresPositiveLambda) {
  EXPECT_THROW(regularize(l1_potential(2), 0.0), ParameterError);
  EXPECT_THROW(regularize(l1_potential(2), -1.0), ParameterError);
  EXPECT_THROW(regularize(l1_potential(2), std::nan("")), ParameterError);
  EXPECT_EQ(unregularized(l1_potential(2)).lambda(), 0.0);
}

TEST(Regularize, AddsQuadraticToValueAndGradients) {
  const auto reg = regularize(l1_potential(3), 0.5);
  const Vector x{1.0, -2.0, 0.5};
  EXPECT_DOUBLE_EQ(reg.value(x), 3.5 + 0.25 * 5.25);
  const Vector g = reg.subgradient(x);
  EXPECT_DOUBLE_EQ(g[0], 1.5);
  EXPECT_DOUBLE_EQ(g[1], -2.0);
  EXPECT_DOUBLE_EQ(g[2], 1.25);
}

TEST(Potential, ValidateRejectsBadDeclarations) {
  Potential p = quadratic_potential(2);
  p.alpha = 1.5;
  EXPECT_THROW(p.validate(), ParameterError);
  p = quadratic_potential(2);
  p.L = -1.0;
  EXPECT_THROW(p.validate(), ParameterError);
  p = quadratic_potential(2);
  p.value = nullptr;
  EXPECT_THROW(p.validate(), ParameterError);
}

TEST(Corpus, CertificationPassesForBuiltins) {
  for (std::size_t d : {1, 3, 5})
    for (const auto& pot : corpus(d)) {
      Rng rng(1234 + d);
      const auto rep = certify(pot, rng, 2000);
      EXPECT_TRUE(rep.checked);
      EXPECT_TRUE(rep.passed()) << pot.name << " d=" << d << " holder=" << rep.holder_violations
                                << " convexity=" << rep.convexity_violations << " descent=" << rep.descent_violations;
    }
}

TEST(Corpus, CertificationCatchesUnderstatedConstant) {
  Potential pot = quadratic_potential(3, 4.0);
  pot.L = 1.0;
  Rng rng(3);
  const auto rep = certify(pot, rng, 500);
  EXPECT_FALSE(rep.passed());
  EXPECT_GT(rep.holder_violations, 0U);
  EXPECT_NEAR(rep.worst_holder_ratio, 4.0, 1e-9);
}

TEST(Corpus, PowerHolderConstantIsAttainedAntipodally) {
  for (double alpha : {0.0, 0.5}) {
    const Potential pot = power_potential(2, alpha);
    const Vector x{0.3, 0.4}, y{-0.3, -0.4};
    Vector gx(2), gy(2);
    pot.subgradient(x, gx);
    pot.subgradient(y, gy);
    Vector diff{gx[0] - gy[0], gx[1] - gy[1]};
    EXPECT_NEAR(norm2(diff), pot.L * std::pow(1.0, alpha), 1e-12);
  }
}

TEST(Corpus, RegularizedPotentialIsStronglyConvex) {
  const double lambda = 0.7;
  for (const auto& base : corpus(3)) {
    const auto reg = regularize(base, lambda);
    Rng rng(99);
    for (int k = 0; k < 500; ++k) {
      const Vector x = random_vector(rng, 3, 2.0), y = random_vector(rng, 3, 2.0);
      const Vector g = reg.subgradient(x);
      Vector diff(3);
      for (int i = 0; i < 3; ++i) diff[i] = y[i] - x[i];
      const double lower = reg.value(x) + dot(g, diff) + 0.5 * lambda * squared_norm(diff);
      EXPECT_GE(reg.value(y), lower - 1e-10 * (1.0 + std::abs(lower))) << base.name;
    }
  }
}

TEST(Corpus, SubgradientsMatchFiniteDifferences) {
  Rng rng(17);
  for (const auto& pot : {quadratic_potential(4, 1.5), huber_potential(4, 0.7), power_potential(4, 0.5),
                          power_potential(4, 1.0)}) {
    for (int k = 0; k < 20; ++k) {
      Vector x = random_vector(rng, 4, 1.5);
      Vector g(4);
      pot.subgradient(x, g);
      for (int i = 0; i < 4; ++i) {
        const double h = 1e-6;
        Vector xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        EXPECT_NEAR(g[i], (pot.value(xp) - pot.value(xm)) / (2 * h), 1e-6) << pot.name;
      }
    }
  }
}

TEST(Corpus, L1SmoothedGradientMatchesTailQuadrature) {
  // In one dimension d/dx E|x + mu xi| = P(xi > -x/mu) - P(xi < -x/mu) = sign(x) (1 - 2 P(xi > |x|/mu)).
  using Q = boost::math::quadrature::gauss_kronrod<double, 61>;
  const Potential pot = l1_potential(1);
  for (double p : {1.0, 1.5, 2.0})
    for (double mu : {0.1, 0.7})
      for (double x0 : {-1.3, -0.05, 0.02, 0.4, 2.0}) {
        const double k1 = kappa({p, 1});
        const double c = std::abs(x0) / mu;
        const double tail = Q::integrate([&](double t) { return std::exp(-std::pow(t, p) / p) / k1; }, c,
                                         std::numeric_limits<double>::infinity(), 15, 1e-14);
        const double expect = std::copysign(1.0 - 2.0 * tail, x0);
        double g = 0.0;
        const double x[1] = {x0};
        pot.smoothed_gradient(x, mu, p, std::span<double>(&g, 1));
        EXPECT_NEAR(g, expect, 1e-10) << "p=" << p << " mu=" << mu << " x=" << x0;
      }
}

TEST(Registry, KnownNamesAndDefaults) {
  const auto names = builtin_potential_names();
  EXPECT_EQ(names, (std::vector<std::string>{"constant", "huber", "l1", "power", "quadratic", "zero"}));
  const Potential q = make_builtin_potential({"quadratic", 3, {}});
  EXPECT_EQ(q.dim, 3U);
  EXPECT_EQ(q.L, 1.0);
  const Potential pw = make_builtin_potential({"power", 2, {{"alpha", 0.25}}});
  EXPECT_EQ(pw.alpha, 0.25);
  EXPECT_NEAR(pw.L, std::pow(2.0, 0.75), 1e-15);
}

TEST(Registry, RejectsUnknownNamesAndParameters) {
  EXPECT_THROW(make_builtin_potential({"rosenbrock", 2, {}}), ParameterError);
  EXPECT_THROW(make_builtin_potential({"quadratic", 2, {{"curv", 1.0}}}), ParameterError);
  EXPECT_THROW(make_builtin_potential({"quadratic", 0, {}}), ParameterError);
  EXPECT_THROW(make_builtin_potential({"power", 2, {{"alpha", 1.5}}}), ParameterError);
  EXPECT_THROW(make_builtin_potential({"huber", 2, {{"delta", 0.0}}}), ParameterError);
}
