#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "pgglmc/corpus.hpp"
#include "pgglmc/lmc.hpp"
#include "pgglmc/target.hpp"

using namespace pgglmc;

namespace {

LmcConfig small_config(double eta, std::size_t steps, std::size_t chains, std::uint64_t seed) {
  LmcConfig c;
  c.eta = eta;
  c.steps = steps;
  c.chains = chains;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(LangevinUpdate, Arithmetic) {
  const Vector x{1.0, -2.0}, g{0.5, 1.0}, s{1.0, -1.0};
  const Vector next = langevin_update(x, g, 0.5, s);
  EXPECT_DOUBLE_EQ(next[0], 1.0 - 0.25 + 1.0);
  EXPECT_DOUBLE_EQ(next[1], -2.0 - 0.5 - 1.0);
}

TEST(LmcConfig, RejectsStepSizeAtOrAboveCap) {
  const auto pot = regularize(quadratic_potential(2), 1.0);
  const SmoothingConfig s{0.1, 4, {2.0, 2}};
  const double cap = max_step_size(pot, 0.1, 2.0);
  EXPECT_NEAR(cap, 2.0 / 3.0, 1e-15);
  EXPECT_THROW(small_config(cap, 10, 1, 0).validate(pot, s), StepSizeError);
  EXPECT_THROW(small_config(1.0, 10, 1, 0).validate(pot, s), StepSizeError);
  EXPECT_NO_THROW(small_config(std::nextafter(cap, 0.0), 10, 1, 0).validate(pot, s));
  EXPECT_THROW(small_config(0.0, 10, 1, 0).validate(pot, s), ParameterError);
  EXPECT_THROW(small_config(0.1, 10, 0, 0).validate(pot, s), ParameterError);
}

TEST(LmcConfig, ExactModeNeedsClosedForm) {
  const auto pot = regularize(power_potential(2, 0.5), 1.0);
  auto c = small_config(0.01, 10, 1, 0);
  c.gradient = GradientMode::exact;
  EXPECT_THROW(c.validate(pot, {0.1, 1, {2.0, 2}}), ParameterError);
}

TEST(RunChain, ZeroStepsReturnsInitialState) {
  const auto pot = regularize(l1_potential(2), 1.0);
  auto c = small_config(0.01, 0, 3, 5);
  c.init.mean = {1.5, -0.5};
  const auto res = run_chain(pot, {0.1, 2, {1.0, 2}}, c);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(res.final_states(i, 0), 1.5);
    EXPECT_EQ(res.final_states(i, 1), -0.5);
  }
  EXPECT_EQ(res.evals_total, 0U);
}

TEST(RunChain, DeterministicAcrossRunsAndThreadCounts) {
  const auto pot = regularize(power_potential(3, 0.5), 0.5);
  const SmoothingConfig s{0.2, 5, {1.5, 3}};
  auto c = small_config(0.05, 300, 13, 99);
  c.init = {InitKind::gaussian, {}, 2.0};
  const auto a = run_chain(pot, s, c);
  const auto b = run_chain(pot, s, c);
  c.threads = 4;
  const auto t = run_chain(pot, s, c);
  EXPECT_EQ(a.final_states, b.final_states);
  EXPECT_EQ(a.final_states, t.final_states);
  EXPECT_EQ(a.evals_total, t.evals_total);
  EXPECT_EQ(a.evals_total, 13U * 300U * 6U);
  c.seed = 100;
  EXPECT_NE(run_chain(pot, s, c).final_states, a.final_states);
}

TEST(RunChain, ChainsUseIndependentStreams) {
  const auto pot = regularize(l1_potential(1), 1.0);
  const auto res = run_chain(pot, {0.1, 2, {2.0, 1}}, small_config(0.05, 50, 4, 1));
  for (std::size_t i = 1; i < 4; ++i) EXPECT_NE(res.final_states(0, 0), res.final_states(i, 0));
}

TEST(RunChain, DivergenceIsReportedPerChain) {
  // The declared constant hides a curvature of 100, so eta = 0.5 passes the gate and explodes.
  Potential steep = quadratic_potential(2, 100.0);
  steep.L = 0.01;
  steep.smoothed_gradient = nullptr;
  const auto pot = regularize(steep, 0.1);
  auto c = small_config(0.5, 200, 3, 4);
  c.init.mean = {1.0, 1.0};
  const auto res = run_chain(pot, {0.01, 2, {2.0, 2}}, c);
  ASSERT_EQ(res.failures.size(), 3U);
  EXPECT_FALSE(res.ok());
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(res.failures[i].chain, i);
    EXPECT_GT(res.failures[i].step, 0U);
    EXPECT_TRUE(std::isnan(res.final_states(i, 0)));
  }
}

TEST(RunChain, EvaluationErrorStopsOnlyThatChain) {
  Potential holed = l1_potential(1);
  holed.value = [](std::span<const double> x) { return x[0] > 3.0 ? std::nan("") : std::abs(x[0]); };
  const auto pot = regularize(holed, 1.0);
  auto c = small_config(0.1, 200, 6, 8);
  c.init.mean = {2.9};
  const auto res = run_chain(pot, {0.2, 2, {2.0, 1}}, c);
  EXPECT_FALSE(res.failures.empty());
  for (const auto& f : res.failures) EXPECT_NE(f.message.find("not finite"), std::string::npos) << f.message;
}

TEST(RunChain, TrajectoryThinningAndMoments) {
  const auto pot = regularize(quadratic_potential(1), 1.0);
  auto c = small_config(0.1, 100, 2, 3);
  c.keep_trajectory = true;
  c.thinning = 10;
  c.burn_in = 40;
  const auto res = run_chain(pot, {0.1, 2, {2.0, 1}}, c);
  ASSERT_EQ(res.trajectories.size(), 2U);
  EXPECT_EQ(res.trajectory_steps.size(), 11U);
  EXPECT_EQ(res.trajectories[0].rows, 11U);
  EXPECT_EQ(res.trajectories[0](10, 0), res.final_states(0, 0));
  EXPECT_EQ(res.moments[0].count, 61U);
  EXPECT_EQ(small_config(0.1, 5000, 1, 0).effective_thinning(), 5U);
  EXPECT_EQ(small_config(0.1, 50, 1, 0).effective_thinning(), 1U);
}

TEST(RunChain, ExactModeCountsGradientCalls) {
  const auto pot = regularize(l1_potential(2), 1.0);
  auto c = small_config(0.01, 30, 2, 3);
  c.gradient = GradientMode::exact;
  const auto res = run_chain(pot, {0.1, 5, {1.0, 2}}, c);
  EXPECT_EQ(res.evals_total, 0U);
  EXPECT_EQ(res.gradient_evals, 60U);
  EXPECT_EQ(res.config_echo.gradient, GradientMode::exact);
  EXPECT_EQ(res.config_echo.seed, 3U);
}

TEST(RunChain, ExactOuStationaryVariance) {
  const auto pot = regularize(zero_potential(1), 2.0);
  auto c = small_config(0.05, 4000, 200, 17);
  c.gradient = GradientMode::exact;
  c.burn_in = 500;
  const auto res = run_chain(pot, {0.1, 1, {2.0, 1}}, c);
  RunningStats m2;
  for (const auto& m : res.moments) m2.add(m.second_moment[0]);
  EXPECT_NEAR(m2.mean(), discretized_ou_variance(2.0, 0.05), 4.0 * m2.std_error());
}

TEST(OuVariance, ClosedForm) {
  EXPECT_NEAR(discretized_ou_variance(1.0, 0.01), 1.0 / 0.995, 1e-15);
  EXPECT_NEAR(discretized_ou_variance(2.0, 0.5), 1.0, 1e-15);
}

TEST(Lemma3, GeneralAndSimplifiedForms) {
  const auto b = lemma3_w2_bound_from_a(0.05, 4, 0.5, 0.0);
  EXPECT_NEAR(b.w2_sq_general, 4.0 * 4.0 / 0.5 * (0.05 + std::expm1(0.05)), 1e-14);
  EXPECT_NEAR(b.w2_simplified, 3.0 * std::sqrt(4.0 * 0.05 / 0.5), 1e-14);
  EXPECT_TRUE(b.simplified_applicable);
  EXPECT_EQ(b.w2(), b.w2_simplified);
  // The simplified form dominates the general one where it applies.
  for (double a : {1e-6, 1e-3, 0.01, 0.05, 0.1}) {
    const auto l = lemma3_w2_bound_from_a(a, 3, 1.0, 0.0);
    EXPECT_GE(l.w2_simplified, l.w2_general);
  }
  EXPECT_FALSE(lemma3_w2_bound_from_a(0.2, 4, 0.5, 0.0).simplified_applicable);
  EXPECT_FALSE(lemma3_w2_bound_from_a(0.05, 4, 0.5, 1.0).simplified_applicable);
  EXPECT_THROW(lemma3_w2_bound_from_a(0.05, 4, 0.0, 0.0), UnsupportedParameter);
}

TEST(Theorem1, RejectsUnsupportedParameters) {
  const SmoothingConfig s{0.1, 4, {2.0, 2}};
  EXPECT_THROW(theorem1_bound(unregularized(l1_potential(2)), s, 0.01, 100, 1.0, 0.0, 0.0), UnsupportedParameter);
  const auto pot = regularize(quadratic_potential(2), 1.0);
  EXPECT_THROW(theorem1_bound(pot, s, 0.7, 100, 1.0, 0.0, 0.0), StepSizeError);
}

TEST(Theorem1, LambdaEtaAtLeastTwoIsGated) {
  // lambda eta >= 2 implies eta >= 2/lambda > 2/(M + 2 lambda).
  const auto pot = regularize(constant_potential(1), 4.0);
  EXPECT_THROW(theorem1_bound(pot, {0.1, 1, {2.0, 1}}, 0.5, 10, 1.0, 0.0, 0.0), StepSizeError);
}

TEST(Theorem1, TermsFollowTheirScalings) {
  const auto pot = regularize(power_potential(3, 0.5), 0.5);
  const auto t1 = theorem1_bound(pot, {0.1, 4, {1.5, 3}}, 0.01, 1000, 2.0, 0.0, 0.0);
  const auto t4 = theorem1_bound(pot, {0.1, 16, {1.5, 3}}, 0.01, 1000, 2.0, 0.0, 0.0);
  EXPECT_NEAR(t4.terms[4].value / t1.terms[4].value, 0.5, 1e-14);
  EXPECT_NEAR(t4.terms[5].value / t1.terms[5].value, 0.5, 1e-14);
  EXPECT_EQ(t4.terms[1].value, t1.terms[1].value);
  EXPECT_EQ(t1.terms[6].value, 0.0);

  const auto longer = theorem1_bound(pot, {0.1, 4, {1.5, 3}}, 0.01, 4000, 2.0, 0.0, 0.0);
  EXPECT_LT(longer.terms[0].value, t1.terms[0].value);
  EXPECT_NEAR(t1.terms[0].value, std::pow(1.0 - 0.0025, 500.0) * 2.0, 1e-14);
  EXPECT_LE(t1.w2_mixing_proof_form, t1.w2_mixing);

  double sum = 0.0;
  for (const auto& t : t1.terms) sum += t.value;
  EXPECT_DOUBLE_EQ(sum, t1.w2_mixing);

  const auto withC = theorem1_bound(pot, {0.1, 4, {1.5, 3}}, 0.01, 1000, 2.0, 0.0, 0.1);
  EXPECT_NEAR(withC.terms[6].value, 0.1 * 0.5 * std::pow(3.0 * std::log(3.0), 4.0), 1e-12);
}

TEST(Theorem1, SmoothingScaleDecreasesWithMu) {
  const auto pot = regularize(l1_potential(4), 1.0);
  double prev = std::numeric_limits<double>::infinity();
  for (double mu : {0.1, 0.01, 0.001}) {
    const auto t = theorem1_bound(pot, {mu, 1, {2.0, 4}}, 0.9 * max_step_size(pot, mu, 2.0), 10, 1.0, 0.0, 0.0);
    EXPECT_LT(t.a, prev);
    prev = t.a;
  }
}

TEST(TargetLaw, GaussianCases) {
  const auto z = make_target_law({"zero", 3, {}}, 2.0);
  ASSERT_TRUE(z);
  EXPECT_EQ(z->kind(), TargetLaw::Kind::gaussian);
  EXPECT_DOUBLE_EQ(z->gaussian_variance(), 0.5);
  const auto q = make_target_law({"quadratic", 2, {{"curvature", 3.0}}}, 1.0);
  EXPECT_DOUBLE_EQ(q->gaussian_variance(), 0.25);
  EXPECT_DOUBLE_EQ(q->second_moment(), 0.5);
}

TEST(TargetLaw, TabulatedMomentsMatchQuadrature) {
  using Q = boost::math::quadrature::gauss_kronrod<double, 61>;
  const double inf = std::numeric_limits<double>::infinity();
  const double lambda = 0.5;
  auto f = [&](double t) { return std::exp(-std::abs(t) - 0.5 * lambda * t * t); };
  const double mass = 2.0 * Q::integrate(f, 0.0, inf, 15, 1e-14);
  const double m2 = 2.0 * Q::integrate([&](double t) { return t * t * f(t); }, 0.0, inf, 15, 1e-14) / mass;
  const auto law = make_target_law({"l1", 3, {}}, lambda);
  ASSERT_TRUE(law);
  EXPECT_NEAR(law->second_moment(), 3.0 * m2, 1e-7);

  Rng rng(4);
  const Matrix s = law->sample(100000, rng);
  RunningStats r2;
  for (std::size_t i = 0; i < s.rows; ++i) r2.add(squared_norm(s.row(i)));
  EXPECT_NEAR(r2.mean(), 3.0 * m2, 4.0 * r2.std_error());
}

TEST(TargetLaw, RadialPowerTargetMoment) {
  // d = 2, alpha = 1, lambda = 1: U-bar = ||x||^2, a Gaussian with variance 1/2 per coordinate.
  const auto law = make_target_law({"power", 2, {{"alpha", 1.0}}}, 1.0);
  ASSERT_TRUE(law);
  EXPECT_EQ(law->kind(), TargetLaw::Kind::radial);
  EXPECT_NEAR(law->second_moment(), 1.0, 1e-7);
  Rng rng(6);
  const Matrix s = law->sample(100000, rng);
  RunningStats x0;
  for (std::size_t i = 0; i < s.rows; ++i) x0.add(s(i, 0) * s(i, 0));
  EXPECT_NEAR(x0.mean(), 0.5, 4.0 * x0.std_error());
}
