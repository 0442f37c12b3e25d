#pragma once

// Reference samplers for exp(-U(x) - (lambda/2)||x||^2) when U is a built-in potential.
// Gaussian targets are sampled directly; separable targets coordinate-wise and radial
// targets through the law of ||x||, both by inverting a finely tabulated CDF.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pgglmc/common.hpp"
#include "pgglmc/corpus.hpp"

namespace pgglmc {

/// Inverse-CDF sampler for an unnormalized 1-D log density on [lo, hi].
class TabulatedSampler {
 public:
  TabulatedSampler(const std::function<double(double)>& log_density, double lo, double hi,
                   std::size_t cells = 1 << 16)
      : lo_(lo), step_((hi - lo) / static_cast<double>(cells)), cdf_(cells + 1, 0.0) {
    require(hi > lo && cells >= 2, "TabulatedSampler: invalid support");
    std::vector<double> logf(cells + 1);
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i <= cells; ++i) {
      logf[i] = log_density(lo + step_ * static_cast<double>(i));
      peak = std::max(peak, logf[i]);
    }
    std::vector<double> f(cells + 1);
    for (std::size_t i = 0; i <= cells; ++i) f[i] = std::exp(logf[i] - peak);
    // Simpson on each cell using its midpoint for a third-order accurate mass.
    CompensatedSum mass, first, second;
    for (std::size_t i = 0; i < cells; ++i) {
      const double x0 = lo + step_ * static_cast<double>(i);
      const double xm = x0 + 0.5 * step_;
      const double fm = std::exp(log_density(xm) - peak);
      const double cell = step_ / 6.0 * (f[i] + 4.0 * fm + f[i + 1]);
      mass.add(cell);
      cdf_[i + 1] = mass.value();
      first.add(step_ / 6.0 * (x0 * f[i] + 4.0 * xm * fm + (x0 + step_) * f[i + 1]));
      second.add(step_ / 6.0 * (x0 * x0 * f[i] + 4.0 * xm * xm * fm + (x0 + step_) * (x0 + step_) * f[i + 1]));
    }
    const double total = mass.value();
    for (double& c : cdf_) c /= total;
    mean_ = first.value() / total;
    second_moment_ = second.value() / total;
  }

  template <class Urbg>
  double operator()(Urbg& rng) const {
    std::uniform_real_distribution<double> unit;
    const double u = unit(rng);
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const std::size_t i = std::min<std::size_t>(
        cdf_.size() - 2, static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - cdf_.begin())) - 1);
    const double span = cdf_[i + 1] - cdf_[i];
    const double frac = span > 0.0 ? (u - cdf_[i]) / span : 0.5;
    return lo_ + step_ * (static_cast<double>(i) + frac);
  }

  double mean() const noexcept { return mean_; }
  double second_moment() const noexcept { return second_moment_; }

 private:
  double lo_;
  double step_;
  std::vector<double> cdf_;
  double mean_ = 0.0;
  double second_moment_ = 0.0;
};

/// Exact (up to tabulation) sampler for a regularized built-in target.
class TargetLaw {
 public:
  enum class Kind { gaussian, separable, radial };

  static TargetLaw gaussian(std::size_t dim, double variance) {
    TargetLaw t(Kind::gaussian, dim);
    t.variance_ = variance;
    return t;
  }

  Kind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return dim_; }
  /// Per-coordinate variance for Gaussian targets.
  double gaussian_variance() const noexcept { return variance_; }

  /// E ||X||^2 under the target.
  double second_moment() const {
    switch (kind_) {
      case Kind::gaussian: return static_cast<double>(dim_) * variance_;
      case Kind::separable: return static_cast<double>(dim_) * table_->second_moment();
      case Kind::radial: return table_->second_moment();
    }
    return 0.0;
  }

  template <class Urbg>
  void draw(Urbg& rng, std::span<double> out) const {
    std::normal_distribution<double> normal;
    switch (kind_) {
      case Kind::gaussian: {
        const double sd = std::sqrt(variance_);
        for (double& v : out) v = sd * normal(rng);
        return;
      }
      case Kind::separable:
        for (double& v : out) v = (*table_)(rng);
        return;
      case Kind::radial: {
        double n = 0.0;
        do {
          for (double& v : out) v = normal(rng);
          n = norm2(out);
        } while (n == 0.0);
        const double r = (*table_)(rng);
        for (double& v : out) v *= r / n;
        return;
      }
    }
  }

  template <class Urbg>
  Matrix sample(std::size_t count, Urbg& rng) const {
    Matrix m(count, dim_);
    for (std::size_t i = 0; i < count; ++i) draw(rng, m.row(i));
    return m;
  }

  static TargetLaw separable(std::size_t dim, const std::function<double(double)>& log_density_1d, double half_width) {
    TargetLaw t(Kind::separable, dim);
    t.table_ = TabulatedSampler(log_density_1d, -half_width, half_width);
    return t;
  }

  static TargetLaw radial(std::size_t dim, const std::function<double(double)>& log_radial_potential, double radius) {
    TargetLaw t(Kind::radial, dim);
    const double dm1 = static_cast<double>(dim) - 1.0;
    t.table_ = TabulatedSampler(
        [&](double r) {
          if (r <= 0.0) return dim == 1 ? -log_radial_potential(0.0) : -std::numeric_limits<double>::infinity();
          return dm1 * std::log(r) - log_radial_potential(r);
        },
        0.0, radius);
    return t;
  }

 private:
  TargetLaw(Kind kind, std::size_t dim) : kind_(kind), dim_(dim) {}

  Kind kind_;
  std::size_t dim_;
  double variance_ = 0.0;
  std::optional<TabulatedSampler> table_;
};

namespace detail {
// Half-width beyond which a density with quadratic tail lambda t^2/2 has log-mass below -60.
inline double tail_width(double lambda) { return std::sqrt(120.0 / lambda) + 2.0; }
}  // namespace detail

/// Target law of the regularized built-in potential, or nullopt when it is not tabulated.
inline std::optional<TargetLaw> make_target_law(const PotentialSpec& spec, double lambda) {
  (void)make_builtin_potential(spec);  // validates name and parameters
  const std::size_t d = spec.dim;
  auto param = [&](const std::string& key) {
    const auto it = spec.params.find(key);
    return it != spec.params.end() ? it->second : builtin_potential_params().at(spec.name).at(key);
  };
  if (spec.name == "zero" || spec.name == "constant") {
    if (!(lambda > 0.0)) return std::nullopt;
    return TargetLaw::gaussian(d, 1.0 / lambda);
  }
  if (spec.name == "quadratic") {
    const double c = param("curvature") + lambda;
    return TargetLaw::gaussian(d, 1.0 / c);
  }
  if (!(lambda > 0.0)) return std::nullopt;
  const double width = detail::tail_width(lambda);
  if (spec.name == "l1")
    return TargetLaw::separable(d, [lambda](double t) { return -std::abs(t) - 0.5 * lambda * t * t; }, width);
  if (spec.name == "huber") {
    const double delta = param("delta");
    return TargetLaw::separable(
        d,
        [lambda, delta](double t) {
          const double a = std::abs(t);
          const double h = a <= delta ? 0.5 * t * t / delta : a - 0.5 * delta;
          return -h - 0.5 * lambda * t * t;
        },
        width);
  }
  if (spec.name == "power") {
    const double alpha = param("alpha");
    const double radius = width + std::sqrt(static_cast<double>(d) / lambda) * 2.0;
    return TargetLaw::radial(
        d, [alpha, lambda](double r) { return std::pow(r, 1.0 + alpha) / (1.0 + alpha) + 0.5 * lambda * r * r; },
        radius);
  }
  return std::nullopt;
}

}  // namespace pgglmc
