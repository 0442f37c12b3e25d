#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include "pgglmc/common.hpp"

namespace pgglmc {

using ValueFn = std::function<double(std::span<const double>)>;
using GradientFn = std::function<void(std::span<const double> x, std::span<double> out)>;
/// Closed-form gradient of the smoothed potential U_mu at x for smoothing radius mu and shape p.
using SmoothedGradientFn =
    std::function<void(std::span<const double> x, double mu, double p, std::span<double> out)>;

/**
 * Black-box convex potential U with declared Hölder regularity
 * ||grad U(x) - grad U(y)|| <= L ||x - y||^alpha.
 *
 * Only `value` is needed for sampling. `subgradient` and `smoothed_gradient`
 * are optional and used by diagnostics and the exact-gradient ablation.
 */
struct Potential {
  std::string name;
  std::size_t dim = 1;
  double L = 1.0;
  double alpha = 1.0;
  ValueFn value;
  GradientFn subgradient;
  SmoothedGradientFn smoothed_gradient;

  void validate() const {
    require(dim >= 1, "potential '" + name + "': dimension must be at least 1");
    require(std::isfinite(L) && L >= 0.0, "potential '" + name + "': Hölder constant L must be >= 0");
    require(alpha >= 0.0 && alpha <= 1.0, "potential '" + name + "': Hölder exponent must lie in [0, 1]");
    require(static_cast<bool>(value), "potential '" + name + "': missing value function");
  }

  bool has_subgradient() const noexcept { return static_cast<bool>(subgradient); }
  bool has_smoothed_gradient() const noexcept { return static_cast<bool>(smoothed_gradient); }
};

/// U(x) + (lambda/2) ||x||^2. A lambda of zero is only reachable through `unregularized`.
class RegularizedPotential {
 public:
  const Potential& base() const noexcept { return base_; }
  double lambda() const noexcept { return lambda_; }
  std::size_t dim() const noexcept { return base_.dim; }
  double L() const noexcept { return base_.L; }
  double alpha() const noexcept { return base_.alpha; }

  double value(std::span<const double> x) const {
    return base_.value(x) + 0.5 * lambda_ * squared_norm(x);
  }

  bool has_subgradient() const noexcept { return base_.has_subgradient(); }
  bool has_smoothed_gradient() const noexcept { return base_.has_smoothed_gradient(); }

  void subgradient(std::span<const double> x, std::span<double> out) const {
    require(base_.has_subgradient(), "potential '" + base_.name + "' has no subgradient");
    base_.subgradient(x, out);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] += lambda_ * x[i];
  }

  Vector subgradient(std::span<const double> x) const {
    Vector g(x.size());
    subgradient(x, g);
    return g;
  }

  /// grad of the smoothed regularized potential: grad U_mu(x) + lambda x.
  void smoothed_gradient(std::span<const double> x, double mu, double p, std::span<double> out) const {
    require(base_.has_smoothed_gradient(),
            "potential '" + base_.name + "' has no closed-form smoothed gradient");
    base_.smoothed_gradient(x, mu, p, out);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] += lambda_ * x[i];
  }

  friend RegularizedPotential regularize(Potential base, double lambda);
  friend RegularizedPotential unregularized(Potential base);

 private:
  RegularizedPotential(Potential base, double lambda) : base_(std::move(base)), lambda_(lambda) {}

  Potential base_;
  double lambda_ = 0.0;
};

inline RegularizedPotential regularize(Potential base, double lambda) {
  base.validate();
  require(std::isfinite(lambda) && lambda > 0.0, "regularize: lambda must be positive");
  return RegularizedPotential(std::move(base), lambda);
}

/// lambda = 0 wrapper for diagnostics on the raw potential. Bounds that divide by lambda reject it.
inline RegularizedPotential unregularized(Potential base) {
  base.validate();
  return RegularizedPotential(std::move(base), 0.0);
}

namespace detail {
inline void require_mu(double mu) {
  require(std::isfinite(mu) && mu > 0.0, "smoothing radius mu must be positive");
}
}  // namespace detail

/// M = L d^((1-alpha)/p) / (mu^(1-alpha) (1+alpha)^(1-alpha)); U_mu-bar is (M + lambda)-smooth.
inline double smoothness_constant_M(const RegularizedPotential& pot, double mu, double p) {
  detail::require_mu(mu);
  const double d = static_cast<double>(pot.dim());
  const double a = pot.alpha();
  return pot.L() * std::pow(d, (1.0 - a) / p) / (std::pow(mu, 1.0 - a) * std::pow(1.0 + a, 1.0 - a));
}

/// a = L mu^(1+alpha) d^((1+alpha)/p) / (1+alpha) + (lambda/2) mu^2 (d+1)^(2/p).
inline double perturbation_scale_a(const RegularizedPotential& pot, double mu, double p) {
  detail::require_mu(mu);
  const double d = static_cast<double>(pot.dim());
  const double a = pot.alpha();
  return pot.L() * std::pow(mu, 1.0 + a) * std::pow(d, (1.0 + a) / p) / (1.0 + a) +
         0.5 * pot.lambda() * mu * mu * std::pow(d + 1.0, 2.0 / p);
}

/// Step sizes must satisfy eta < 2 / (M + 2 lambda).
inline double max_step_size(const RegularizedPotential& pot, double mu, double p) {
  return 2.0 / (smoothness_constant_M(pot, mu, p) + 2.0 * pot.lambda());
}

}  // namespace pgglmc
