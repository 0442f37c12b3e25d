#pragma once

// Built-in convex test potentials and randomized certification of their declared
// Hölder constants.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "pgglmc/potential.hpp"

namespace pgglmc {

inline Potential constant_potential(std::size_t dim, double c = 0.0) {
  Potential pot;
  pot.name = "constant";
  pot.dim = dim;
  pot.L = 0.0;
  pot.alpha = 1.0;
  pot.value = [c](std::span<const double>) { return c; };
  pot.subgradient = [](std::span<const double>, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
  };
  pot.smoothed_gradient = [](std::span<const double>, double, double, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
  };
  return pot;
}

inline Potential zero_potential(std::size_t dim) {
  Potential pot = constant_potential(dim, 0.0);
  pot.name = "zero";
  return pot;
}

/// (c/2) ||x||^2. Smoothing by any centered law leaves the gradient unchanged.
inline Potential quadratic_potential(std::size_t dim, double curvature = 1.0) {
  require(curvature > 0.0, "quadratic: curvature must be positive");
  Potential pot;
  pot.name = "quadratic";
  pot.dim = dim;
  pot.L = curvature;
  pot.alpha = 1.0;
  pot.value = [curvature](std::span<const double> x) { return 0.5 * curvature * squared_norm(x); };
  pot.subgradient = [curvature](std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = curvature * x[i];
  };
  pot.smoothed_gradient = [curvature](std::span<const double> x, double, double, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = curvature * x[i];
  };
  return pot;
}

/// ||x||^(1+alpha) / (1+alpha), gradient ||x||^(alpha-1) x. The map x -> |x|^(alpha-1) x is
/// (2^(1-alpha), alpha)-Hölder, attained at antipodal pairs.
inline Potential power_potential(std::size_t dim, double alpha) {
  require(alpha >= 0.0 && alpha <= 1.0, "power: alpha must lie in [0, 1]");
  Potential pot;
  pot.name = "power";
  pot.dim = dim;
  pot.L = std::pow(2.0, 1.0 - alpha);
  pot.alpha = alpha;
  pot.value = [alpha](std::span<const double> x) {
    return std::pow(norm2(x), 1.0 + alpha) / (1.0 + alpha);
  };
  pot.subgradient = [alpha](std::span<const double> x, std::span<double> out) {
    const double r = norm2(x);
    const double scale = r > 0.0 ? std::pow(r, alpha - 1.0) : 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = scale * x[i];
  };
  return pot;
}

/// ||x||_1 with subgradient sign(x) (0 at kinks). Declared L = 2 sqrt(d), alpha = 0.
///
/// The smoothed gradient is separable: d/dx E|x + mu xi| = P(xi > -x/mu) - P(xi < -x/mu)
/// = sign(t) P(1/p, |t|^p / p) with t = x/mu and P the regularized lower incomplete gamma.
inline Potential l1_potential(std::size_t dim) {
  Potential pot;
  pot.name = "l1";
  pot.dim = dim;
  pot.L = 2.0 * std::sqrt(static_cast<double>(dim));
  pot.alpha = 0.0;
  pot.value = [](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += std::abs(v);
    return s;
  };
  pot.subgradient = [](std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
  };
  pot.smoothed_gradient = [](std::span<const double> x, double mu, double p, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double t = x[i] / mu;
      if (t == 0.0) {
        out[i] = 0.0;
        continue;
      }
      const double mass = boost::math::gamma_p(1.0 / p, std::pow(std::abs(t), p) / p);
      out[i] = t > 0.0 ? mass : -mass;
    }
  };
  return pot;
}

/// Sum of Huber functions: t^2/(2 delta) for |t| <= delta, |t| - delta/2 beyond. (1/delta, 1)-smooth.
inline Potential huber_potential(std::size_t dim, double delta = 1.0) {
  require(delta > 0.0, "huber: delta must be positive");
  Potential pot;
  pot.name = "huber";
  pot.dim = dim;
  pot.L = 1.0 / delta;
  pot.alpha = 1.0;
  pot.value = [delta](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) {
      const double a = std::abs(v);
      s += a <= delta ? 0.5 * v * v / delta : a - 0.5 * delta;
    }
    return s;
  };
  pot.subgradient = [delta](std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::clamp(x[i] / delta, -1.0, 1.0);
  };
  return pot;
}

/// Registry entry: key, parameter defaults, and factory.
struct PotentialSpec {
  std::string name;
  std::size_t dim = 1;
  std::map<std::string, double> params;
};

inline const std::map<std::string, std::map<std::string, double>>& builtin_potential_params() {
  static const std::map<std::string, std::map<std::string, double>> table{
      {"zero", {}},
      {"constant", {{"c", 0.0}}},
      {"quadratic", {{"curvature", 1.0}}},
      {"power", {{"alpha", 0.5}}},
      {"l1", {}},
      {"huber", {{"delta", 1.0}}},
  };
  return table;
}

inline std::vector<std::string> builtin_potential_names() {
  std::vector<std::string> names;
  for (const auto& [name, params] : builtin_potential_params()) names.push_back(name);
  return names;
}

inline Potential make_builtin_potential(const PotentialSpec& spec) {
  const auto& table = builtin_potential_params();
  const auto entry = table.find(spec.name);
  if (entry == table.end()) throw ParameterError("unknown potential '" + spec.name + "'");
  require(spec.dim >= 1, "potential dimension must be at least 1");
  std::map<std::string, double> params = entry->second;
  for (const auto& [key, v] : spec.params) {
    if (!params.contains(key))
      throw ParameterError("potential '" + spec.name + "' has no parameter '" + key + "'");
    params[key] = v;
  }
  const std::size_t d = spec.dim;
  if (spec.name == "zero") return zero_potential(d);
  if (spec.name == "constant") return constant_potential(d, params.at("c"));
  if (spec.name == "quadratic") return quadratic_potential(d, params.at("curvature"));
  if (spec.name == "power") return power_potential(d, params.at("alpha"));
  if (spec.name == "l1") return l1_potential(d);
  return huber_potential(d, params.at("delta"));
}

struct CertificationReport {
  std::size_t pairs = 0;
  bool checked = false;  // false when the potential has no subgradient
  std::size_t holder_violations = 0;
  std::size_t convexity_violations = 0;
  std::size_t descent_violations = 0;
  double worst_holder_ratio = 0.0;  // max ||dg|| / ||dx||^alpha over sampled pairs

  bool passed() const noexcept {
    return !checked || (holder_violations == 0 && convexity_violations == 0 && descent_violations == 0);
  }
};

namespace detail {

template <class Urbg>
void random_pair(Urbg& rng, std::size_t d, double max_gap, Vector& x, Vector& y) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;
  const double scale = std::pow(10.0, -2.0 + 3.0 * unit(rng));
  for (double& v : x) v = scale * normal(rng);
  const double kind = unit(rng);
  if (kind < 0.15) {
    // antipodal pairs are the extremal case for radial potentials
    const double n = norm2(x);
    const double target = max_gap * unit(rng) / 2.0;
    for (std::size_t i = 0; i < d; ++i) {
      x[i] = n > 0.0 ? x[i] * target / n : target;
      y[i] = -x[i];
    }
    return;
  }
  Vector dir(d);
  for (double& v : dir) v = normal(rng);
  const double n = norm2(dir);
  const double gap = max_gap * std::pow(unit(rng), 2.0);
  for (std::size_t i = 0; i < d; ++i) y[i] = x[i] + gap * dir[i] / n;
}

}  // namespace detail

/// Spot-check convexity, the Hölder bound, and the descent inequality
/// U(y) <= U(x) + <g(x), y-x> + L ||y-x||^(1+alpha) / (1+alpha) on random pairs with ||x-y|| <= max_gap.
template <class Urbg>
CertificationReport certify(const Potential& pot, Urbg& rng, std::size_t pairs = 1000, double max_gap = 10.0) {
  CertificationReport report;
  report.pairs = pairs;
  if (!pot.has_subgradient()) return report;
  report.checked = true;
  const std::size_t d = pot.dim;
  Vector x(d), y(d), gx(d), gy(d), diff(d), gdiff(d);
  for (std::size_t k = 0; k < pairs; ++k) {
    detail::random_pair(rng, d, max_gap, x, y);
    pot.subgradient(x, gx);
    pot.subgradient(y, gy);
    for (std::size_t i = 0; i < d; ++i) {
      diff[i] = y[i] - x[i];
      gdiff[i] = gy[i] - gx[i];
    }
    const double r = norm2(diff);
    if (r == 0.0) continue;
    const double ux = pot.value(x);
    const double uy = pot.value(y);
    const double slack = 1e-9 * (1.0 + std::abs(ux) + std::abs(uy));
    const double lhs = norm2(gdiff);
    const double rhs = pot.L * std::pow(r, pot.alpha);
    report.worst_holder_ratio = std::max(report.worst_holder_ratio, lhs / std::pow(r, pot.alpha));
    if (lhs > rhs * (1.0 + 1e-9) + 1e-12) ++report.holder_violations;
    const double linear = ux + dot(gx, diff);
    if (uy < linear - slack) ++report.convexity_violations;
    if (uy > linear + pot.L * std::pow(r, 1.0 + pot.alpha) / (1.0 + pot.alpha) + slack)
      ++report.descent_violations;
  }
  return report;
}

}  // namespace pgglmc
