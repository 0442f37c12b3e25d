#pragma once

// p-generalized Gaussian law N_p(0, I_d): i.i.d. coordinates with density
// exp(-|x|^p / p) / kappa_1, restricted to 1 <= p <= 2.

#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <string>

#include "pgglmc/common.hpp"

namespace pgglmc {

struct PggSpec {
  double p = 2.0;
  std::size_t d = 1;

  void validate() const {
    require(std::isfinite(p) && p >= 1.0 && p <= 2.0,
            "pgg: shape p must lie in [1, 2], got " + std::to_string(p));
    require(d >= 1, "pgg: dimension d must be at least 1");
  }
};

/// Exact coordinate sampler. |X|^p ~ Gamma(shape 1/p, scale p), sign uniform.
/// p = 2 (standard normal) and p = 1 (Laplace) use their direct samplers.
class PggSampler {
 public:
  explicit PggSampler(PggSpec spec) : spec_(spec), gamma_(1.0 / spec.p, spec.p) {
    spec_.validate();
    inv_p_ = 1.0 / spec_.p;
  }

  const PggSpec& spec() const noexcept { return spec_; }

  template <class Urbg>
  double draw_coordinate(Urbg& rng) {
    if (spec_.p == 2.0) return normal_(rng);
    const double magnitude = spec_.p == 1.0 ? exponential_(rng) : std::pow(gamma_(rng), inv_p_);
    return (rng() & 1U) ? magnitude : -magnitude;
  }

  template <class Urbg>
  void draw(Urbg& rng, std::span<double> out) {
    for (double& v : out) v = draw_coordinate(rng);
  }

  template <class Urbg>
  Vector draw(Urbg& rng) {
    Vector out(spec_.d);
    draw(rng, out);
    return out;
  }

 private:
  PggSpec spec_;
  std::gamma_distribution<double> gamma_;
  std::normal_distribution<double> normal_;
  std::exponential_distribution<double> exponential_;
  double inv_p_ = 0.5;
};

template <class Urbg>
Vector sample_pgg(const PggSpec& spec, Urbg& rng) {
  PggSampler sampler(spec);
  return sampler.draw(rng);
}

inline double log_kappa(const PggSpec& spec) {
  spec.validate();
  const double d = static_cast<double>(spec.d);
  const double p = spec.p;
  return d * std::numbers::ln2 + d * std::lgamma(1.0 / p) - (d - d / p) * std::log(p);
}

/// Normalizer of exp(-||x||_p^p / p) over R^d: 2^d Gamma(1/p)^d / p^(d - d/p).
inline double kappa(const PggSpec& spec) { return std::exp(log_kappa(spec)); }

inline double p_norm_pow_p(std::span<const double> x, double p) {
  double s = 0.0;
  for (double v : x) s += std::pow(std::abs(v), p);
  return s;
}

inline double log_density(const PggSpec& spec, std::span<const double> x) {
  spec.validate();
  require(x.size() == spec.d, "pgg: log_density dimension mismatch (expected " +
                                  std::to_string(spec.d) + ", got " + std::to_string(x.size()) + ")");
  return -p_norm_pow_p(x, spec.p) / spec.p - log_kappa(spec);
}

/// E ||xi||_p^n = p^(n/p) Gamma((d+n)/p) / Gamma(d/p), evaluated in log space.
inline double pgg_norm_moment(const PggSpec& spec, double n) {
  spec.validate();
  require(std::isfinite(n) && n > 0.0, "pgg: moment order n must be positive");
  const double d = static_cast<double>(spec.d);
  const double p = spec.p;
  return std::exp((n / p) * std::log(p) + std::lgamma((d + n) / p) - std::lgamma(d / p));
}

/// The same moment for n = k p, as the rising product p^k (d/p)(d/p+1)...(d/p+k-1).
inline double pgg_norm_moment_rising(const PggSpec& spec, unsigned k) {
  spec.validate();
  const double a = static_cast<double>(spec.d) / spec.p;
  double product = 1.0;
  for (unsigned i = 0; i < k; ++i) product *= spec.p * (a + i);
  return product;
}

struct SqNormMoment {
  double bound = 0.0;  // (d+1)^(2/p)
  double exact = 0.0;  // d p^(2/p) Gamma(3/p) / Gamma(1/p)
};

inline SqNormMoment pgg_sq_norm_moment_bound(const PggSpec& spec) {
  spec.validate();
  const double d = static_cast<double>(spec.d);
  const double p = spec.p;
  SqNormMoment out;
  out.bound = std::pow(d + 1.0, 2.0 / p);
  out.exact = d * std::exp((2.0 / p) * std::log(p) + std::lgamma(3.0 / p) - std::lgamma(1.0 / p));
  return out;
}

/// Envelope [d^floor(n/p), (d + n/2)^(n/p)] around E ||xi||_p^n. Used only as a sanity check.
struct MomentEnvelope {
  double lower = 0.0;
  double upper = 0.0;
};

inline MomentEnvelope pgg_norm_moment_envelope(const PggSpec& spec, double n) {
  spec.validate();
  require(n > 0.0, "pgg: moment order n must be positive");
  const double d = static_cast<double>(spec.d);
  return {std::pow(d, std::floor(n / spec.p)), std::pow(d + n / 2.0, n / spec.p)};
}

}  // namespace pgglmc
