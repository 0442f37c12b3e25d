#pragma once

// Empirical 2-Wasserstein distances between equal-weight sample sets.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "pgglmc/common.hpp"

namespace pgglmc {

inline constexpr std::size_t kMaxAssignmentSize = 2048;

/// N points in R^d with uniform weights.
class SampleSet {
 public:
  SampleSet() = default;
  explicit SampleSet(Matrix points) : points_(std::move(points)) {
    require(points_.rows >= 1, "SampleSet: need at least one point");
    require(points_.cols >= 1, "SampleSet: dimension must be at least 1");
    require(all_finite(points_.data), "SampleSet: all entries must be finite");
  }

  static SampleSet from_scalars(const std::vector<double>& values) {
    Matrix m(values.size(), 1);
    m.data = values;
    return SampleSet(std::move(m));
  }

  std::size_t size() const noexcept { return points_.rows; }
  std::size_t dim() const noexcept { return points_.cols; }
  std::span<const double> point(std::size_t i) const { return points_.row(i); }
  const Matrix& points() const noexcept { return points_; }

 private:
  Matrix points_;
};

/// Exact W2 between equal-size 1-D empirical measures: sorted matching.
inline double w2_exact_1d(std::vector<double> a, std::vector<double> b) {
  require(a.size() == b.size(), "w2_exact_1d: sample sizes differ");
  require(!a.empty(), "w2_exact_1d: empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CompensatedSum s;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    s.add(t * t);
  }
  return std::sqrt(std::max(0.0, s.value()) / static_cast<double>(a.size()));
}

inline double w2_exact_1d(const SampleSet& a, const SampleSet& b) {
  require(a.dim() == 1 && b.dim() == 1, "w2_exact_1d: samples must be one-dimensional");
  return w2_exact_1d(a.points().data, b.points().data);
}

/// Squared Euclidean cost matrix, row-major N x N, each entry summed with compensation.
inline Matrix squared_distance_costs(const SampleSet& a, const SampleSet& b) {
  require(a.dim() == b.dim(), "cost matrix: dimensions differ");
  Matrix cost(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto x = a.point(i);
    for (std::size_t j = 0; j < b.size(); ++j) {
      const auto y = b.point(j);
      CompensatedSum s;
      for (std::size_t k = 0; k < x.size(); ++k) {
        const double t = x[k] - y[k];
        s.add(t * t);
      }
      cost(i, j) = s.value();
    }
  }
  return cost;
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method with potentials, O(N^3)).
/// Returns assignment[row] = column.
inline std::vector<std::size_t> solve_assignment(const Matrix& cost) {
  require(cost.rows == cost.cols, "solve_assignment: cost matrix must be square");
  const std::size_t n = cost.rows;
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      const double* row = cost.data.data() + (i0 - 1) * n;
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = row[j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[match[j] - 1] = j - 1;
  return assignment;
}

/// Mean cost of a matching, compensated.
inline double assignment_mean_cost(const Matrix& cost, const std::vector<std::size_t>& assignment) {
  CompensatedSum s;
  for (std::size_t i = 0; i < assignment.size(); ++i) s.add(cost(i, assignment[i]));
  return s.value() / static_cast<double>(assignment.size());
}

/// Exact W2 between equal-size empirical measures via optimal assignment (N <= 2048).
inline double w2_exact_assignment(const SampleSet& a, const SampleSet& b) {
  require(a.size() == b.size(), "w2_exact_assignment: sample sizes differ (resample to equal size first)");
  require(a.dim() == b.dim(), "w2_exact_assignment: dimensions differ");
  if (a.size() > kMaxAssignmentSize)
    throw ParameterError("w2_exact_assignment: N = " + std::to_string(a.size()) + " exceeds the cap of " +
                         std::to_string(kMaxAssignmentSize) + "; use w2_sliced for larger samples");
  const Matrix cost = squared_distance_costs(a, b);
  return std::sqrt(std::max(0.0, assignment_mean_cost(cost, solve_assignment(cost))));
}

/// Subsample `set` down to `size` points without replacement.
template <class Urbg>
SampleSet subsample(const SampleSet& set, std::size_t size, Urbg& rng) {
  require(size >= 1 && size <= set.size(), "subsample: invalid target size");
  std::vector<std::size_t> idx(set.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  Matrix m(size, set.dim());
  for (std::size_t i = 0; i < size; ++i) std::copy_n(set.point(idx[i]).begin(), set.dim(), m.row(i).begin());
  return SampleSet(std::move(m));
}

/// Exact W2 for unequal sizes: the larger set is subsampled to the smaller size with `rng`.
template <class Urbg>
double w2_exact_resampled(const SampleSet& a, const SampleSet& b, Urbg& rng) {
  if (a.size() == b.size()) return w2_exact_assignment(a, b);
  if (a.size() > b.size()) return w2_exact_assignment(subsample(a, b.size(), rng), b);
  return w2_exact_assignment(a, subsample(b, a.size(), rng));
}

/// Sliced W2: mean over random unit directions of the exact 1-D distance between projections.
/// A surrogate that never exceeds the exact distance; reported separately from it.
template <class Urbg>
double w2_sliced(const SampleSet& a, const SampleSet& b, std::size_t projections, Urbg& rng) {
  require(projections >= 1, "w2_sliced: need at least one projection");
  require(a.size() == b.size(), "w2_sliced: sample sizes differ");
  require(a.dim() == b.dim(), "w2_sliced: dimensions differ");
  const std::size_t d = a.dim();
  if (d == 1) return w2_exact_1d(a, b);
  std::normal_distribution<double> normal;
  Vector dir(d);
  std::vector<double> pa(a.size()), pb(b.size());
  CompensatedSum total;
  for (std::size_t k = 0; k < projections; ++k) {
    double n = 0.0;
    do {
      for (double& v : dir) v = normal(rng);
      n = norm2(dir);
    } while (n == 0.0);
    for (double& v : dir) v /= n;
    for (std::size_t i = 0; i < a.size(); ++i) {
      pa[i] = dot(a.point(i), dir);
      pb[i] = dot(b.point(i), dir);
    }
    total.add(w2_exact_1d(pa, pb));
  }
  return total.value() / static_cast<double>(projections);
}

struct ResampledDistance {
  double mean = 0.0;
  double spread = 0.0;  // sample standard deviation across resamples
  std::size_t sample_size = 0;
  std::vector<double> values;
};

/// Distance from `a` to N(0, variance I): R fresh equal-size reference samples drawn from a
/// stream seeded by `seed`, each compared by exact assignment.
inline ResampledDistance w2_to_gaussian(const SampleSet& a, double variance, std::size_t resamples,
                                        std::uint64_t seed) {
  require(std::isfinite(variance) && variance > 0.0, "w2_to_gaussian: variance must be positive");
  require(resamples >= 1, "w2_to_gaussian: need at least one resample");
  ResampledDistance out;
  out.sample_size = a.size();
  const double sd = std::sqrt(variance);
  RunningStats stats;
  for (std::size_t r = 0; r < resamples; ++r) {
    Rng rng = make_stream(seed, r);
    std::normal_distribution<double> normal;
    Matrix m(a.size(), a.dim());
    for (double& v : m.data) v = sd * normal(rng);
    const double w = w2_exact_assignment(a, SampleSet(std::move(m)));
    out.values.push_back(w);
    stats.add(w);
  }
  out.mean = stats.mean();
  out.spread = std::sqrt(stats.variance());
  return out;
}

}  // namespace pgglmc
