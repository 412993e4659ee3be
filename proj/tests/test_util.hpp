#pragma once

#include <random>
#include <vector>

#include "otk/core.hpp"
#include "otk/io.hpp"
#include "otk/linear_ot.hpp"
#include "otk/polytope.hpp"

// Shared generators for randomized tests. Everything is seeded explicitly.

namespace otk::testutil {

inline Matrix random_matrix(int n, int m, std::mt19937& rng, double lo = 0.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix c(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) c(i, j) = dist(rng);
  return c;
}

inline CostMatrix random_symmetric_cost(int n, std::mt19937& rng,
                                        double lo = 0.0, double hi = 1.0) {
  Matrix c = random_matrix(n, n, rng, lo, hi);
  Matrix s = 0.5 * (c + c.transpose());
  s.diagonal().setZero();
  return CostMatrix(std::move(s), true);
}

inline Histogram random_histogram(int n, std::mt19937& rng) {
  std::uniform_real_distribution<double> dist(0.05, 1.0);
  Vector w(n);
  for (int i = 0; i < n; ++i) w(i) = dist(rng);
  return make_histogram(w);
}

/// Random point cloud in [0,1]^d.
inline PointCloud random_cloud(int n, int d, std::mt19937& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  PointCloud cloud;
  for (int i = 0; i < n; ++i) {
    Vector p(d);
    for (int k = 0; k < d; ++k) p(k) = dist(rng);
    cloud.points.push_back(std::move(p));
  }
  return cloud;
}

/// Squared-Euclidean cost of a random cloud; always CND.
inline CostMatrix random_sqdist_cost(int n, int d, std::mt19937& rng) {
  return pairwise_sqdist(random_cloud(n, d, rng));
}

/// Interior coupling with exact marginals: convex mix of random vertices.
inline Coupling random_coupling(const Histogram& a, const Histogram& b,
                                std::mt19937& rng, int mixes = 4) {
  std::uniform_real_distribution<double> dist(0.1, 1.0);
  Matrix acc = Matrix::Zero(a.size(), b.size());
  double total = 0.0;
  for (int t = 0; t < mixes; ++t) {
    const double w = dist(rng);
    acc += w * random_vertex(a, b, rng).matrix();
    total += w;
  }
  return Coupling(acc / total, a, b);
}

/// Brute-force quadruple sum, the independent oracle for objectives.
inline double quadruple_sum_objective(const QuadTensor& l, const Matrix& p) {
  double total = 0.0;
  for (int i = 0; i < l.n(); ++i)
    for (int j = 0; j < l.m(); ++j)
      for (int k = 0; k < l.n(); ++k)
        for (int ll = 0; ll < l.m(); ++ll)
          total += l.at(i, j, k, ll) * p(i, j) * p(k, ll);
  return total;
}

}  // namespace otk::testutil
