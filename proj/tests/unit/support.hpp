#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "geattack/autodiff/dense_matrix.hpp"

namespace geattack::testing {

inline ad::DenseMatrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c,
                                     double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  ad::DenseMatrix m(r, c);
  for (double& v : m.values()) v = u(rng);
  return m;
}

/// Random symmetric {0,1} adjacency with zero diagonal.
inline ad::DenseMatrix random_adjacency(std::mt19937_64& rng, std::size_t n, double p = 0.4) {
  std::bernoulli_distribution edge(p);
  ad::DenseMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (edge(rng)) a(i, j) = a(j, i) = 1.0;
  return a;
}

inline bool approx_equal(const ad::DenseMatrix& a, const ad::DenseMatrix& b, double tol = 1e-12) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (std::abs(a.values()[k] - b.values()[k]) > tol) return false;
  return true;
}

}  // namespace geattack::testing
