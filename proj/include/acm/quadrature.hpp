#pragma once

#include <vector>

namespace acm {

// Gauss-Legendre rule on [-1, 1].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// n-point rule; nodes ascending. Exact for polynomials up to degree 2n - 1.
QuadratureRule gauss_legendre(int n);

// Cached rule for repeated use from the dynamics assembly. The cache is
// per-thread, so concurrent sweeps never contend on it.
const QuadratureRule& cached_gauss_legendre(int n);

}  // namespace acm
