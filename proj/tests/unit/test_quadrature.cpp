#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "acm/errors.hpp"
#include "acm/quadrature.hpp"

using acm::gauss_legendre;

TEST(Quadrature, WeightsSumToTwo) {
  for (int n : {1, 2, 5, 16, 33}) {
    const auto rule = gauss_legendre(n);
    EXPECT_NEAR(std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0), 2.0, 1e-13) << n;
  }
}

TEST(Quadrature, ExactForDegreeTwoNMinusOne) {
  const int n = 16;
  const auto rule = gauss_legendre(n);
  for (int k = 0; k <= 2 * n - 1; ++k) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += rule.weights[i] * std::pow(rule.nodes[i], k);
    const double exact = k % 2 ? 0.0 : 2.0 / (k + 1);
    EXPECT_NEAR(sum, exact, 1e-13) << "degree " << k;
  }
}

TEST(Quadrature, NodesAscendingAndSymmetric) {
  const auto rule = gauss_legendre(7);
  for (int i = 1; i < 7; ++i) EXPECT_LT(rule.nodes[i - 1], rule.nodes[i]);
  for (int i = 0; i < 7; ++i) EXPECT_NEAR(rule.nodes[i], -rule.nodes[6 - i], 1e-15);
  EXPECT_EQ(rule.nodes[3], 0.0);
}

TEST(Quadrature, SmoothTrigIntegrand) {
  const auto rule = gauss_legendre(16);
  double sum = 0.0;
  for (int i = 0; i < 16; ++i) sum += rule.weights[i] * std::cos(1.5 * rule.nodes[i]);
  EXPECT_NEAR(sum, 2.0 * std::sin(1.5) / 1.5, 1e-14);
}

TEST(Quadrature, RejectsNonPositiveOrder) { EXPECT_THROW(gauss_legendre(0), acm::ConfigError); }
