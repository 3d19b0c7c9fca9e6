#pragma once

// Internal: shared closed-form pieces of the constant-curvature arc.

#include <cmath>

namespace acm::detail {

inline constexpr double kSeriesThreshold = 1e-2;

// The closed forms divide by powers of x = kappa s; for small arguments the
// Taylor series avoids the cancellation in 1 - cos(x) and x cos(x) - sin(x).

// (1 - cos x) / x
inline double versine_ratio(double x) {
  if (std::abs(x) < kSeriesThreshold) {
    const double x2 = x * x;
    return x * (0.5 - x2 / 24.0 + x2 * x2 / 720.0 - x2 * x2 * x2 / 40320.0);
  }
  const double h = std::sin(0.5 * x);
  return 2.0 * h * h / x;
}

// sin x / x
inline double sinc(double x) {
  if (std::abs(x) < kSeriesThreshold) {
    const double x2 = x * x;
    return 1.0 - x2 / 6.0 + x2 * x2 / 120.0 - x2 * x2 * x2 / 5040.0;
  }
  return std::sin(x) / x;
}

// d/dx (1 - cos x) / x = (x sin x - (1 - cos x)) / x^2
inline double versine_ratio_prime(double x) {
  if (std::abs(x) < kSeriesThreshold) {
    const double x2 = x * x;
    return 0.5 - x2 / 8.0 + x2 * x2 / 144.0 - x2 * x2 * x2 / 5760.0;
  }
  const double h = std::sin(0.5 * x);
  return (x * std::sin(x) - 2.0 * h * h) / (x * x);
}

// d/dx sin x / x = (x cos x - sin x) / x^2
inline double sinc_prime(double x) {
  if (std::abs(x) < kSeriesThreshold) {
    const double x2 = x * x;
    return x * (-1.0 / 3.0 + x2 / 30.0 - x2 * x2 / 840.0 + x2 * x2 * x2 / 45360.0);
  }
  return (x * std::cos(x) - std::sin(x)) / (x * x);
}

// Position and translational Jacobian of the arc at one arc length, given the
// bending-plane direction (cos psi_a, sin psi_a).
struct ArcSample {
  double px, py, pz;           // F(s)
  double dk_x, dk_y, dk_z;     // dF/dkappa
  double dpsi_x, dpsi_y;       // dF/dpsi_a (z component is zero)
};

inline ArcSample sample_arc(double s, double kappa, double cpsi, double spsi) {
  const double x = kappa * s;
  const double radial = s * versine_ratio(x);
  const double d_radial = s * s * versine_ratio_prime(x);
  ArcSample a;
  a.px = radial * cpsi;
  a.py = radial * spsi;
  a.pz = s * sinc(x);
  a.dk_x = d_radial * cpsi;
  a.dk_y = d_radial * spsi;
  a.dk_z = s * s * sinc_prime(x);
  a.dpsi_x = -radial * spsi;
  a.dpsi_y = radial * cpsi;
  return a;
}

// The same arc as a function of the curvature vector (u, v) = kappa (cos psi_a,
// sin psi_a). With y = kappa^2 s^2 = r^2:
//   F = (s^2 a(y) u, s^2 a(y) v, s b(y)),  a = (1 - cos r) / r^2,  b = sin r / r,
// both even in r, so F is smooth through the straight arm.
inline constexpr double kSeriesThresholdSq = 4e-2;

inline double versine_quotient(double y) {
  if (y < kSeriesThresholdSq) return 0.5 - y / 24.0 + y * y / 720.0 - y * y * y / 40320.0 + y * y * y * y / 3628800.0;
  const double r = std::sqrt(y);
  const double h = std::sin(0.5 * r);
  return 2.0 * h * h / y;
}

inline double versine_quotient_prime(double y) {
  if (y < kSeriesThresholdSq) {
    return -1.0 / 24.0 + y / 360.0 - y * y / 13440.0 + y * y * y / 907200.0 - 5.0 * y * y * y * y / 479001600.0;
  }
  const double r = std::sqrt(y);
  const double h = std::sin(0.5 * r);
  return (r * std::sin(r) - 4.0 * h * h) / (2.0 * y * y);
}

inline double sinc_sq(double y) {
  if (y < kSeriesThresholdSq) return 1.0 - y / 6.0 + y * y / 120.0 - y * y * y / 5040.0 + y * y * y * y / 362880.0;
  const double r = std::sqrt(y);
  return std::sin(r) / r;
}

inline double sinc_sq_prime(double y) {
  if (y < kSeriesThresholdSq) {
    return -1.0 / 6.0 + y / 60.0 - y * y / 1680.0 + y * y * y / 90720.0 - 5.0 * y * y * y * y / 39916800.0;
  }
  const double r = std::sqrt(y);
  return (r * std::cos(r) - std::sin(r)) / (2.0 * y * r);
}

struct ArcSampleUV {
  double px, py, pz;
  double du_x, du_y, du_z;
  double dv_x, dv_y, dv_z;
};

inline ArcSampleUV sample_arc_uv(double s, double u, double v) {
  const double s2 = s * s;
  const double y = s2 * (u * u + v * v);
  const double a = versine_quotient(y), da = versine_quotient_prime(y);
  const double b = sinc_sq(y), db = sinc_sq_prime(y);
  const double s4 = s2 * s2;
  ArcSampleUV o;
  o.px = s2 * a * u;
  o.py = s2 * a * v;
  o.pz = s * b;
  o.du_x = s2 * a + 2.0 * s4 * da * u * u;
  o.du_y = 2.0 * s4 * da * u * v;
  o.du_z = 2.0 * s2 * s * db * u;
  o.dv_x = o.du_y;
  o.dv_y = s2 * a + 2.0 * s4 * da * v * v;
  o.dv_z = 2.0 * s2 * s * db * v;
  return o;
}

}  // namespace acm::detail
