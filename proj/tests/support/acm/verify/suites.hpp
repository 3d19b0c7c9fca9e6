#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "acm/params.hpp"

// Randomized oracle suites shared by the unit tests, the acceptance binary
// and `acm_sim selftest`.
namespace acm::verify {

struct SuiteResult {
  std::string name;
  bool pass = false;
  double seconds = 0.0;
  std::vector<std::pair<std::string, double>> metrics;
  std::string detail;

  double metric(const std::string& key) const;
};

// Arm Jacobians vs central differences, closed-form arc vs integrated tangent
// field, full 6x8 Jacobian vs FD twist, continuity across the curvature clamp.
SuiteResult kinematic_suite(int samples, std::uint64_t seed, const AcmParams& params = {});

// Symmetry and definiteness of M, M vs the polarized kinetic energy, the
// Mdot - 2C skew property and G vs the FD gradient of U.
SuiteResult dynamics_suite(int samples, std::uint64_t seed, const AcmParams& params = {});

// Closed forms of the two coupling entries: O(kappa) decay of M18,
// quadratic vanishing of both near the arm base, and the logged deviation of
// the printed formulas from the quadrature integrand.
SuiteResult coupling_entry_suite(const AcmParams& params = {});

// Test B free fall at dt = 1e-4 over 1 s in both models: relative energy
// drift, and the observed RK4 order from terminal-state errors against a
// dt / 16 reference.
SuiteResult conservation_suite(const AcmParams& params = {});

// Terminal Test C tip gap between the models with rho scaled by 1, 1e-1,
// 1e-2 and 1e-3: decreasing, and below 1e-5 m at the smallest scale.
SuiteResult coupling_limit_suite(const AcmParams& params = {}, int jobs = 1);

// Tests A to D: translational NRMSE largest for C, rotational largest for A,
// all gaps nonzero.
SuiteResult open_loop_ordering_suite(const AcmParams& params = {}, int jobs = 1);

// Per-axis sweep outcomes with the default value sets.
struct AxisOutcome {
  std::string axis;
  std::vector<double> values;
  std::vector<double> displacement;  // coupled tip displacement per value [m]
  std::vector<double> gap;           // coupled/decoupled tip gap per value [m]
  double spread = 0.0;               // max - min of gap
};
std::vector<AxisOutcome> sweep_outcomes(const AcmParams& params = {}, int jobs = 1);

// Displacement falls with r_a and m_u, the E axis has the smallest gap
// spread, the gap grows with kappa0 and with the initial roll.
SuiteResult sweep_direction_suite(const AcmParams& params = {}, int jobs = 1);

// Interaction matrix against finite pose displacements, static-target
// convergence below 1 px, and V never rising outside the bound set.
SuiteResult ibvs_suite(std::uint64_t seed, const AcmParams& params = {}, int jobs = 1);

// M, R, A and L in both models: no feature loss, max |DS| < 0.7 px, and the
// largest DS peaks at corners or top-decile curvature.
SuiteResult letter_suite(const AcmParams& params = {}, int jobs = 1);

// Median per-step cost over 1e4 Test B steps per model; the decoupled model
// must be cheaper.
SuiteResult performance_suite(const AcmParams& params = {});

}  // namespace acm::verify
