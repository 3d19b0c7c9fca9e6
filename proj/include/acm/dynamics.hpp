#pragma once

#include "acm/params.hpp"
#include "acm/types.hpp"

// Euler-Lagrange dynamics  M(q) q'' + C(q, q') q' + G(q) = tau - J_t^T F_e
// of a UAV carrying one constant-curvature arm.
//
// Kinetic energy: UAV translation and rotation plus the translational kinetic
// energy of the backbone, rho A / 2 * integral |p_s'|^2 ds (Gauss-Legendre).
// Potential energy: gravity of UAV and backbone plus bending energy
// E I_b l_a kappa^2 / 2. Spacer disks and rotary inertia of the cross
// section are not modelled.
//
// The decoupled model keeps only the UAV (6x6) and arm (2x2) diagonal blocks
// of M and C; its assembly skips the cross-block integrals altogether.
namespace acm::dynamics {

// Wrench (force, moment) the tip exerts on its environment, inertial frame.
// The robot itself feels -F_e, matching the sign in the equation of motion.
using ExternalWrench = Vec6;

struct DynamicsMatrices {
  Mat8 M = Mat8::Zero();
  Mat8 C = Mat8::Zero();
  Vec8 G = Vec8::Zero();
  ModelMode mode = ModelMode::kCoupled;
};

// Central-difference step used for dM/dq inside the Christoffel construction.
inline constexpr double kChristoffelStep = 1e-6;

// Condition-number ceiling for the forward-dynamics solve.
inline constexpr double kMaxCondition = 1e12;

// Integration coordinates. The arm uses the curvature vector
// w = kappa (cos psi_a, sin psi_a), which is smooth through the straight arm
// where the psi_a direction degenerates. With local_base the attitude entries
// z[3..5] are exponential coordinates d of R_B = R_ref Exp(d) and zdot[3..5]
// is J_r(d)^-1 times the body angular velocity; otherwise they are the ZYX
// angles and their rates. z = (x, y, z, attitude, w_1, w_2).
struct ChartState {
  bool local_base = true;
  Mat3 R_ref = Mat3::Identity();
  Vec8 z = Vec8::Zero();
  Vec8 zdot = Vec8::Zero();
};

// d w / d(kappa, psi_a).
Eigen::Matrix2d polar_chart_jacobian(double kappa, double psi_a);

// Local base chart centred on the current attitude unless
// params.paper_literal_te is set.
ChartState to_chart(const GeneralizedState& state, const AcmParams& params);

// Moves R_ref to the current attitude so that d = 0.
ChartState rebase(const ChartState& state);

Mat3 chart_attitude(const ChartState& state, const AcmParams& params);

// Inverse map. Euler angles and (kappa, psi_a) are both ambiguous; the
// representatives nearest those of `hint` are returned. Near gimbal lock the
// Euler rates are computed with |cos(pitch)| floored at 1e-6.
GeneralizedState from_chart(const ChartState& state, const GeneralizedState& hint, const AcmParams& params);

// Mass matrix in (kappa, psi_a). Its psi_a diagonal carries a constant floor
// rho A kappa_s^2 l_a^5 / 20 so that it stays invertible at kappa = 0; the
// kinetic energy below excludes it.
Mat8 mass_matrix(const GeneralizedState& state, const AcmParams& params, ModelMode mode);

// Christoffel-symbol Coriolis matrix: C_ij = sum_k Gamma_ijk qdot_k with
// Gamma_ijk = (dM_ij/dq_k + dM_ik/dq_j - dM_jk/dq_i) / 2.
Mat8 coriolis_matrix(const GeneralizedState& state, const AcmParams& params, ModelMode mode);

Vec8 gravity_vector(const GeneralizedState& state, const AcmParams& params);

// M, C and G in one pass (shares the arm integrals between the three).
DynamicsMatrices assemble(const GeneralizedState& state, const AcmParams& params, ModelMode mode);

// The same in chart coordinates (no floor needed there).
DynamicsMatrices assemble(const ChartState& state, const AcmParams& params, ModelMode mode);

// Zeroes the UAV <-> arm cross blocks of M and C. G is left untouched.
DynamicsMatrices decouple(const DynamicsMatrices& matrices);

double kinetic_energy(const GeneralizedState& state, const AcmParams& params, ModelMode mode);
double kinetic_energy(const ChartState& state, const AcmParams& params, ModelMode mode);
double potential_energy(const GeneralizedState& state, const AcmParams& params);
double potential_energy(const ChartState& state, const AcmParams& params);

// Two coupling entries of M in their closed form, evaluated
// pointwise at arc length s with l := l_a. For cross-validation only.
struct CouplingEntries {
  double m17 = 0.0;
  double m18 = 0.0;
};
CouplingEntries printed_coupling_entries(const GeneralizedState& state, const AcmParams& params, double s);

// The same two entries as densities of the quadrature integrand of M at arc
// length s (so that integrating them over [0, l_a] gives M(0,6) and M(0,7)).
CouplingEntries coupling_density(const GeneralizedState& state, const AcmParams& params, double s);

// q'' = M^-1 (tau - J_t^T F_e - C q' - G), via a Cholesky solve. Throws
// NearSingularDynamicsError when M is not positive definite or its condition
// estimate exceeds kMaxCondition.
Vec8 forward_dynamics(const GeneralizedState& state, const Vec8& tau, const ExternalWrench& wrench,
                      const AcmParams& params, ModelMode mode);

// Variant that reuses already assembled matrices.
Vec8 forward_dynamics(const GeneralizedState& state, const DynamicsMatrices& matrices, const Vec8& tau,
                      const ExternalWrench& wrench, const AcmParams& params);

// Actuation (given for the Euler angles and the (kappa, psi_a) representative
// of `hint`) and tip wrench as generalized forces of the chart. The 1/kappa in
// the psi_a and tip-moment terms uses the regularized curvature.
Vec8 chart_forces(const ChartState& state, const GeneralizedState& hint, const Vec8& tau,
                  const ExternalWrench& wrench, const AcmParams& params);

// z'' in chart coordinates.
Vec8 forward_dynamics(const ChartState& state, const GeneralizedState& hint, const Vec8& tau,
                      const ExternalWrench& wrench, const AcmParams& params, ModelMode mode);

}  // namespace acm::dynamics
