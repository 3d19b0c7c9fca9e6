#pragma once

#include "acm/params.hpp"
#include "acm/types.hpp"

// Piecewise-constant-curvature kinematics of a single arm section and its
// composition with the floating UAV base.
//
// Arm-base frame: the unbent arm runs along +z; psi_a rotates the bending
// plane about z; a point at arc length s sits at F(s, kappa, psi_a) and its
// section frame is R_s = Rz(psi_a) Ry(kappa s).
//
// All functions are pure.
namespace acm::kinematics {

// Curvature plus bending-plane angle.
struct ArmConfig {
  double kappa = 0.0;
  double psi_a = 0.0;
};

// Sign-preserving clamp |kappa| >= kappa_s. kappa == 0 maps to +kappa_s.
double regularize_curvature(double kappa, double kappa_s);

// Wraps an angle into (-pi, pi].
double wrap_angle(double angle);

// Arc position F(s, kappa, psi_a) in the arm-base frame. kappa must already be
// regularized; s must lie in [0, arm_length].
Vec3 arc_map(double s, double kappa, double psi_a, double arm_length);

// Section orientation R_s in the arm-base frame.
Mat3 section_rotation(double s, double kappa, double psi_a, double arm_length);

// dF/d(kappa, psi_a), columns ordered (kappa, psi_a).
Mat32 arm_jacobian_translational(double s, double kappa, double psi_a, double arm_length);

// Angular velocity of the section frame per unit (kappa_dot, psi_a_dot).
Mat32 arm_jacobian_rotational(double s, double psi_a, double arm_length);

// ZYX base rotation Rz(yaw) Ry(pitch) Rx(roll).
Mat3 base_rotation(const Vec3& euler);

// W(Phi) with omega_inertial = W(Phi) * Phi_dot. Throws SingularMapError when
// |cos(pitch)| < 1e-6.
Mat3 euler_rate_map(const Vec3& euler);

// ZYX angles of R. Of the two angle triples describing R, and their 2 pi
// shifts, returns the one nearest `hint`, so a tumbling base gives continuous
// angles. Near gimbal lock only roll - yaw (or roll + yaw) is determined; the
// split then follows the hint.
Vec3 euler_from_rotation(const Mat3& R, const Vec3& hint);

// Phi_dot from the inertial angular velocity, solving W(Phi) Phi_dot = omega.
// |cos(pitch)| is floored at 1e-6 instead of throwing.
Vec3 euler_rates(const Vec3& euler, const Vec3& omega);

// SO(3) exponential and its right Jacobian: for R(t) = R0 Exp(d(t)) the body
// angular velocity is J_r(d) d_dot.
Mat3 so3_exp(const Vec3& d);
Mat3 so3_right_jacobian(const Vec3& d);

// Skew-symmetric cross-product matrix.
Mat3 skew(const Vec3& v);

// Arm point at arc length s expressed in the UAV body frame (includes the
// mount offset and rotation). Uses the regularized curvature of the state.
Vec3 body_point(const GeneralizedState& state, double s, const AcmParams& params);

// Inertial pose of the section frame at arc length s.
Pose point_pose(const GeneralizedState& state, double s, const AcmParams& params);

// 6x8 geometric Jacobian of the point at arc length s: rows are the inertial
// linear velocity and the inertial angular velocity of the section frame.
Mat68 acm_jacobian(const GeneralizedState& state, double s, const AcmParams& params);

Pose tip_pose(const GeneralizedState& state, const AcmParams& params);
Mat68 tip_jacobian(const GeneralizedState& state, const AcmParams& params);

// Rotation vector (log map) of R. Returns the representative closest to
// `previous`, so consecutive samples of a continuous rotation stay continuous
// across the pi boundary.
Vec3 rotation_vector(const Mat3& R, const Vec3* previous = nullptr);

// Tip orientation relative to the straight-arm mounting orientation; identity
// for a level UAV with a straight arm.
Mat3 tip_attitude(const GeneralizedState& state, const AcmParams& params);

}  // namespace acm::kinematics
