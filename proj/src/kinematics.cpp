#include "acm/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "acm/errors.hpp"
#include "arc_terms.hpp"

namespace acm::kinematics {

namespace {

constexpr double kGimbalTolerance = 1e-6;

void check_arc_length(double s, double arm_length) {
  const double slack = 1e-12 * std::max(1.0, arm_length);
  if (!std::isfinite(s) || s < -slack || s > arm_length + slack) {
    std::ostringstream msg;
    msg << "arc length s = " << s << " outside [0, " << arm_length << "]";
    throw DomainError(msg.str());
  }
}

Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 R;
  R << c, 0, s,
       0, 1, 0,
       -s, 0, c;
  return R;
}

Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 R;
  R << c, -s, 0,
       s, c, 0,
       0, 0, 1;
  return R;
}

// Base-column map used by the Jacobian: W(Phi) or, with the literal flag, its inverse.
Mat3 base_angular_map(const Vec3& euler, const AcmParams& params) {
  const Mat3 W = euler_rate_map(euler);
  return params.paper_literal_te ? Mat3(W.inverse()) : W;
}

}  // namespace

double regularize_curvature(double kappa, double kappa_s) {
  if (!(kappa_s > 0.0) || !std::isfinite(kappa_s)) {
    throw ConfigError("kappa_s", "curvature threshold must be > 0");
  }
  if (std::abs(kappa) >= kappa_s) return kappa;
  return std::signbit(kappa) && kappa != 0.0 ? -kappa_s : kappa_s;
}

double wrap_angle(double angle) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double wrapped = std::remainder(angle, kTwoPi);  // [-pi, pi]
  if (wrapped <= -std::numbers::pi) wrapped += kTwoPi;
  return wrapped;
}

Vec3 arc_map(double s, double kappa, double psi_a, double arm_length) {
  check_arc_length(s, arm_length);
  const auto a = detail::sample_arc(s, kappa, std::cos(psi_a), std::sin(psi_a));
  return {a.px, a.py, a.pz};
}

Mat3 section_rotation(double s, double kappa, double psi_a, double arm_length) {
  check_arc_length(s, arm_length);
  return rot_z(psi_a) * rot_y(kappa * s);
}

Mat32 arm_jacobian_translational(double s, double kappa, double psi_a, double arm_length) {
  check_arc_length(s, arm_length);
  const auto a = detail::sample_arc(s, kappa, std::cos(psi_a), std::sin(psi_a));
  Mat32 J;
  J << a.dk_x, a.dpsi_x,
       a.dk_y, a.dpsi_y,
       a.dk_z, 0.0;
  return J;
}

Mat32 arm_jacobian_rotational(double s, double psi_a, double arm_length) {
  check_arc_length(s, arm_length);
  Mat32 J;
  J << -s * std::sin(psi_a), 0.0,
       s * std::cos(psi_a), 0.0,
       0.0, 1.0;
  return J;
}

Mat3 base_rotation(const Vec3& euler) {
  return (Eigen::AngleAxisd(euler[2], Vec3::UnitZ()) * Eigen::AngleAxisd(euler[1], Vec3::UnitY()) *
          Eigen::AngleAxisd(euler[0], Vec3::UnitX()))
      .toRotationMatrix();
}

Vec3 euler_from_rotation(const Mat3& R, const Vec3& hint) {
  constexpr double kPi = std::numbers::pi;
  const double pitch = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
  double roll, yaw;
  if (std::abs(std::cos(pitch)) > 1e-9) {
    roll = std::atan2(R(2, 1), R(2, 2));
    yaw = std::atan2(R(1, 0), R(0, 0));
  } else {
    // Only yaw - roll (pitch = pi/2) or yaw + roll (pitch = -pi/2) is fixed.
    const double sign = pitch > 0.0 ? 1.0 : -1.0;
    const double combo = std::atan2(-R(0, 1), R(1, 1));  // yaw - sign * roll
    roll = hint[0];
    yaw = combo + sign * roll;
  }
  auto nearest = [](double a, double target) { return target + wrap_angle(a - target); };
  const Vec3 first(nearest(roll, hint[0]), nearest(pitch, hint[1]), nearest(yaw, hint[2]));
  const Vec3 second(nearest(roll + kPi, hint[0]), nearest(kPi - pitch, hint[1]), nearest(yaw + kPi, hint[2]));
  return (first - hint).squaredNorm() <= (second - hint).squaredNorm() ? first : second;
}

Vec3 euler_rates(const Vec3& euler, const Vec3& omega) {
  const double cps = std::cos(euler[2]), sps = std::sin(euler[2]);
  const double cth = std::cos(euler[1]), sth = std::sin(euler[1]);
  const double c = std::abs(cth) < kGimbalTolerance ? std::copysign(kGimbalTolerance, cth) : cth;
  // omega in the frame after yaw: (cos(pitch) roll_dot, pitch_dot, yaw_dot - sin(pitch) roll_dot).
  const Vec3 w(cps * omega[0] + sps * omega[1], -sps * omega[0] + cps * omega[1], omega[2]);
  const double roll_dot = w[0] / c;
  return {roll_dot, w[1], w[2] + sth * roll_dot};
}

Mat3 so3_exp(const Vec3& d) {
  const double y = d.squaredNorm();
  const Mat3 K = skew(d);
  return Mat3::Identity() + detail::sinc_sq(y) * K + detail::versine_quotient(y) * K * K;
}

Mat3 so3_right_jacobian(const Vec3& d) {
  const double y = d.squaredNorm();
  const Mat3 K = skew(d);
  // (r - sin r) / r^3 = (1 - sinc r) / r^2
  const double c = y < detail::kSeriesThresholdSq ? 1.0 / 6.0 - y / 120.0 + y * y / 5040.0 - y * y * y / 362880.0
                                                  : (1.0 - detail::sinc_sq(y)) / y;
  return Mat3::Identity() - detail::versine_quotient(y) * K + c * K * K;
}

Mat3 euler_rate_map(const Vec3& euler) {
  const double cth = std::cos(euler[1]), sth = std::sin(euler[1]);
  if (std::abs(cth) < kGimbalTolerance) {
    std::ostringstream msg;
    msg << "Euler-rate map singular at pitch " << euler[1] << " rad (gimbal lock)";
    throw SingularMapError(msg.str());
  }
  const double cps = std::cos(euler[2]), sps = std::sin(euler[2]);
  Mat3 W;
  W << cth * cps, -sps, 0.0,
       cth * sps, cps, 0.0,
       -sth, 0.0, 1.0;
  return W;
}

Mat3 skew(const Vec3& v) {
  Mat3 S;
  S << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return S;
}

Vec3 body_point(const GeneralizedState& state, double s, const AcmParams& params) {
  const double kappa = regularize_curvature(state.kappa(), params.kappa_s);
  return params.arm_offset + params.mount_rotation() * arc_map(s, kappa, state.psi_a(), params.l_a);
}

Pose point_pose(const GeneralizedState& state, double s, const AcmParams& params) {
  const double kappa = regularize_curvature(state.kappa(), params.kappa_s);
  const Mat3 R_B = base_rotation(state.euler());
  const Mat3 R_m = params.mount_rotation();
  Pose pose;
  pose.position = state.position() + R_B * body_point(state, s, params);
  pose.rotation = R_B * R_m * section_rotation(s, kappa, state.psi_a(), params.l_a);
  return pose;
}

Mat68 acm_jacobian(const GeneralizedState& state, double s, const AcmParams& params) {
  const double kappa = regularize_curvature(state.kappa(), params.kappa_s);
  const Mat3 R_B = base_rotation(state.euler());
  const Mat3 R_Bm = R_B * params.mount_rotation();
  const Mat3 T = base_angular_map(state.euler(), params);
  const Vec3 r = R_B * body_point(state, s, params);

  Mat68 J = Mat68::Zero();
  J.block<3, 3>(0, 0).setIdentity();
  J.block<3, 3>(0, 3) = -skew(r) * T;
  J.block<3, 2>(0, 6) = R_Bm * arm_jacobian_translational(s, kappa, state.psi_a(), params.l_a);
  J.block<3, 3>(3, 3) = T;
  J.block<3, 2>(3, 6) = R_Bm * arm_jacobian_rotational(s, state.psi_a(), params.l_a);
  return J;
}

Pose tip_pose(const GeneralizedState& state, const AcmParams& params) {
  return point_pose(state, params.l_a, params);
}

Mat68 tip_jacobian(const GeneralizedState& state, const AcmParams& params) {
  return acm_jacobian(state, params.l_a, params);
}

Vec3 rotation_vector(const Mat3& R, const Vec3* previous) {
  const Eigen::AngleAxisd aa(R);
  Vec3 axis = aa.axis();
  const double angle = aa.angle();
  Vec3 rv = angle * axis;
  if (previous == nullptr) return rv;

  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  if (angle < 1e-9 && previous->norm() > 1e-9) axis = previous->normalized();
  Vec3 best = rv;
  double best_dist = (rv - *previous).norm();
  for (int k = -3; k <= 3; ++k) {
    if (k == 0) continue;
    const Vec3 candidate = rv + kTwoPi * k * axis;
    const double dist = (candidate - *previous).norm();
    if (dist < best_dist) {
      best = candidate;
      best_dist = dist;
    }
  }
  return best;
}

Mat3 tip_attitude(const GeneralizedState& state, const AcmParams& params) {
  const Mat3 R_m = params.mount_rotation();
  return tip_pose(state, params).rotation * R_m.transpose();
}

}  // namespace acm::kinematics
