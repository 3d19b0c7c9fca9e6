#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <string>

namespace acm {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat8 = Eigen::Matrix<double, 8, 8>;
using Mat32 = Eigen::Matrix<double, 3, 2>;
using Mat68 = Eigen::Matrix<double, 6, 8>;
using Mat38 = Eigen::Matrix<double, 3, 8>;

// Indices into the generalized coordinate vector q = (x, y, z, roll, pitch, yaw, kappa, psi_a).
namespace idx {
inline constexpr int kX = 0;
inline constexpr int kY = 1;
inline constexpr int kZ = 2;
inline constexpr int kRoll = 3;
inline constexpr int kPitch = 4;
inline constexpr int kYaw = 5;
inline constexpr int kKappa = 6;
inline constexpr int kPsiA = 7;
inline constexpr int kBaseDofs = 6;
inline constexpr int kArmDofs = 2;
}  // namespace idx

enum class ModelMode { kCoupled, kDecoupled };

const char* to_string(ModelMode mode);
ModelMode model_mode_from_string(const std::string& name);

// Configuration and velocity of the aerial continuum manipulator.
struct GeneralizedState {
  Vec8 q = Vec8::Zero();
  Vec8 qdot = Vec8::Zero();

  Vec3 position() const { return q.head<3>(); }
  Vec3 euler() const { return q.segment<3>(idx::kRoll); }
  double kappa() const { return q[idx::kKappa]; }
  double psi_a() const { return q[idx::kPsiA]; }
};

// Rigid pose; rotation maps local coordinates to the inertial frame.
struct Pose {
  Vec3 position = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
};

}  // namespace acm
