#pragma once

#include "acm/types.hpp"

namespace acm {

// Physical constants of the UAV and its continuum arm. Defaults describe a
// 2 kg multirotor carrying a 1 m, 1 mm radius backbone.
struct AcmParams {
  double m_u = 2.0;                                     // UAV mass [kg]
  Mat3 I_u = Eigen::Vector3d(0.02, 0.02, 0.04).asDiagonal();  // UAV inertia, body frame [kg m^2]
  double l_a = 1.0;                                     // arm length [m]
  double r_a = 1e-3;                                    // backbone radius [m]
  double rho = 6450.0;                                  // backbone density [kg/m^3]
  double E = 120e9;                                     // Young's modulus [Pa]
  double g = 9.81;                                      // gravity [m/s^2]
  double kappa_s = 1e-4;                                // curvature threshold [1/m]
  int quad_nodes = 16;                                  // Gauss-Legendre order along the arm

  // Arm base in the UAV body frame. With mount_down the straight arm points
  // along body -z (a fixed Rx(pi) between body and arm-base frames).
  Vec3 arm_offset = Vec3::Zero();
  bool mount_down = true;

  // Use the inverse Euler-rate map in the base columns of the Jacobian, as
  // printed in the original derivation. Kinematically inconsistent; kept for
  // comparison runs only.
  bool paper_literal_te = false;

  double area() const;           // pi r^2
  double second_moment() const;  // pi r^4 / 4
  double linear_density() const { return rho * area(); }
  double arm_mass() const { return linear_density() * l_a; }
  double bending_stiffness() const { return E * second_moment(); }

  // Body-to-arm-base rotation.
  Mat3 mount_rotation() const;

  // Throws ConfigError naming the first offending field.
  void validate() const;
};

}  // namespace acm
