#include "acm/params.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "acm/errors.hpp"

namespace acm {

const char* to_string(ModelMode mode) {
  return mode == ModelMode::kCoupled ? "coupled" : "decoupled";
}

ModelMode model_mode_from_string(const std::string& name) {
  if (name == "coupled") return ModelMode::kCoupled;
  if (name == "decoupled") return ModelMode::kDecoupled;
  throw ConfigError("model", "expected 'coupled' or 'decoupled', got '" + name + "'");
}

double AcmParams::area() const { return std::numbers::pi * r_a * r_a; }

double AcmParams::second_moment() const { return std::numbers::pi * std::pow(r_a, 4) / 4.0; }

Mat3 AcmParams::mount_rotation() const {
  if (!mount_down) return Mat3::Identity();
  Mat3 R;
  R << 1, 0, 0,
       0, -1, 0,
       0, 0, -1;
  return R;
}

namespace {

void require_positive(double value, const char* field) {
  if (!std::isfinite(value) || value <= 0.0) {
    throw ConfigError(std::string("params.") + field, "must be finite and > 0");
  }
}

void require_non_negative(double value, const char* field) {
  if (!std::isfinite(value) || value < 0.0) {
    throw ConfigError(std::string("params.") + field, "must be finite and >= 0");
  }
}

}  // namespace

void AcmParams::validate() const {
  require_positive(m_u, "m_u");
  require_positive(l_a, "l_a");
  require_positive(r_a, "r_a");
  require_positive(rho, "rho");
  require_positive(E, "E");
  require_non_negative(g, "g");
  require_positive(kappa_s, "kappa_s");
  if (quad_nodes < 1 || quad_nodes > 256) {
    throw ConfigError("params.quad_nodes", "must be in [1, 256]");
  }
  if (!I_u.allFinite() || (I_u - I_u.transpose()).cwiseAbs().maxCoeff() > 1e-12 * I_u.norm()) {
    throw ConfigError("params.I_u", "must be finite and symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(I_u, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= 0.0) {
    throw ConfigError("params.I_u", "must be positive definite");
  }
  if (!arm_offset.allFinite()) {
    throw ConfigError("params.arm_offset", "must be finite");
  }
}

}  // namespace acm
