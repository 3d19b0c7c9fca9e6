#include "acm/dynamics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "acm/errors.hpp"
#include "acm/kinematics.hpp"
#include "acm/quadrature.hpp"
#include "arc_terms.hpp"

namespace acm::dynamics {

namespace {

using kinematics::skew;

double psi_inertia_floor(const AcmParams& params) {
  return params.linear_density() * params.kappa_s * params.kappa_s * std::pow(params.l_a, 5) / 20.0;
}

// Which pair of arm coordinates the last two generalized coordinates are.
enum class Chart { kPolar, kVector };

// Body-frame moments of the backbone, all weighted by rho A.
//   S1 = int P, S2 = int (|P|^2 I - P P^T), A1 = int R_m J_pa,
//   A2 = int [P]x R_m J_pa, A3 = int J_pa^T J_pa.
struct ArmIntegrals {
  double mass = 0.0;
  Vec3 S1 = Vec3::Zero();
  Mat3 S2 = Mat3::Zero();
  Mat32 A1 = Mat32::Zero();
  Mat32 A2 = Mat32::Zero();
  Eigen::Matrix2d A3 = Eigen::Matrix2d::Zero();
};

// Quadrature in the curvature-vector chart, where the arc is smooth.
ArmIntegrals vector_integrals(double u, double v, const AcmParams& params, bool with_cross) {
  const Mat3 R_m = params.mount_rotation();
  const double lambda = params.linear_density();
  const double half = 0.5 * params.l_a;
  const QuadratureRule& rule = cached_gauss_legendre(params.quad_nodes);

  ArmIntegrals out;
  out.mass = lambda * params.l_a;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double s = half * (rule.nodes[i] + 1.0);
    const double w = lambda * half * rule.weights[i];
    const auto a = detail::sample_arc_uv(s, u, v);
    const Vec3 P = params.arm_offset + R_m * Vec3(a.px, a.py, a.pz);
    Mat32 J;
    J << a.du_x, a.dv_x,
         a.du_y, a.dv_y,
         a.du_z, a.dv_z;
    const Mat32 RJ = R_m * J;
    out.S1 += w * P;
    out.S2 += w * (P.squaredNorm() * Mat3::Identity() - P * P.transpose());
    out.A1 += w * RJ;
    out.A3 += w * (J.transpose() * J);
    if (with_cross) out.A2 += w * (skew(P) * RJ);
  }
  return out;
}

// The polar integrals use the raw curvature, so M, S1 and U stay
// differentiable when the arm straightens. The psi_a inertia vanishes like
// kappa^2 there; A3 carries a constant floor equal to its leading-order value
// at kappa_s.
ArmIntegrals arm_integrals(Chart chart, double a0, double a1, const AcmParams& params, bool with_cross) {
  if (chart == Chart::kVector) return vector_integrals(a0, a1, params, with_cross);
  const double c = std::cos(a1), sn = std::sin(a1);
  ArmIntegrals in = vector_integrals(a0 * c, a0 * sn, params, with_cross);
  const Eigen::Matrix2d Jc = polar_chart_jacobian(a0, a1);
  in.A1 = (in.A1 * Jc).eval();
  in.A2 = (in.A2 * Jc).eval();
  in.A3 = (Jc.transpose() * in.A3 * Jc).eval();
  in.A3(1, 1) += psi_inertia_floor(params);
  return in;
}

ArmIntegrals arm_integrals(Chart chart, const Vec8& q, const AcmParams& params, bool with_cross) {
  return arm_integrals(chart, q[idx::kKappa], q[idx::kPsiA], params, with_cross);
}

Mat3 base_angular_map(const Vec3& euler, const AcmParams& params) {
  const Mat3 W = kinematics::euler_rate_map(euler);
  return params.paper_literal_te ? Mat3(W.inverse()) : W;
}

// How an 8-vector of coordinates is read: arm chart, and base attitude as ZYX
// angles or as exponential coordinates about R_ref.
struct Coordinates {
  Chart arm = Chart::kPolar;
  bool local_base = false;
  Mat3 R_ref = Mat3::Identity();
};

Coordinates coordinates_of(const ChartState& cs) { return {Chart::kVector, cs.local_base, cs.R_ref}; }

// R_B and the map T from attitude-coordinate rates to inertial angular velocity.
struct BaseFrame {
  Mat3 R_B;
  Mat3 T;
};

BaseFrame base_frame(const Coordinates& c, const Vec3& a, const AcmParams& params) {
  if (c.local_base) {
    const Mat3 R = c.R_ref * kinematics::so3_exp(a);
    return {R, R * kinematics::so3_right_jacobian(a)};
  }
  return {kinematics::base_rotation(a), base_angular_map(a, params)};
}

Mat8 assemble_mass(const BaseFrame& f, const ArmIntegrals& in, const AcmParams& params, ModelMode mode) {
  const Mat3 Wb = f.R_B.transpose() * f.T;

  Mat8 M = Mat8::Zero();
  M.block<3, 3>(0, 0) = (params.m_u + in.mass) * Mat3::Identity();
  M.block<3, 3>(3, 3) = Wb.transpose() * (params.I_u + in.S2) * Wb;
  M.block<2, 2>(6, 6) = in.A3;
  const Mat3 Mrp = -f.R_B * skew(in.S1) * Wb;
  M.block<3, 3>(0, 3) = Mrp;
  M.block<3, 3>(3, 0) = Mrp.transpose();
  if (mode == ModelMode::kCoupled) {
    const Mat32 Mra = f.R_B * in.A1;
    M.block<3, 2>(0, 6) = Mra;
    M.block<2, 3>(6, 0) = Mra.transpose();
    const Mat32 Mpa = Wb.transpose() * in.A2;
    M.block<3, 2>(3, 6) = Mpa;
    M.block<2, 3>(6, 3) = Mpa.transpose();
  }
  M = 0.5 * (M + M.transpose()).eval();
  return M;
}

// Bending energy E I l kappa^2 / 2 is kappa^2 = u^2 + v^2 in the vector chart.
Vec2 elastic_force(Chart chart, const Vec8& q, const AcmParams& params) {
  const double k = params.bending_stiffness() * params.l_a;
  if (chart == Chart::kVector) return k * Vec2(q[6], q[7]);
  return Vec2(k * q[idx::kKappa], 0.0);
}

Vec8 assemble_gravity(const Coordinates& c, const Vec8& q, const BaseFrame& f, const ArmIntegrals& in,
                      const AcmParams& params) {
  const Vec3 gz(0.0, 0.0, params.g);
  Vec8 G = Vec8::Zero();
  G[idx::kZ] = (params.m_u + in.mass) * params.g;
  G.segment<3>(idx::kRoll) = f.T.transpose() * (f.R_B * in.S1).cross(gz);
  G.segment<2>(6) = in.A1.transpose() * f.R_B.transpose() * gz + elastic_force(c.arm, q, params);
  return G;
}

double assemble_potential(const Vec8& q, const Mat3& R_B, const ArmIntegrals& in, const AcmParams& params,
                          double kappa_sq) {
  const double z = q[idx::kZ];
  return params.m_u * params.g * z + params.g * (in.mass * z + (R_B * in.S1).z()) +
         0.5 * params.bending_stiffness() * params.l_a * kappa_sq;
}

void zero_cross_blocks(Mat8& A) {
  A.block<6, 2>(0, 6).setZero();
  A.block<2, 6>(6, 0).setZero();
}

Vec3 attitude(const Vec8& q) { return q.segment<3>(idx::kRoll); }

// dM/dq_k by central differences. Translation does not enter M; attitude
// perturbations reuse the body-frame integrals.
std::array<Mat8, 8> mass_partials(const Coordinates& c, const Vec8& q, const ArmIntegrals& base,
                                   const AcmParams& params, ModelMode mode) {
  const bool cross = mode == ModelMode::kCoupled;
  const double h = kChristoffelStep;
  std::array<Mat8, 8> dM;
  for (int k = 0; k < 3; ++k) dM[k].setZero();
  for (int k = idx::kRoll; k <= idx::kYaw; ++k) {
    Vec3 ap = attitude(q), am = attitude(q);
    ap[k - idx::kRoll] += h;
    am[k - idx::kRoll] -= h;
    dM[k] = (assemble_mass(base_frame(c, ap, params), base, params, mode) -
             assemble_mass(base_frame(c, am, params), base, params, mode)) / (2.0 * h);
  }
  const BaseFrame f = base_frame(c, attitude(q), params);
  for (int k = 6; k < 8; ++k) {
    Vec8 qp = q, qm = q;
    qp[k] += h;
    qm[k] -= h;
    const ArmIntegrals ip = arm_integrals(c.arm, qp, params, cross);
    const ArmIntegrals im = arm_integrals(c.arm, qm, params, cross);
    dM[k] = (assemble_mass(f, ip, params, mode) - assemble_mass(f, im, params, mode)) / (2.0 * h);
  }
  return dM;
}

Mat8 christoffel(const Coordinates& c, const Vec8& q, const Vec8& qdot, const ArmIntegrals& base,
                 const AcmParams& params, ModelMode mode) {
  const auto dM = mass_partials(c, q, base, params, mode);
  Mat8 Mdot = Mat8::Zero();
  Mat8 X;
  for (int k = 0; k < 8; ++k) {
    Mdot += dM[k] * qdot[k];
    X.col(k) = dM[k] * qdot;
  }
  Mat8 C = 0.5 * (Mdot + X - X.transpose());
  if (mode == ModelMode::kDecoupled) zero_cross_blocks(C);
  return C;
}

Mat8 mass_in(const Coordinates& c, const Vec8& q, const AcmParams& params, ModelMode mode) {
  const ArmIntegrals in = arm_integrals(c.arm, q, params, mode == ModelMode::kCoupled);
  Mat8 M = assemble_mass(base_frame(c, attitude(q), params), in, params, mode);
  if (mode == ModelMode::kDecoupled) zero_cross_blocks(M);
  return M;
}

DynamicsMatrices assemble_in(const Coordinates& c, const Vec8& q, const Vec8& qdot, const AcmParams& params,
                             ModelMode mode) {
  const ArmIntegrals in = arm_integrals(c.arm, q, params, mode == ModelMode::kCoupled);
  const BaseFrame f = base_frame(c, attitude(q), params);
  DynamicsMatrices out;
  out.mode = mode;
  out.M = assemble_mass(f, in, params, mode);
  out.C = christoffel(c, q, qdot, in, params, mode);
  out.G = assemble_gravity(c, q, f, in, params);
  if (mode == ModelMode::kDecoupled) zero_cross_blocks(out.M);
  return out;
}

double potential_in(const Coordinates& c, const Vec8& q, const AcmParams& params) {
  const ArmIntegrals in = arm_integrals(c.arm, q, params, false);
  const double kappa_sq = c.arm == Chart::kVector ? q.tail<2>().squaredNorm() : q[idx::kKappa] * q[idx::kKappa];
  return assemble_potential(q, base_frame(c, attitude(q), params).R_B, in, params, kappa_sq);
}

void require_finite(const Vec8& q, const Vec8& qdot) {
  if (!q.allFinite() || !qdot.allFinite()) throw DomainError("state contains non-finite entries");
}

void require_finite(const GeneralizedState& state) { require_finite(state.q, state.qdot); }

// (kappa, psi_a) and their rates from the curvature vector; see from_chart.
struct PolarArm {
  double kappa, psi_a, kappa_dot, psi_a_dot;
};

PolarArm polar_arm(double u, double v, double ud, double vd, double psi_hint) {
  const double r2 = u * u + v * v;
  if (r2 == 0.0) return {0.0, psi_hint, ud * std::cos(psi_hint) + vd * std::sin(psi_hint), 0.0};
  const double r = std::sqrt(r2);
  const double psi_pos = std::atan2(v, u);
  const double psi_neg = std::atan2(-v, -u);
  const bool negative = std::abs(kinematics::wrap_angle(psi_neg - psi_hint)) <
                        std::abs(kinematics::wrap_angle(psi_pos - psi_hint));
  const double sign = negative ? -1.0 : 1.0;
  return {sign * r, negative ? psi_neg : psi_pos, sign * (u * ud + v * vd) / r, (u * vd - v * ud) / r2};
}

}  // namespace

Eigen::Matrix2d polar_chart_jacobian(double kappa, double psi_a) {
  const double c = std::cos(psi_a), s = std::sin(psi_a);
  Eigen::Matrix2d Jc;
  Jc << c, -kappa * s,
        s, kappa * c;
  return Jc;
}

ChartState to_chart(const GeneralizedState& state, const AcmParams& params) {
  require_finite(state);
  ChartState cs;
  cs.local_base = !params.paper_literal_te;
  cs.z = state.q;
  cs.zdot = state.qdot;
  if (cs.local_base) {
    cs.R_ref = kinematics::base_rotation(state.euler());
    cs.z.segment<3>(idx::kRoll).setZero();
    // body angular velocity; J_r(0) = I
    cs.zdot.segment<3>(idx::kRoll) = cs.R_ref.transpose() * kinematics::euler_rate_map(state.euler()) *
                                     state.qdot.segment<3>(idx::kRoll);
  }
  const double k = state.kappa(), c = std::cos(state.psi_a()), s = std::sin(state.psi_a());
  cs.z[6] = k * c;
  cs.z[7] = k * s;
  cs.zdot.tail<2>() = polar_chart_jacobian(k, state.psi_a()) * state.qdot.tail<2>();
  return cs;
}

Mat3 chart_attitude(const ChartState& cs, const AcmParams& params) {
  return base_frame(coordinates_of(cs), attitude(cs.z), params).R_B;
}

ChartState rebase(const ChartState& cs) {
  if (!cs.local_base) return cs;
  const Vec3 d = attitude(cs.z);
  ChartState out = cs;
  out.R_ref = Eigen::Quaterniond(cs.R_ref * kinematics::so3_exp(d)).normalized().toRotationMatrix();
  out.z.segment<3>(idx::kRoll).setZero();
  out.zdot.segment<3>(idx::kRoll) = kinematics::so3_right_jacobian(d) * cs.zdot.segment<3>(idx::kRoll);
  return out;
}

GeneralizedState from_chart(const ChartState& cs, const GeneralizedState& hint, const AcmParams& params) {
  GeneralizedState st;
  st.q = cs.z;
  st.qdot = cs.zdot;
  if (cs.local_base) {
    const BaseFrame f = base_frame(coordinates_of(cs), attitude(cs.z), params);
    const Vec3 euler = kinematics::euler_from_rotation(f.R_B, hint.euler());
    st.q.segment<3>(idx::kRoll) = euler;
    st.qdot.segment<3>(idx::kRoll) = kinematics::euler_rates(euler, f.T * cs.zdot.segment<3>(idx::kRoll));
  }
  const PolarArm p = polar_arm(cs.z[6], cs.z[7], cs.zdot[6], cs.zdot[7], hint.psi_a());
  st.q[idx::kKappa] = p.kappa;
  st.q[idx::kPsiA] = p.psi_a;
  st.qdot[idx::kKappa] = p.kappa_dot;
  st.qdot[idx::kPsiA] = p.psi_a_dot;
  return st;
}

Mat8 mass_matrix(const GeneralizedState& state, const AcmParams& params, ModelMode mode) {
  require_finite(state);
  return mass_in(Coordinates{}, state.q, params, mode);
}

Mat8 coriolis_matrix(const GeneralizedState& state, const AcmParams& params, ModelMode mode) {
  require_finite(state);
  const ArmIntegrals in = arm_integrals(Chart::kPolar, state.q, params, mode == ModelMode::kCoupled);
  return christoffel(Coordinates{}, state.q, state.qdot, in, params, mode);
}

Vec8 gravity_vector(const GeneralizedState& state, const AcmParams& params) {
  require_finite(state);
  const ArmIntegrals in = arm_integrals(Chart::kPolar, state.q, params, false);
  return assemble_gravity(Coordinates{}, state.q, base_frame(Coordinates{}, state.euler(), params), in, params);
}

DynamicsMatrices assemble(const GeneralizedState& state, const AcmParams& params, ModelMode mode) {
  require_finite(state);
  return assemble_in(Coordinates{}, state.q, state.qdot, params, mode);
}

DynamicsMatrices assemble(const ChartState& state, const AcmParams& params, ModelMode mode) {
  require_finite(state.z, state.zdot);
  return assemble_in(coordinates_of(state), state.z, state.zdot, params, mode);
}

DynamicsMatrices decouple(const DynamicsMatrices& matrices) {
  DynamicsMatrices out = matrices;
  zero_cross_blocks(out.M);
  zero_cross_blocks(out.C);
  out.mode = ModelMode::kDecoupled;
  return out;
}

double kinetic_energy(const ChartState& state, const AcmParams& params, ModelMode mode) {
  require_finite(state.z, state.zdot);
  return 0.5 * state.zdot.dot(mass_in(coordinates_of(state), state.z, params, mode) * state.zdot);
}

double kinetic_energy(const GeneralizedState& state, const AcmParams& params, ModelMode mode) {
  return kinetic_energy(to_chart(state, params), params, mode);
}

double potential_energy(const GeneralizedState& state, const AcmParams& params) {
  require_finite(state);
  return potential_in(Coordinates{}, state.q, params);
}

double potential_energy(const ChartState& state, const AcmParams& params) {
  require_finite(state.z, state.zdot);
  return potential_in(coordinates_of(state), state.z, params);
}

CouplingEntries printed_coupling_entries(const GeneralizedState& state, const AcmParams& params, double s) {
  if (!std::isfinite(s) || s < 0.0 || s > params.l_a) {
    std::ostringstream msg;
    msg << "arc length s = " << s << " outside [0, " << params.l_a << "]";
    throw DomainError(msg.str());
  }
  const double kappa = kinematics::regularize_curvature(state.kappa(), params.kappa_s);
  const double l = params.l_a;
  const double phi = state.q[idx::kRoll], th = state.q[idx::kPitch], psi = state.q[idx::kYaw];
  const double pa = state.psi_a();
  const double sph = std::sin(phi), cph = std::cos(phi);
  const double sth = std::sin(th), cth = std::cos(th);
  const double sps = std::sin(psi), cps = std::cos(psi);
  const double spa = std::sin(pa), cpa = std::cos(pa);
  const double u = kappa * s / l;
  const double k = params.rho * std::numbers::pi * params.r_a * params.r_a;

  const double bend = l * std::cos(u) - l + kappa * s * std::sin(u);
  CouplingEntries e;
  e.m17 = k / (kappa * kappa) *
          ((l * std::sin(u) - kappa * s * std::cos(u)) * (sph * sps + cph * cps * sth) -
           spa * (cph * sps - cps * sph * sth) * bend + cpa * cps * cth * bend);
  e.m18 = l * k / kappa * (std::cos(u) - 1.0) * (cph * cpa * sps + cps * cth * spa - cpa * cps * sph * sth);
  return e;
}

CouplingEntries coupling_density(const GeneralizedState& state, const AcmParams& params, double s) {
  const Mat3 R_B = kinematics::base_rotation(state.euler());
  const double kappa = kinematics::regularize_curvature(state.kappa(), params.kappa_s);
  const Mat32 J = R_B * params.mount_rotation() *
                  kinematics::arm_jacobian_translational(s, kappa, state.psi_a(), params.l_a);
  return {params.linear_density() * J(0, 0), params.linear_density() * J(0, 1)};
}

namespace {

template <int N>
Eigen::Matrix<double, N, 1> spd_solve(const Eigen::Matrix<double, N, N>& A, const Eigen::Matrix<double, N, 1>& b,
                                      double& max_diag, double& min_diag) {
  Eigen::LLT<Eigen::Matrix<double, N, N>> llt(A);
  if (llt.info() != Eigen::Success) {
    throw NearSingularDynamicsError("mass matrix is not positive definite", INFINITY);
  }
  const Eigen::Matrix<double, N, 1> d = llt.matrixLLT().diagonal();
  max_diag = std::max(max_diag, d.maxCoeff());
  min_diag = std::min(min_diag, d.minCoeff());
  return llt.solve(b);
}

Vec8 solve_accelerations(const DynamicsMatrices& matrices, const Vec8& rhs) {
  double max_diag = 0.0, min_diag = INFINITY;
  Vec8 acc;
  if (matrices.mode == ModelMode::kDecoupled) {
    const Mat6 Mb = matrices.M.topLeftCorner<6, 6>();
    const Eigen::Matrix2d Ma = matrices.M.bottomRightCorner<2, 2>();
    acc.head<6>() = spd_solve<6>(Mb, Vec6(rhs.head<6>()), max_diag, min_diag);
    acc.tail<2>() = spd_solve<2>(Ma, Vec2(rhs.tail<2>()), max_diag, min_diag);
  } else {
    acc = spd_solve<8>(matrices.M, rhs, max_diag, min_diag);
  }
  const double condition = min_diag > 0.0 ? (max_diag / min_diag) * (max_diag / min_diag) : INFINITY;
  if (!(condition <= kMaxCondition)) {
    std::ostringstream msg;
    msg << "mass matrix condition estimate " << condition << " exceeds " << kMaxCondition;
    throw NearSingularDynamicsError(msg.str(), condition);
  }
  return acc;
}

}  // namespace

Vec8 forward_dynamics(const GeneralizedState& state, const DynamicsMatrices& matrices, const Vec8& tau,
                      const ExternalWrench& wrench, const AcmParams& params) {
  if (!tau.allFinite() || !wrench.allFinite()) throw DomainError("non-finite actuation or wrench");
  const Mat68 J_t = kinematics::tip_jacobian(state, params);
  return solve_accelerations(matrices, tau - J_t.transpose() * wrench - matrices.C * state.qdot - matrices.G);
}

Vec8 forward_dynamics(const GeneralizedState& state, const Vec8& tau, const ExternalWrench& wrench,
                      const AcmParams& params, ModelMode mode) {
  return forward_dynamics(state, assemble(state, params, mode), tau, wrench, params);
}

Vec8 chart_forces(const ChartState& state, const GeneralizedState& hint, const Vec8& tau, const ExternalWrench& wrench,
                  const AcmParams& params) {
  if (!tau.allFinite() || !wrench.allFinite()) throw DomainError("non-finite actuation or wrench");
  const Coordinates c = coordinates_of(state);
  const BaseFrame f = base_frame(c, attitude(state.z), params);
  const Vec3 force = wrench.head<3>(), moment = wrench.tail<3>();
  const double u = state.z[6], v = state.z[7];
  const auto tip = detail::sample_arc_uv(params.l_a, u, v);
  const Mat3 R_Bm = f.R_B * params.mount_rotation();
  const Vec3 r = f.R_B * params.arm_offset + R_Bm * Vec3(tip.px, tip.py, tip.pz);

  Vec8 Q;
  Q.head<3>() = tau.head<3>() - force;

  Vec3 tau_att = tau.segment<3>(idx::kRoll);
  const PolarArm arm = polar_arm(u, v, 0.0, 0.0, hint.psi_a());
  if (state.local_base && !tau_att.isZero()) {
    // Generalized forces on the ZYX angles -> inertial moment -> local chart.
    const Vec3 euler = kinematics::euler_from_rotation(f.R_B, hint.euler());
    const Vec3 world = kinematics::euler_rate_map(euler).transpose().partialPivLu().solve(tau_att);
    tau_att = f.T.transpose() * world;
  }
  Q.segment<3>(idx::kRoll) = tau_att - f.T.transpose() * (r.cross(force) + moment);

  const double kappa = kinematics::regularize_curvature(arm.kappa, params.kappa_s);
  const Eigen::Matrix2d Jc_inv = polar_chart_jacobian(kappa, arm.psi_a).inverse();
  Mat32 J_v;
  J_v << tip.du_x, tip.dv_x,
         tip.du_y, tip.dv_y,
         tip.du_z, tip.dv_z;
  const Mat32 J_w = R_Bm * kinematics::arm_jacobian_rotational(params.l_a, arm.psi_a, params.l_a) * Jc_inv;
  Q.tail<2>() = Jc_inv.transpose() * tau.tail<2>() - (R_Bm * J_v).transpose() * force - J_w.transpose() * moment;
  return Q;
}

Vec8 forward_dynamics(const ChartState& state, const GeneralizedState& hint, const Vec8& tau,
                      const ExternalWrench& wrench, const AcmParams& params, ModelMode mode) {
  const DynamicsMatrices m = assemble(state, params, mode);
  return solve_accelerations(m, chart_forces(state, hint, tau, wrench, params) - m.C * state.zdot - m.G);
}

}  // namespace acm::dynamics
