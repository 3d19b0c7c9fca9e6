#include "acm/servo.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "acm/dynamics.hpp"
#include "acm/errors.hpp"
#include "acm/kinematics.hpp"
#include "acm/simulation.hpp"

namespace acm::servo {

namespace {

constexpr double kRankTolerance = 1e-6;

void require_spd(const Mat6& A, const char* name) {
  if (!A.allFinite() || (A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, A.norm())) {
    throw ConfigError(name, "gain matrix must be symmetric");
  }
  const double min_eig = Eigen::SelfAdjointEigenSolver<Mat6>(A).eigenvalues().minCoeff();
  if (!(min_eig > 0.0)) throw ConfigError(name, "gain matrix must be positive definite");
}

double spectral_norm(const Mat6& A) { return Eigen::JacobiSVD<Mat6>(A).singularValues()[0]; }

double min_eigenvalue(const Mat6& A) { return Eigen::SelfAdjointEigenSolver<Mat6>(A).eigenvalues().minCoeff(); }

Vec2 rotate(const Vec2& v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

PathSegment line(Vec2 a, Vec2 b, double speed) {
  PathSegment seg;
  seg.kind = PathSegment::Kind::kLine;
  seg.start = a;
  seg.end = b;
  seg.speed = speed;
  return seg;
}

PathSegment arc(Vec2 start, Vec2 center, double sweep, double speed) {
  PathSegment seg;
  seg.kind = PathSegment::Kind::kArc;
  seg.start = start;
  seg.center = center;
  seg.sweep = sweep;
  seg.end = center + rotate(start - center, sweep);
  seg.speed = speed;
  return seg;
}

// Arc length along a segment and its first three time derivatives.
struct Progress {
  double s, v, a, j;
};

Progress ramp_up(double tau, double cruise, double ramp) {
  const double w = std::numbers::pi / ramp;
  return {0.5 * cruise * (tau - std::sin(w * tau) / w), 0.5 * cruise * (1.0 - std::cos(w * tau)),
          0.5 * cruise * w * std::sin(w * tau), 0.5 * cruise * w * w * std::cos(w * tau)};
}

Vec2 to_vec2(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ConfigError(field, "expected [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

double number(const nlohmann::json& j, const std::string& field) {
  if (!j.is_number()) throw ConfigError(field, "expected a number");
  return j.get<double>();
}

}  // namespace

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !std::isfinite(fx)) throw ConfigError("intrinsics.fx", "must be > 0");
  if (!(fy > 0.0) || !std::isfinite(fy)) throw ConfigError("intrinsics.fy", "must be > 0");
  if (width <= 0) throw ConfigError("intrinsics.width", "must be > 0");
  if (height <= 0) throw ConfigError("intrinsics.height", "must be > 0");
  if (!(cx > 0.0 && cx < width)) throw ConfigError("intrinsics.cx", "principal point must lie inside the image");
  if (!(cy > 0.0 && cy < height)) throw ConfigError("intrinsics.cy", "principal point must lie inside the image");
}

Projection project(const Vec3& world_point, const Pose& camera, const CameraIntrinsics& intrinsics) {
  const Vec3 p = camera.rotation.transpose() * (world_point - camera.position);
  if (!(p.z() > kMinDepth)) {
    std::ostringstream msg;
    msg << "point at camera depth " << p.z() << " m is behind the camera";
    throw FeatureLossError(msg.str(), std::numeric_limits<double>::quiet_NaN());
  }
  return {intrinsics.fx * p.x() / p.z() + intrinsics.cx, intrinsics.fy * p.y() / p.z() + intrinsics.cy, p.z()};
}

Vec2 normalize(double u, double v, const CameraIntrinsics& intrinsics) {
  return {(u - intrinsics.cx) / intrinsics.fx, (v - intrinsics.cy) / intrinsics.fy};
}

void FeatureSet::validate() const {
  if (s.size() != 2 * Z.size()) {
    throw DimensionError("feature set has " + std::to_string(s.size()) + " coordinates for " +
                         std::to_string(Z.size()) + " depths");
  }
  for (int i = 0; i < Z.size(); ++i) {
    if (!(Z[i] > kMinDepth)) throw DomainError("feature " + std::to_string(i) + " depth below minimum");
  }
}

FeatureSet project_all(const std::vector<Vec3>& points, const Pose& camera, const CameraIntrinsics& intrinsics) {
  FeatureSet f;
  f.s.resize(2 * static_cast<int>(points.size()));
  f.Z.resize(static_cast<int>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Projection p = project(points[i], camera, intrinsics);
    f.s[2 * i] = p.u;
    f.s[2 * i + 1] = p.v;
    f.Z[i] = p.Z;
  }
  return f;
}

VecX normalized(const FeatureSet& features, const CameraIntrinsics& intrinsics) {
  features.validate();
  VecX x(features.s.size());
  for (int i = 0; i < features.count(); ++i) {
    x.segment<2>(2 * i) = normalize(features.s[2 * i], features.s[2 * i + 1], intrinsics);
  }
  return x;
}

MatX interaction_matrix(const FeatureSet& features, const CameraIntrinsics& intrinsics) {
  const VecX xn = normalized(features, intrinsics);
  MatX L(2 * features.count(), 6);
  for (int i = 0; i < features.count(); ++i) {
    const double x = xn[2 * i], y = xn[2 * i + 1], iz = 1.0 / features.Z[i];
    L.row(2 * i) << -iz, 0.0, x * iz, x * y, -(1.0 + x * x), y;
    L.row(2 * i + 1) << 0.0, -iz, y * iz, 1.0 + y * y, -x * y, -x;
  }
  return L;
}

VecX servo_error(const FeatureSet& features, const FeatureSet& desired, const CameraIntrinsics& intrinsics) {
  if (features.s.size() != desired.s.size()) {
    throw DimensionError("feature count " + std::to_string(features.count()) + " differs from desired " +
                         std::to_string(desired.count()));
  }
  return normalized(desired, intrinsics) - normalized(features, intrinsics);
}

double pixel_error_norm(const FeatureSet& features, const FeatureSet& desired) {
  if (features.s.size() != desired.s.size()) throw DimensionError("feature count differs from desired");
  return (desired.s - features.s).norm();
}

void ControllerGains::validate() const {
  require_spd(K_p, "gains.K_p");
  require_spd(K_d, "gains.K_d");
  require_spd(C_p, "gains.C_p");
  require_spd(C_d, "gains.C_d");
  require_spd(C_s, "gains.C_s");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("gains.sigma", "must be > 0");
}

Vec6 dpd_sm_term(const Vec6& e, const Vec6& edot, const ControllerGains& gains) {
  const Vec6 sat = (e / gains.sigma).array().tanh().matrix();
  return gains.C_d * edot + gains.C_p * e + gains.C_s * sat;
}

Vec6 task_error(const MatX& L, const VecX& e) {
  if (L.rows() != e.size() || L.cols() != 6) throw DimensionError("interaction matrix and error sizes differ");
  return L.completeOrthogonalDecomposition().solve(e);
}

Pose camera_pose(const GeneralizedState& state, const AcmParams& params) { return kinematics::tip_pose(state, params); }

Mat68 task_jacobian(const GeneralizedState& state, const AcmParams& params, bool literal_ta) {
  const Mat68 J = kinematics::tip_jacobian(state, params);
  Mat6 Ta_inv = Mat6::Zero();
  if (literal_ta) {
    const Mat3 W_inv = kinematics::euler_rate_map(state.euler()).inverse();
    Ta_inv.block<3, 3>(0, 0) = W_inv;
    Ta_inv.block<3, 3>(3, 3) = W_inv;
  } else {
    const Mat3 Rt = camera_pose(state, params).rotation.transpose();
    Ta_inv.block<3, 3>(0, 0) = Rt;
    Ta_inv.block<3, 3>(3, 3) = Rt;
  }
  return Ta_inv * J;
}

Vec8 control_torque(const GeneralizedState& state, const Vec6& e_a, const Mat68& J_L, const ControllerGains& gains,
                    const AcmParams& params) {
  return dynamics::gravity_vector(state, params) + J_L.transpose() * (gains.K_p * e_a - gains.K_d * (J_L * state.qdot));
}

Vec8 null_space_damping(const Mat68& J_L, const Vec8& qdot, double damping) {
  if (damping == 0.0) return Vec8::Zero();
  const Mat8 P = Mat8::Identity() - J_L.completeOrthogonalDecomposition().pseudoInverse() * J_L;
  return -damping * P.transpose() * (P * qdot);
}

double lyapunov_value(const GeneralizedState& state, const Vec6& e_a, const ControllerGains& gains,
                      const AcmParams& params, ModelMode mode) {
  return dynamics::kinetic_energy(state, params, mode) + 0.5 * e_a.dot(gains.K_p * e_a);
}

double PathSegment::length() const {
  return kind == Kind::kLine ? (end - start).norm() : radius() * std::abs(sweep);
}

double PathSegment::radius() const { return kind == Kind::kLine ? 0.0 : (start - center).norm(); }

TargetTrajectory::TargetTrajectory(std::vector<PathSegment> segments, TrajectoryOptions options)
    : segments_(std::move(segments)), options_(options) {
  if (segments_.empty()) throw ConfigError("path.segments", "at least one segment required");
  if (!(options_.ramp_time > 0.0)) throw ConfigError("path.ramp_time", "must be > 0");
  if (!(options_.hold_start >= 0.0)) throw ConfigError("path.hold_start", "must be >= 0");
  if (!(options_.square_side > 0.0)) throw ConfigError("path.square_side", "must be > 0");
  start_times_.push_back(options_.hold_start);
  for (std::size_t k = 0; k < segments_.size(); ++k) {
    auto& seg = segments_[k];
    const std::string field = "path.segments[" + std::to_string(k) + "]";
    if (!(seg.speed > 0.0) || !std::isfinite(seg.speed)) throw ConfigError(field + ".speed", "must be > 0");
    if (seg.kind == PathSegment::Kind::kArc) {
      if (!(seg.radius() > 0.0)) throw ConfigError(field + ".center", "arc radius must be > 0");
      seg.end = seg.center + rotate(seg.start - seg.center, seg.sweep);
    }
    const double len = seg.length();
    if (!(len > 0.0)) throw ConfigError(field, "segment has zero length");
    Profile p;
    p.ramp = options_.ramp_time;
    p.cruise = std::min(seg.speed, len / p.ramp);
    p.total = len / p.cruise + p.ramp;
    profiles_.push_back(p);
    start_times_.push_back(start_times_.back() + p.total);
  }
}

std::vector<Vec3> TargetTrajectory::points_at(const Vec3& c) const {
  const double h = 0.5 * options_.square_side;
  return {c + Vec3(-h, -h, 0.0), c + Vec3(h, -h, 0.0), c + Vec3(h, h, 0.0), c + Vec3(-h, h, 0.0)};
}

std::vector<double> TargetTrajectory::junction_times() const { return start_times_; }

TargetSample TargetTrajectory::sample(double t) const {
  TargetSample out;
  const auto place = [&](const Vec2& xy) { return Vec3(xy.x() + options_.origin.x(), xy.y() + options_.origin.y(), options_.plane_z); };
  if (!(t >= start_times_.front())) {
    out.position = place(segments_.front().start);
  } else if (t >= start_times_.back()) {
    out.position = place(segments_.back().end);
  } else {
    const std::size_t k = static_cast<std::size_t>(
        std::upper_bound(start_times_.begin(), start_times_.end(), t) - start_times_.begin() - 1);
    const PathSegment& seg = segments_[k];
    const Profile& p = profiles_[k];
    const double tau = t - start_times_[k];
    const double len = seg.length();
    Progress g;
    if (tau < p.ramp) {
      g = ramp_up(tau, p.cruise, p.ramp);
    } else if (tau <= p.total - p.ramp) {
      g = {0.5 * p.cruise * p.ramp + p.cruise * (tau - p.ramp), p.cruise, 0.0, 0.0};
    } else {
      const Progress r = ramp_up(p.total - tau, p.cruise, p.ramp);
      g = {len - r.s, r.v, -r.a, r.j};
    }
    out.segment = static_cast<int>(k);
    Vec2 pos, vel, acc, jerk;
    if (seg.kind == PathSegment::Kind::kLine) {
      const Vec2 dir = (seg.end - seg.start) / len;
      pos = seg.start + g.s * dir;
      vel = g.v * dir;
      acc = g.a * dir;
      jerk = g.j * dir;
    } else {
      const double R = seg.radius();
      const double sgn = seg.sweep >= 0.0 ? 1.0 : -1.0;
      const double phi0 = std::atan2(seg.start.y() - seg.center.y(), seg.start.x() - seg.center.x());
      const double phi = phi0 + sgn * g.s / R;
      const double w1 = sgn * g.v / R, w2 = sgn * g.a / R, w3 = sgn * g.j / R;
      const Vec2 radial(std::cos(phi), std::sin(phi)), tangent(-std::sin(phi), std::cos(phi));
      pos = seg.center + R * radial;
      vel = R * w1 * tangent;
      acc = R * (w2 * tangent - w1 * w1 * radial);
      jerk = R * (w3 * tangent - 3.0 * w1 * w2 * radial - w1 * w1 * w1 * tangent);
      out.curvature = 1.0 / R;
    }
    out.position = place(pos);
    out.velocity << vel, 0.0;
    out.acceleration << acc, 0.0;
    out.jerk << jerk, 0.0;
  }
  out.points = points_at(out.position);
  return out;
}

TargetTrajectory::Bounds TargetTrajectory::bounds(double step, double until) const {
  Bounds b;
  const double end = std::min(until, duration());
  const long n = static_cast<long>(std::ceil(end / step));
  for (long i = 0; i <= n; ++i) {
    const TargetSample s = sample(std::min(i * step, end));
    b.velocity = std::max(b.velocity, s.velocity.norm());
    b.acceleration = std::max(b.acceleration, s.acceleration.norm());
    b.jerk = std::max(b.jerk, s.jerk.norm());
  }
  return b;
}

std::vector<PathSegment> letter_segments(char letter, double speed) {
  std::vector<PathSegment> segs;
  switch (std::toupper(static_cast<unsigned char>(letter))) {
    case 'M':
      segs = {line({0, 0}, {0, 1}, speed), line({0, 1}, {0.5, 0.5}, speed), line({0.5, 0.5}, {1, 1}, speed),
              line({1, 1}, {1, 0}, speed)};
      break;
    case 'R':
      segs = {line({0, 0}, {0, 1}, speed), line({0, 1}, {0.55, 1}, speed),
              arc({0.55, 1}, {0.55, 0.75}, -std::numbers::pi, speed), line({0.55, 0.5}, {0, 0.5}, speed),
              line({0, 0.5}, {0.8, 0}, speed)};
      break;
    case 'A':
      segs = {line({0, 0}, {0.5, 1}, speed), line({0.5, 1}, {1, 0}, speed), line({1, 0}, {0.75, 0.5}, speed),
              line({0.75, 0.5}, {0.25, 0.5}, speed)};
      break;
    case 'L':
      segs = {line({0, 0}, {0, -1}, speed), line({0, -1}, {0.8, -1}, speed)};
      break;
    default:
      throw ConfigError("path", std::string("no built-in path for letter '") + letter + "'; use M, R, A or L");
  }
  return segs;
}

TargetTrajectory letter_path(char letter, TrajectoryOptions options) {
  return TargetTrajectory(letter_segments(letter), options);
}

TargetTrajectory parse_path_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("path", std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("path", "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (key != "segments" && key != "options") throw ConfigError("path." + key, "unknown key");
  }
  if (!j.contains("segments") || !j["segments"].is_array()) throw ConfigError("path.segments", "missing list");

  TrajectoryOptions opt;
  if (j.contains("options")) {
    for (const auto& [key, value] : j["options"].items()) {
      const std::string field = "path.options." + key;
      if (key == "plane_z") opt.plane_z = number(value, field);
      else if (key == "square_side") opt.square_side = number(value, field);
      else if (key == "ramp_time") opt.ramp_time = number(value, field);
      else if (key == "hold_start") opt.hold_start = number(value, field);
      else if (key == "origin") opt.origin = to_vec2(value, field);
      else throw ConfigError(field, "unknown key");
    }
  }

  std::vector<PathSegment> segs;
  for (std::size_t k = 0; k < j["segments"].size(); ++k) {
    const auto& s = j["segments"][k];
    const std::string field = "path.segments[" + std::to_string(k) + "]";
    if (!s.is_object() || !s.contains("type")) throw ConfigError(field + ".type", "missing");
    if (!s["type"].is_string()) throw ConfigError(field + ".type", "expected line or arc");
    const std::string type = s["type"].get<std::string>();
    const auto need = [&](const char* key) -> const nlohmann::json& {
      if (!s.contains(key)) throw ConfigError(field + "." + key, "missing");
      return s[key];
    };
    const double speed = s.contains("speed") ? number(s["speed"], field + ".speed") : 0.1;
    if (type == "line") {
      for (const auto& [key, value] : s.items()) {
        if (key != "type" && key != "start" && key != "end" && key != "speed") throw ConfigError(field + "." + key, "unknown key");
      }
      segs.push_back(line(to_vec2(need("start"), field + ".start"), to_vec2(need("end"), field + ".end"), speed));
    } else if (type == "arc") {
      for (const auto& [key, value] : s.items()) {
        if (key != "type" && key != "start" && key != "center" && key != "sweep" && key != "speed") {
          throw ConfigError(field + "." + key, "unknown key");
        }
      }
      segs.push_back(arc(to_vec2(need("start"), field + ".start"), to_vec2(need("center"), field + ".center"),
                         number(need("sweep"), field + ".sweep"), speed));
    } else {
      throw ConfigError(field + ".type", "expected line or arc, got '" + type + "'");
    }
  }
  return TargetTrajectory(std::move(segs), opt);
}

TargetTrajectory load_path_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("path", "cannot open " + file.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_path_json(text.str());
}

GeneralizedState ServoConfig::default_initial_state() {
  GeneralizedState st;
  st.q << 1.0 - std::cos(1.0), 0.0, 5.0, 0.0, 1.0, 0.0, 1.0, 0.0;
  return st;
}

void ServoConfig::validate() const {
  intrinsics.validate();
  gains.validate();
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw ConfigError("servo.horizon", "must be >= 0");
  if (!(control_dt > 0.0)) throw ConfigError("servo.control_dt", "must be > 0");
  if (substeps < 1) throw ConfigError("servo.substeps", "must be >= 1");
  if (!(null_damping >= 0.0) || !std::isfinite(null_damping)) throw ConfigError("servo.null_damping", "must be >= 0");
  if (!(desired_depth >= 0.0)) throw ConfigError("servo.desired_depth", "must be >= 0");
  if (!initial_state.q.allFinite() || !initial_state.qdot.allFinite()) {
    throw ConfigError("servo.initial_state", "must be finite");
  }
}

BoundSet bound_set(const ControllerGains& gains, const TargetTrajectory::Bounds& bounds) {
  BoundSet b;
  b.lambda = min_eigenvalue(gains.K_p) * min_eigenvalue(gains.C_p);
  b.r_max = spectral_norm(gains.C_d) * bounds.jerk + spectral_norm(gains.C_p) * bounds.acceleration +
            spectral_norm(gains.C_s) / gains.sigma * bounds.acceleration;
  const double kp = spectral_norm(gains.K_p);
  b.radius = kp * kp * b.r_max * b.r_max / (2.0 * b.lambda);
  return b;
}

LyapunovSummary lyapunov_summary(const ServoTrace& trace, double tol) {
  LyapunovSummary out;
  if (trace.V.empty()) return out;
  const double scale = std::max(*std::max_element(trace.V.begin(), trace.V.end()), 1e-300);
  for (std::size_t k = 0; k + 1 < trace.V.size(); ++k) {
    if (trace.in_bound_set[k]) continue;
    ++out.outside;
    const double rise = (trace.V[k + 1] - trace.V[k]) / scale;
    if (rise > tol) {
      ++out.increases;
      out.worst_increase = std::max(out.worst_increase, rise);
    }
  }
  return out;
}

ServoTrace run_servo(const TargetTrajectory& path, const ServoConfig& config, const AcmParams& params,
                     ModelMode mode, const std::string& name) {
  config.validate();
  params.validate();
  using Clock = std::chrono::steady_clock;
  const CameraIntrinsics& K = config.intrinsics;
  const ControllerGains& gains = config.gains;

  ServoTrace trace;
  trace.path_name = name;
  trace.mode = mode;
  trace.junctions = path.junction_times();

  GeneralizedState st = config.initial_state;
  st.q[idx::kPsiA] = kinematics::wrap_angle(st.q[idx::kPsiA]);

  const TargetSample start = path.sample(0.0);
  const Pose cam0 = camera_pose(st, params);
  Pose desired_pose;
  desired_pose.rotation = cam0.rotation;
  const double depth = config.desired_depth > 0.0 ? config.desired_depth : cam0.position.z() - path.options().plane_z;
  desired_pose.position = start.position + Vec3(0.0, 0.0, depth);
  const FeatureSet desired = project_all(start.points, desired_pose, K);

  const BoundSet bs = bound_set(gains, path.bounds(1e-3, config.horizon));
  const long periods = std::lround(config.horizon / config.control_dt);
  const double h = config.control_dt / config.substeps;

  Vec8 tau = dynamics::gravity_vector(st, params);
  VecX e_prev;
  for (long k = 0;; ++k) {
    const double t = k * config.control_dt;
    const auto wall0 = Clock::now();
    const TargetSample target = path.sample(t);
    const Pose cam = camera_pose(st, params);

    FeatureSet features;
    try {
      features = project_all(target.points, cam, K);
      for (int i = 0; i < features.count(); ++i) {
        const double u = features.s[2 * i], v = features.s[2 * i + 1];
        if (!(u >= 0.0 && u <= K.width && v >= 0.0 && v <= K.height)) {
          std::ostringstream msg;
          msg << "feature " << i << " left the image at (" << u << ", " << v << ") px";
          throw FeatureLossError(msg.str(), t);
        }
      }
    } catch (const FeatureLossError& e) {
      trace.loss_time = t;
      std::ostringstream msg;
      msg << name << " (" << to_string(mode) << "): " << e.what() << " at t = " << t << " s";
      trace.loss_message = msg.str();
      return trace;
    }

    const VecX e = servo_error(features, desired, K);
    const MatX L = interaction_matrix(features, K);
    const Mat68 J_L = task_jacobian(st, params, config.literal_ta);
    const Vec6 v_c = J_L * st.qdot;
    Vec6 v_t = Vec6::Zero();
    v_t.head<3>() = cam.rotation.transpose() * target.velocity;
    VecX edot = -L * (v_c - v_t);
    if (config.edot_mode == EdotMode::kBackDifference && e_prev.size() == e.size()) {
      edot = (e - e_prev) / config.control_dt;
    }
    e_prev = e;

    const Eigen::JacobiSVD<MatX> svd(L);
    const auto& sv = svd.singularValues();
    Vec6 e_a = Vec6::Zero();
    if (sv.size() < 6 || sv[5] < kRankTolerance * sv[0]) {
      ++trace.hold_events;
    } else {
      const MatX L_pinv = L.completeOrthogonalDecomposition().pseudoInverse();
      e_a = dpd_sm_term(L_pinv * e, L_pinv * edot, gains);
      tau = control_torque(st, e_a, J_L, gains, params) + null_space_damping(J_L, st.qdot, config.null_damping);
    }

    const double V = lyapunov_value(st, e_a, gains, params, mode);
    trace.t.push_back(t);
    trace.e.push_back(e);
    trace.e_norm_px.push_back(pixel_error_norm(features, desired));
    trace.V.push_back(V);
    trace.tau.push_back(tau);
    trace.states.push_back(st);
    trace.tip.push_back(cam.position);
    trace.target.push_back(target.position);
    trace.qdot_norm.push_back(st.qdot.norm());
    trace.path_curvature.push_back(target.curvature);
    trace.in_bound_set.push_back(0.5 * v_c.dot(gains.K_d * v_c) + bs.lambda * e_a.squaredNorm() <= bs.radius);
    if (k == periods) break;

    const sim::Forcing forcing{tau, dynamics::ExternalWrench::Zero()};
    dynamics::ChartState cs = dynamics::to_chart(st, params);
    for (int i = 0; i < config.substeps; ++i) {
      cs = dynamics::rebase(sim::rk4_step(cs, st, t + i * h, h, forcing, params, mode));
      st = dynamics::from_chart(cs, st, params);
    }
    trace.step_wall.push_back(std::chrono::duration<double>(Clock::now() - wall0).count());
  }
  trace.completed = true;
  return trace;
}

}  // namespace acm::servo
