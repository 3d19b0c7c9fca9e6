#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "acm/params.hpp"
#include "acm/types.hpp"

// Eye-in-hand image-based visual servoing of the arm tip. The camera frame is
// the tip frame: optical axis along the tip tangent, no offset. Features are
// the projections of four world points arranged as a square around a moving
// centroid.
namespace acm::servo {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// Features closer than this to the image plane count as lost [m].
inline constexpr double kMinDepth = 0.05;

struct CameraIntrinsics {
  double fx = 500.0;
  double fy = 500.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

struct Projection {
  double u = 0.0;  // [px]
  double v = 0.0;  // [px]
  double Z = 0.0;  // camera-frame depth [m]
};

// Pinhole projection, no distortion. Throws FeatureLossError (time NaN) when
// Z <= kMinDepth.
Projection project(const Vec3& world_point, const Pose& camera, const CameraIntrinsics& intrinsics);

// (u, v) -> ((u - c_x) / f_x, (v - c_y) / f_y).
Vec2 normalize(double u, double v, const CameraIntrinsics& intrinsics);

// Pixel coordinates s = (u_1, v_1, ..., u_N, v_N) and ground-truth depths.
struct FeatureSet {
  VecX s;
  VecX Z;

  int count() const { return static_cast<int>(Z.size()); }
  // Throws DimensionError / DomainError on inconsistent sizes or Z <= kMinDepth.
  void validate() const;
};

FeatureSet project_all(const std::vector<Vec3>& points, const Pose& camera, const CameraIntrinsics& intrinsics);

// Normalized coordinates (x_1, y_1, ..., x_N, y_N).
VecX normalized(const FeatureSet& features, const CameraIntrinsics& intrinsics);

// Stacked 2N x 6 matrix with d(normalized s)/dt = L v_c for a static scene,
// v_c = (linear, angular) camera twist in the camera frame.
MatX interaction_matrix(const FeatureSet& features, const CameraIntrinsics& intrinsics);

// e = s_d - s in normalized coordinates.
VecX servo_error(const FeatureSet& features, const FeatureSet& desired, const CameraIntrinsics& intrinsics);

// |s_d - s| in pixels.
double pixel_error_norm(const FeatureSet& features, const FeatureSet& desired);

struct ControllerGains {
  Mat6 K_p = 5.0 * Mat6::Identity();
  Mat6 K_d = 2.0 * Mat6::Identity();
  Mat6 C_p = Mat6::Identity();
  Mat6 C_d = 0.1 * Mat6::Identity();
  Mat6 C_s = 0.5 * Mat6::Identity();
  double sigma = 0.05;

  // Throws ConfigError unless all five matrices are symmetric positive
  // definite and sigma > 0.
  void validate() const;
};

// e_a = C_d edot + C_p e + C_s tanh(e / sigma), tanh elementwise. e and edot
// are the 6-dim task errors.
Vec6 dpd_sm_term(const Vec6& e, const Vec6& edot, const ControllerGains& gains);

// Reduction of the 2N image error to the 6-dim task error: L^+ e.
Vec6 task_error(const MatX& L, const VecX& e);

// Camera pose and J_L = T_a^-1 J_t, the map from qdot to the camera twist in
// camera coordinates. T_a^-1 is the block-diagonal camera <- inertial
// rotation; with literal_ta it is the inverse of blockdiag(W(Phi), W(Phi)).
Pose camera_pose(const GeneralizedState& state, const AcmParams& params);
Mat68 task_jacobian(const GeneralizedState& state, const AcmParams& params, bool literal_ta = false);

// tau = G + J_L^T (K_p e_a - K_d J_L qdot). Decoupling leaves G unchanged,
// so the law is the same for both models; the model only enters through the
// simulated plant and V.
Vec8 control_torque(const GeneralizedState& state, const Vec6& e_a, const Mat68& J_L, const ControllerGains& gains,
                    const AcmParams& params);

// -P^T D P qdot with P = I - J_L^+ J_L and D = damping I: damps the
// 2-dimensional self-motion that leaves the camera still and that the law
// above never sees. It is passive and independent of the model.
Vec8 null_space_damping(const Mat68& J_L, const Vec8& qdot, double damping);

// V = qdot^T M qdot / 2 + e_a^T K_p e_a / 2 with M of the given model.
double lyapunov_value(const GeneralizedState& state, const Vec6& e_a, const ControllerGains& gains,
                      const AcmParams& params, ModelMode mode);

// One line or circular-arc piece of a planar centroid path. Arcs run from
// `start` around `center` through the signed angle `sweep` (counter-clockwise
// positive); `end` is derived.
struct PathSegment {
  enum class Kind { kLine, kArc };
  Kind kind = Kind::kLine;
  Vec2 start = Vec2::Zero();
  Vec2 end = Vec2::Zero();
  Vec2 center = Vec2::Zero();
  double sweep = 0.0;   // [rad]
  double speed = 0.1;   // nominal cruise speed [m/s]

  double length() const;
  double radius() const;
};

struct TrajectoryOptions {
  double plane_z = 3.0;       // height of the target plane [m]
  double square_side = 0.3;   // edge of the square of world points [m]
  double ramp_time = 1.0;     // speed ramp at each segment end [s]
  double hold_start = 1.0;    // initial dwell before the first segment [s]
  Vec2 origin = Vec2::Zero(); // added to every path coordinate [m]
};

struct TargetSample {
  Vec3 position = Vec3::Zero();  // centroid, inertial
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
  Vec3 jerk = Vec3::Zero();
  std::vector<Vec3> points;      // the four world points
  double curvature = 0.0;        // path curvature at the current point [1/m]
  int segment = -1;              // -1 while holding at the start or after the end
};

// Piecewise path traversed segment by segment. Within each segment the speed
// rises from 0 to the cruise value over ramp_time with a raised-cosine
// profile, cruises, and falls back to 0, so the centroid stops at every
// junction and velocity and acceleration are continuous everywhere.
class TargetTrajectory {
 public:
  TargetTrajectory(std::vector<PathSegment> segments, TrajectoryOptions options = {});

  TargetSample sample(double t) const;
  std::vector<Vec3> points_at(const Vec3& centroid) const;

  double duration() const { return start_times_.back(); }
  const std::vector<PathSegment>& segments() const { return segments_; }
  const TrajectoryOptions& options() const { return options_; }
  // Times at which a segment begins or ends.
  std::vector<double> junction_times() const;

  struct Bounds {
    double velocity = 0.0;
    double acceleration = 0.0;
    double jerk = 0.0;
  };
  // Maxima over [0, until], sampled every `step` seconds.
  Bounds bounds(double step = 1e-3, double until = std::numeric_limits<double>::infinity()) const;

 private:
  struct Profile {
    double cruise = 0.0;
    double ramp = 0.0;
    double total = 0.0;
  };

  std::vector<PathSegment> segments_;
  TrajectoryOptions options_;
  std::vector<Profile> profiles_;
  std::vector<double> start_times_;  // segment k runs over [start_times_[k], start_times_[k + 1])
};

// Centroid paths of the letters M, R, A and L inside a 1 m box, starting at
// the path origin.
std::vector<PathSegment> letter_segments(char letter, double speed = 0.1);
TargetTrajectory letter_path(char letter, TrajectoryOptions options = {});

// JSON path file: {"segments": [{"type": "line", "start": [x, y], "end": [x, y], "speed": v},
// {"type": "arc", "start": [x, y], "center": [x, y], "sweep": rad, "speed": v}, ...],
// "options": {...TrajectoryOptions fields...}}. Throws ConfigError.
TargetTrajectory load_path_json(const std::filesystem::path& file);
TargetTrajectory parse_path_json(const std::string& text);

enum class EdotMode { kAnalytic, kBackDifference };

struct ServoConfig {
  CameraIntrinsics intrinsics;
  ControllerGains gains;
  double horizon = 50.0;       // [s]
  double control_dt = 1e-4;    // zero-order-hold period [s]
  int substeps = 1;            // RK4 steps per control period
  EdotMode edot_mode = EdotMode::kAnalytic;
  bool literal_ta = false;
  double null_damping = 1.0;   // 0 leaves the self-motion undamped
  GeneralizedState initial_state = default_initial_state();
  // Feature depth in the desired image; 0 uses the initial tip height above
  // the target plane.
  double desired_depth = 0.0;

  // Hover at 5 m with the arm bent to kappa = 1 and the base pitched by 1 rad,
  // so that for the default 1 m arm the camera sits at (0, 0, 4.16) looking
  // straight down. A straight arm would leave psi_a without inertia.
  static GeneralizedState default_initial_state();
  void validate() const;
};

struct ServoTrace {
  std::string path_name;
  ModelMode mode = ModelMode::kCoupled;
  std::vector<double> t;
  std::vector<VecX> e;             // normalized image error
  std::vector<double> e_norm_px;
  std::vector<double> V;
  std::vector<Vec8> tau;
  std::vector<GeneralizedState> states;
  std::vector<Vec3> tip;
  std::vector<Vec3> target;        // centroid
  std::vector<double> qdot_norm;
  std::vector<double> path_curvature;
  std::vector<bool> in_bound_set;  // inside the ultimate-bound set
  std::vector<double> step_wall;   // controller + integration per period [s]
  std::vector<double> junctions;   // target path junction times
  int hold_events = 0;             // rank-deficient L, previous tau held
  bool completed = false;
  double loss_time = -1.0;
  std::string loss_message;

  std::size_t size() const { return t.size(); }
};

// Constants of the ultimate-bound set
// {v_c^T K_d v_c / 2 + lambda |e_a|^2 <= |K_p|^2 R_max^2 / (2 lambda)} with
// R_max = |C_d| L_3 + |C_p| L_2 + |C_s| L_2 / sigma and the proxy
// lambda = lambda_min(K_p) lambda_min(C_p).
struct BoundSet {
  double lambda = 0.0;
  double r_max = 0.0;
  double radius = 0.0;  // |K_p|^2 R_max^2 / (2 lambda)
};
BoundSet bound_set(const ControllerGains& gains, const TargetTrajectory::Bounds& bounds);

struct LyapunovSummary {
  std::size_t outside = 0;      // samples outside the bound set
  std::size_t increases = 0;    // of those, followed by an increase of V
  double worst_increase = 0.0;  // relative to max V
};
// Relative tolerance `tol` (times max V) absorbs rounding.
LyapunovSummary lyapunov_summary(const ServoTrace& trace, double tol = 1e-9);

// Closed-loop run. Feature loss ends the run with completed = false and the
// loss recorded; the trace up to that point is returned.
ServoTrace run_servo(const TargetTrajectory& path, const ServoConfig& config, const AcmParams& params,
                     ModelMode mode, const std::string& name = "path");

}  // namespace acm::servo
