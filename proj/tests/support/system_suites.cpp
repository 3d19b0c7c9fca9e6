#include <Eigen/Geometry>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

#include "acm/analysis.hpp"
#include "acm/parallel.hpp"
#include "acm/servo.hpp"
#include "acm/simulation.hpp"
#include "acm/verify/oracles.hpp"
#include "acm/verify/suites.hpp"

namespace acm::verify {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string join_values(const std::vector<double>& v) {
  std::ostringstream s;
  for (std::size_t i = 0; i < v.size(); ++i) s << (i ? ", " : "") << v[i];
  return s.str();
}

Eigen::Matrix<double, 16, 1> terminal_state(const AcmParams& params, ModelMode mode, double duration, double dt) {
  sim::Scenario sc = sim::builtin_scenario("testB");
  sc.duration = duration;
  sc.dt = dt;
  const auto tr = sim::run(sc, params, mode);
  Eigen::Matrix<double, 16, 1> x;
  x << tr.states.back().q, tr.states.back().qdot;
  return x;
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] < v[i - 1])) return false;
  }
  return true;
}

bool strictly_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1])) return false;
  }
  return true;
}

}  // namespace

SuiteResult conservation_suite(const AcmParams& params) {
  const auto t0 = Clock::now();
  SuiteResult r;
  r.name = "conservation";
  sim::Scenario sc = sim::builtin_scenario("testB");
  sc.duration = 1.0;
  sc.dt = 1e-4;
  const auto pair = sim::run_both(sc, params, 1);
  const double drift_c = analysis::energy_audit(pair.coupled);
  const double drift_d = analysis::energy_audit(pair.decoupled);

  // Terminal-state error at dt and dt / 2 against a dt / 16 reference.
  double order_min = INFINITY, order_max = -INFINITY;
  for (ModelMode mode : {ModelMode::kCoupled, ModelMode::kDecoupled}) {
    for (double dt : {2e-3, 1e-3}) {
      const auto ref = terminal_state(params, mode, 0.02, dt / 16);
      const double e1 = (terminal_state(params, mode, 0.02, dt) - ref).norm();
      const double e2 = (terminal_state(params, mode, 0.02, dt / 2) - ref).norm();
      const double order = std::log2(e1 / e2);
      order_min = std::min(order_min, order);
      order_max = std::max(order_max, order);
    }
  }
  r.seconds = seconds_since(t0);
  r.metrics = {{"drift_coupled", drift_c}, {"drift_decoupled", drift_d}, {"order_min", order_min},
               {"order_max", order_max}, {"seconds", r.seconds}};
  r.pass = drift_c < 1e-6 && drift_d < 1e-6 && order_min >= 3.7 && order_max <= 4.3;
  return r;
}

SuiteResult coupling_limit_suite(const AcmParams& params, int jobs) {
  const auto t0 = Clock::now();
  SuiteResult r;
  r.name = "coupling_limit";
  const std::vector<double> scales = {1.0, 1e-1, 1e-2, 1e-3};
  std::vector<double> gaps(scales.size(), NAN);
  std::vector<std::string> errors(scales.size());
  parallel_for(scales.size(), jobs, [&](std::size_t i) {
    AcmParams p = params;
    p.rho *= scales[i];
    try {
      const auto pair = sim::run_both(sim::builtin_scenario("testC"), p, 1);
      gaps[i] = (pair.coupled.tip_position.back() - pair.decoupled.tip_position.back()).norm();
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  bool ok = true;
  for (std::size_t i = 0; i < scales.size(); ++i) {
    r.metrics.emplace_back("gap_rho_x" + std::to_string(i), gaps[i]);
    if (!errors[i].empty()) {
      ok = false;
      r.detail += "rho scale " + std::to_string(scales[i]) + ": " + errors[i] + "; ";
    }
  }
  const bool monotone = ok && strictly_decreasing(gaps);
  const bool small = ok && gaps.back() < 1e-5;
  r.detail += "terminal tip gaps [m]: " + join_values(gaps) + (monotone ? "; decreasing" : "; not decreasing") +
              (small ? "" : "; smallest-scale gap not below 1e-5 m");
  r.seconds = seconds_since(t0);
  r.metrics.emplace_back("seconds", r.seconds);
  r.pass = monotone && small;
  return r;
}

SuiteResult open_loop_ordering_suite(const AcmParams& params, int jobs) {
  const auto t0 = Clock::now();
  SuiteResult r;
  r.name = "open_loop_ordering";
  const std::vector<std::string> names = {"testA", "testB", "testC", "testD"};
  std::vector<double> nt(names.size()), nr(names.size());
  parallel_for(names.size(), jobs, [&](std::size_t i) {
    const auto pair = sim::run_both(sim::builtin_scenario(names[i]), params, 1);
    nt[i] = analysis::nrmse(pair.coupled, pair.decoupled, analysis::Channel::kTranslation);
    nr[i] = analysis::nrmse(pair.coupled, pair.decoupled, analysis::Channel::kRotation);
  });
  for (std::size_t i = 0; i < names.size(); ++i) {
    r.metrics.emplace_back("nrmse_T_" + names[i], nt[i]);
    r.metrics.emplace_back("nrmse_R_" + names[i], nr[i]);
  }
  const auto argmax = [](const std::vector<double>& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
  };
  const bool t_ok = argmax(nt) == 2;
  const bool r_ok = argmax(nr) == 0;
  bool nonzero = true;
  for (std::size_t i = 0; i < names.size(); ++i) nonzero = nonzero && nt[i] > 0.0 && nr[i] > 0.0;
  r.seconds = seconds_since(t0);
  r.metrics.emplace_back("seconds", r.seconds);
  r.detail = "largest translational: " + names[argmax(nt)] + ", largest rotational: " + names[argmax(nr)];
  r.pass = t_ok && r_ok && nonzero && r.seconds < 300.0;
  return r;
}

std::vector<AxisOutcome> sweep_outcomes(const AcmParams& params, int jobs) {
  using sim::SweepAxis;
  const std::vector<SweepAxis> axes = {SweepAxis::kRadius,       SweepAxis::kUavMass, SweepAxis::kArmLength,
                                       SweepAxis::kYoungModulus, SweepAxis::kKappa0,  SweepAxis::kPhi0};
  std::vector<AxisOutcome> out;
  for (SweepAxis axis : axes) {
    const auto base = sim::builtin_scenario(axis == SweepAxis::kKappa0 ? "testE_bending" : "sweep_wrench");
    AxisOutcome o;
    o.axis = sim::to_string(axis);
    for (const auto& entry : sim::parameter_sweep(base, params, axis, sim::default_sweep_values(axis), jobs)) {
      o.values.push_back(entry.value);
      if (!entry.traces) {
        o.displacement.push_back(NAN);
        o.gap.push_back(NAN);
        continue;
      }
      o.displacement.push_back(analysis::tip_displacement(entry.traces->coupled));
      o.gap.push_back(analysis::tip_gap_rms(entry.traces->coupled, entry.traces->decoupled));
    }
    const auto [lo, hi] = std::minmax_element(o.gap.begin(), o.gap.end());
    o.spread = *hi - *lo;
    out.push_back(std::move(o));
  }
  return out;
}

SuiteResult sweep_direction_suite(const AcmParams& params, int jobs) {
  const auto t0 = Clock::now();
  SuiteResult r;
  r.name = "sweep_directions";
  const auto outcomes = sweep_outcomes(params, jobs);
  const auto find = [&](const std::string& axis) -> const AxisOutcome& {
    return *std::find_if(outcomes.begin(), outcomes.end(), [&](const AxisOutcome& o) { return o.axis == axis; });
  };
  // Value lists are ascending for every axis except E.
  const bool radius = strictly_decreasing(find("r_a").displacement);
  const bool mass = strictly_decreasing(find("m_u").displacement);
  const bool kappa = strictly_increasing(find("kappa0").gap);
  const bool roll = strictly_increasing(find("phi0").gap);
  const AxisOutcome* smallest = &outcomes.front();
  for (const auto& o : outcomes) {
    if (o.spread < smallest->spread) smallest = &o;
  }
  const bool e_smallest = smallest->axis == "E";

  std::ostringstream detail;
  for (const auto& o : outcomes) {
    r.metrics.emplace_back("spread_" + o.axis, o.spread);
    detail << o.axis << ": displacement [" << join_values(o.displacement) << "] gap [" << join_values(o.gap)
           << "]; ";
  }
  detail << "smallest gap spread: " << smallest->axis;
  r.metrics.emplace_back("displacement_falls_with_r_a", radius);
  r.metrics.emplace_back("displacement_falls_with_m_u", mass);
  r.metrics.emplace_back("E_smallest_spread", e_smallest);
  r.metrics.emplace_back("gap_grows_with_kappa0", kappa);
  r.metrics.emplace_back("gap_grows_with_phi0", roll);
  r.seconds = seconds_since(t0);
  r.metrics.emplace_back("seconds", r.seconds);
  r.detail = detail.str();
  r.pass = radius && mass && e_smallest && kappa && roll;
  return r;
}

namespace {

// Camera displaced by a camera-frame twist (v, w) applied for unit time.
Pose displaced(const Pose& camera, const Vec6& twist) {
  Pose out;
  const Vec3 w = twist.tail<3>();
  const Mat3 dR = w.norm() > 0.0 ? Mat3(Eigen::AngleAxisd(w.norm(), w.normalized())) : Mat3::Identity();
  out.rotation = camera.rotation * dR;
  out.position = camera.position + camera.rotation * twist.head<3>();
  return out;
}

struct MatrixCheck {
  double c_max = 0.0;     // max |ds - L d| / |d|^2 over |d| in {1e-3, 1e-4}
  double rel_err = 0.0;   // max |ds - L d| / |L d| at |d| = 1e-5
};

MatrixCheck interaction_matrix_check(std::uint64_t seed, int samples) {
  StateSampler rng(seed);
  servo::CameraIntrinsics K;
  MatrixCheck out;
  for (int n = 0; n < samples; ++n) {
    Pose cam;
    cam.position = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(2, 4));
    const Vec3 axis = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)).normalized();
    cam.rotation = Mat3(Eigen::AngleAxisd(rng.uniform(-0.5, 0.5), axis)) * ry(std::numbers::pi);
    std::vector<Vec3> points;
    for (int i = 0; i < 4; ++i) {
      const double Z = rng.uniform(1.0, 3.0);
      const Vec3 pc(rng.uniform(-0.4, 0.4) * Z, rng.uniform(-0.3, 0.3) * Z, Z);
      points.push_back(cam.position + cam.rotation * pc);
    }
    const auto f0 = servo::project_all(points, cam, K);
    const servo::VecX s0 = servo::normalized(f0, K);
    const servo::MatX L = servo::interaction_matrix(f0, K);
    Vec6 dir;
    for (int i = 0; i < 6; ++i) dir[i] = rng.uniform(-1, 1);
    dir.normalize();
    for (double h : {1e-3, 1e-4, 1e-5}) {
      const Vec6 d = h * dir;
      const servo::VecX ds = servo::normalized(servo::project_all(points, displaced(cam, d), K), K) - s0;
      const double res = (ds - L * d).norm();
      if (h > 1e-5) {
        out.c_max = std::max(out.c_max, res / (h * h));
      } else {
        out.rel_err = std::max(out.rel_err, res / (L * d).norm());
      }
    }
  }
  return out;
}

}  // namespace

SuiteResult ibvs_suite(std::uint64_t seed, const AcmParams& params, int jobs) {
  const auto t0 = Clock::now();
  SuiteResult r;
  r.name = "ibvs";
  const MatrixCheck lm = interaction_matrix_check(seed, 200);

  // Static target: the centroid holds 5 cm off the point under the initial
  // camera for the whole horizon.
  servo::ServoConfig cfg;
  cfg.horizon = 20.0;
  servo::TrajectoryOptions opt;
  opt.origin = Vec2(0.05, 0.0);
  opt.hold_start = cfg.horizon + 1.0;
  const servo::TargetTrajectory path(servo::letter_segments('L'), opt);
  const std::vector<ModelMode> modes = {ModelMode::kCoupled, ModelMode::kDecoupled};
  std::vector<servo::ServoTrace> traces(modes.size());
  parallel_for(modes.size(), jobs, [&](std::size_t i) { traces[i] = servo::run_servo(path, cfg, params, modes[i]); });

  bool converged = true, monotone = true;
  std::ostringstream detail;
  detail << "interaction matrix: c_max " << lm.c_max << ", rel err at 1e-5 " << lm.rel_err << "; ";
  for (const auto& tr : traces) {
    const std::string m = to_string(tr.mode);
    const auto ly = servo::lyapunov_summary(tr);
    const double e0 = tr.e_norm_px.front(), e_end = tr.e_norm_px.back();
    const auto below = std::find_if(tr.e_norm_px.begin(), tr.e_norm_px.end(), [](double e) { return e < 1.0; });
    const double t_below = below == tr.e_norm_px.end() ? NAN : tr.t[below - tr.e_norm_px.begin()];
    converged = converged && tr.completed && e_end < 1.0;
    monotone = monotone && ly.increases == 0;
    r.metrics.emplace_back("e0_px_" + m, e0);
    r.metrics.emplace_back("final_e_px_" + m, e_end);
    r.metrics.emplace_back("t_below_1px_" + m, t_below);
    r.metrics.emplace_back("V_outside_" + m, static_cast<double>(ly.outside));
    r.metrics.emplace_back("V_increases_" + m, static_cast<double>(ly.increases));
    r.metrics.emplace_back("V_worst_rise_" + m, ly.worst_increase);
    detail << m << ": |e| " << e0 << " -> " << e_end << " px, below 1 px at t = " << t_below << " s, V rises on "
           << ly.increases << " of " << ly.outside << " samples outside the bound set; ";
  }
  const bool matrix_ok = lm.rel_err < 1e-3 && lm.c_max < 100.0;
  r.metrics.insert(r.metrics.begin(), {{"lmat_c_max", lm.c_max}, {"lmat_rel_err", lm.rel_err}});
  r.metrics.emplace_back("matrix_ok", matrix_ok);
  r.metrics.emplace_back("converged", converged);
  r.metrics.emplace_back("V_monotone_outside", monotone);
  r.seconds = seconds_since(t0);
  r.metrics.emplace_back("seconds", r.seconds);
  r.detail = detail.str();
  r.pass = matrix_ok && converged && monotone;
  return r;
}

SuiteResult letter_suite(const AcmParams& params, int jobs) {
  const auto t0 = Clock::now();
  SuiteResult r;
  r.name = "letters";
  const std::string letters = "MRAL";
  const servo::ServoConfig cfg;
  std::vector<servo::ServoTrace> traces(2 * letters.size());
  parallel_for(traces.size(), jobs, [&](std::size_t i) {
    const char letter = letters[i / 2];
    const ModelMode mode = i % 2 == 0 ? ModelMode::kCoupled : ModelMode::kDecoupled;
    traces[i] = servo::run_servo(servo::letter_path(letter), cfg, params, mode, std::string(1, letter));
  });

  bool complete = true, small = true, attributed = true;
  std::ostringstream detail;
  for (std::size_t k = 0; k < letters.size(); ++k) {
    const auto& c = traces[2 * k];
    const auto& d = traces[2 * k + 1];
    const std::string name(1, letters[k]);
    complete = complete && c.completed && d.completed;
    const auto ds = analysis::summarize_ds(c, d, servo::TrajectoryOptions{}.ramp_time);
    small = small && ds.max_abs < 0.7;
    attributed = attributed && !ds.peaks.empty() && ds.attributed == ds.peaks.size();
    r.metrics.emplace_back("max_ds_px_" + name, ds.max_abs);
    r.metrics.emplace_back("peaks_attributed_" + name, static_cast<double>(ds.attributed));
    r.metrics.emplace_back("peaks_" + name, static_cast<double>(ds.peaks.size()));
    detail << name << ": " << (c.completed ? "" : "coupled lost ") << (d.completed ? "" : "decoupled lost ")
           << "max |DS| " << ds.max_abs << " px at " << ds.t_max << " s, " << ds.attributed << "/" << ds.peaks.size()
           << " peaks at corners or high curvature; ";
  }
  r.metrics.emplace_back("completed", complete);
  r.metrics.emplace_back("ds_below_0.7", small);
  r.metrics.emplace_back("peaks_attributed", attributed);
  r.seconds = seconds_since(t0);
  r.metrics.emplace_back("seconds", r.seconds);
  r.detail = detail.str();
  r.pass = complete && small && attributed;
  return r;
}

SuiteResult performance_suite(const AcmParams& params) {
  const auto t0 = Clock::now();
  SuiteResult r;
  r.name = "performance";
  sim::Scenario sc = sim::builtin_scenario("testB");
  sc.dt = 1e-4;
  sc.duration = (1e4 + analysis::kWarmupSteps) * sc.dt;
  const auto c = analysis::timing_stats(sim::run(sc, params, ModelMode::kCoupled));
  const auto d = analysis::timing_stats(sim::run(sc, params, ModelMode::kDecoupled));
  const double ratio = c.median / d.median;
  r.seconds = seconds_since(t0);
  r.metrics = {{"steps", static_cast<double>(c.steps)},
               {"median_coupled_s", c.median},
               {"median_decoupled_s", d.median},
               {"ratio", ratio},
               {"reference_ratio", analysis::kReferenceCostRatio},
               {"seconds", r.seconds}};
  r.pass = d.median < c.median;
  return r;
}

}  // namespace acm::verify
