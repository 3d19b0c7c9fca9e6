#include "acm/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

#include "acm/errors.hpp"
#include "acm/kinematics.hpp"
#include "acm/parallel.hpp"

namespace acm::sim {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_index(int index, int dim, const char* what) {
  if (index < 0 || index >= dim) {
    throw ConfigError(what, "component index " + std::to_string(index) + " outside [0, " + std::to_string(dim) + ")");
  }
}

}  // namespace

WrenchProfile::WrenchProfile(int dim, Kind kind) : dim_(dim), kind_(std::move(kind)) {
  std::visit(Overloaded{
                 [](const ZeroProfile&) {},
                 [&](const ConstantProfile& p) {
                   if (p.value.size() != dim_) throw ConfigError("profile.value", "length must be " + std::to_string(dim_));
                 },
                 [&](const SinusoidProfile& p) {
                   for (const auto& term : p.terms) check_index(term.index, dim_, "profile.terms");
                 },
                 [&](const ChirpProfile& p) {
                   for (const auto& term : p.terms) check_index(term.index, dim_, "profile.terms");
                   if (p.offset.size() != 0 && p.offset.size() != dim_) {
                     throw ConfigError("profile.offset", "length must be " + std::to_string(dim_));
                   }
                   if (!(p.sweep_time > 0.0)) throw ConfigError("profile.sweep_time", "must be > 0");
                 },
                 [&](const PiecewiseRotatingProfile& p) {
                   check_index(p.index_x, dim_, "profile.index_x");
                   check_index(p.index_y, dim_, "profile.index_y");
                 },
                 [&](const TableProfile& p) {
                   if (p.times.empty() || p.times.size() != p.values.size()) {
                     throw ConfigError("profile.table", "times and values must be non-empty and of equal length");
                   }
                   for (std::size_t i = 0; i < p.times.size(); ++i) {
                     if (p.values[i].size() != dim_) {
                       throw ConfigError("profile.table", "row length must be " + std::to_string(dim_));
                     }
                     if (i > 0 && !(p.times[i] > p.times[i - 1])) {
                       throw ConfigError("profile.table", "times must be strictly increasing");
                     }
                   }
                 },
             },
             kind_);
}

Eigen::VectorXd WrenchProfile::operator()(double t) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim_);
  std::visit(Overloaded{
                 [](const ZeroProfile&) {},
                 [&](const ConstantProfile& p) { out = p.value; },
                 [&](const SinusoidProfile& p) {
                   for (const auto& term : p.terms) out[term.index] += term.amplitude * std::sin(term.omega * t + term.phase);
                 },
                 [&](const ChirpProfile& p) {
                   if (p.offset.size() == dim_) out = p.offset;
                   const double arg = 2.0 * std::numbers::pi * (p.f0 * t + (p.f1 - p.f0) / (2.0 * p.sweep_time) * t * t);
                   for (const auto& term : p.terms) out[term.index] += term.amplitude * std::sin(arg + term.phase);
                 },
                 [&](const PiecewiseRotatingProfile& p) {
                   const double c = std::cos(p.omega * t), s = std::sin(p.omega * t);
                   if (t <= p.switch_time) {
                     out[p.index_x] = p.amplitude * s;
                     out[p.index_y] = -p.amplitude * c;
                   } else {
                     out[p.index_x] = p.amplitude * c;
                     out[p.index_y] = p.amplitude * s;
                   }
                 },
                 [&](const TableProfile& p) {
                   if (t <= p.times.front()) {
                     out = p.values.front();
                   } else if (t >= p.times.back()) {
                     out = p.values.back();
                   } else {
                     const auto it = std::upper_bound(p.times.begin(), p.times.end(), t);
                     const std::size_t i = static_cast<std::size_t>(it - p.times.begin());
                     const double w = (t - p.times[i - 1]) / (p.times[i] - p.times[i - 1]);
                     out = (1.0 - w) * p.values[i - 1] + w * p.values[i];
                   }
                 },
             },
             kind_);
  return out;
}

std::string WrenchProfile::kind_name() const {
  static const char* names[] = {"zero", "constant", "sinusoid", "chirp", "piecewise_rotating", "table"};
  return names[kind_.index()];
}

const char* to_string(RunMode mode) {
  switch (mode) {
    case RunMode::kCoupled: return "coupled";
    case RunMode::kDecoupled: return "decoupled";
    default: return "both";
  }
}

RunMode run_mode_from_string(const std::string& name) {
  if (name == "coupled") return RunMode::kCoupled;
  if (name == "decoupled") return RunMode::kDecoupled;
  if (name == "both") return RunMode::kBoth;
  throw ConfigError("model", "expected coupled, decoupled or both, got '" + name + "'");
}

Forcing Scenario::forcing(double t) const {
  Forcing f;
  f.tau = actuation(t);
  f.wrench = external(t);
  return f;
}

void Scenario::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt", "must be > 0");
  if (!(duration >= 0.0) || !std::isfinite(duration)) throw ConfigError("duration", "must be >= 0");
  if (duration > 0.0 && duration < dt) throw ConfigError("duration", "must be >= dt");
  if (actuation.dim() != 8) throw ConfigError("actuation", "must have 8 components");
  if (external.dim() != 6) throw ConfigError("external", "must have 6 components");
  if (!initial_state.q.allFinite() || !initial_state.qdot.allFinite()) {
    throw ConfigError("initial_state", "entries must be finite");
  }
}

namespace {

GeneralizedState open_loop_start() {
  GeneralizedState st;
  st.q << 0, 0, 5, 0, 0, 0, 0.1, 0;
  return st;
}

}  // namespace

const std::vector<std::string>& builtin_scenario_names() {
  static const std::vector<std::string> names = {"testA", "testB", "testC", "testD", "testE_bending", "sweep_wrench"};
  return names;
}

Scenario builtin_scenario(const std::string& name) {
  Scenario sc;
  sc.name = name;
  sc.initial_state = open_loop_start();
  sc.duration = 1.0;
  if (name == "testA") {
    Eigen::VectorXd tau = Eigen::VectorXd::Zero(8);
    tau[0] = 100.0;
    sc.actuation = WrenchProfile(8, ConstantProfile{tau});
  } else if (name == "testB") {
  } else if (name == "testC") {
    SinusoidProfile p;
    p.terms = {{idx::kKappa, 0.1, 20.0, std::numbers::pi / 4}, {idx::kPsiA, 0.1, 20.0, std::numbers::pi / 2}};
    sc.actuation = WrenchProfile(8, p);
  } else if (name == "testD") {
    ChirpProfile p;
    p.f0 = 1.0;
    p.f1 = 1.0;
    p.sweep_time = 10.0;
    p.terms = {{0, 10.0, std::numbers::pi / 4}, {1, 10.0, 0.0}};
    p.offset = Eigen::VectorXd::Zero(6);
    p.offset[2] = 25.0;
    sc.external = WrenchProfile(6, p);
  } else if (name == "testE_bending") {
    sc.initial_state.q[idx::kKappa] = 1.0;
  } else if (name == "sweep_wrench") {
    sc.duration = 5.0;
    sc.actuation = WrenchProfile(8, PiecewiseRotatingProfile{});
  } else {
    std::ostringstream msg;
    msg << "unknown scenario '" << name << "'; valid names:";
    for (const auto& n : builtin_scenario_names()) msg << ' ' << n;
    throw ConfigError("scenario", msg.str());
  }
  return sc;
}

namespace {

using dynamics::ChartState;

struct Derivative {
  Vec8 zdot;
  Vec8 zddot;
};

Derivative derivative(const ChartState& st, const GeneralizedState& hint, const Forcing& f, const AcmParams& params,
                      ModelMode mode) {
  return {st.zdot, dynamics::forward_dynamics(st, hint, f.tau, f.wrench, params, mode)};
}

[[noreturn]] void blowup(double t, const char* where) {
  std::ostringstream msg;
  msg << "non-finite state " << where << " at t = " << t;
  throw IntegrationBlowupError(msg.str(), t, -1);
}

ChartState advance(const ChartState& st, const Derivative& d, double h, double t) {
  ChartState out = st;
  out.z = st.z + h * d.zdot;
  out.zdot = st.zdot + h * d.zddot;
  if (!out.z.allFinite() || !out.zdot.allFinite()) blowup(t, "inside step");
  return out;
}

template <class ForcingAt>
ChartState rk4_impl(const ChartState& st, const GeneralizedState& hint, double t, double dt, ForcingAt&& forcing_at,
                        const AcmParams& params, ModelMode mode) {
  const Forcing f0 = forcing_at(t);
  const Forcing fh = forcing_at(t + 0.5 * dt);
  const Forcing f1 = forcing_at(t + dt);
  const Derivative k1 = derivative(st, hint, f0, params, mode);
  const Derivative k2 = derivative(advance(st, k1, 0.5 * dt, t), hint, fh, params, mode);
  const Derivative k3 = derivative(advance(st, k2, 0.5 * dt, t), hint, fh, params, mode);
  const Derivative k4 = derivative(advance(st, k3, dt, t), hint, f1, params, mode);

  ChartState out = st;
  out.z = st.z + dt / 6.0 * (k1.zdot + 2.0 * k2.zdot + 2.0 * k3.zdot + k4.zdot);
  out.zdot = st.zdot + dt / 6.0 * (k1.zddot + 2.0 * k2.zddot + 2.0 * k3.zddot + k4.zddot);
  if (!out.z.allFinite() || !out.zdot.allFinite()) blowup(t, "after step");
  return out;
}

}  // namespace

ChartState rk4_step(const ChartState& state, const GeneralizedState& hint, double t, double dt, const ForcingFn& forcing,
                        const AcmParams& params, ModelMode mode) {
  return rk4_impl(state, hint, t, dt, forcing, params, mode);
}

ChartState rk4_step(const ChartState& state, const GeneralizedState& hint, double t, double dt, const Forcing& forcing,
                        const AcmParams& params, ModelMode mode) {
  return rk4_impl(state, hint, t, dt, [&](double) -> const Forcing& { return forcing; }, params, mode);
}

GeneralizedState rk4_step(const GeneralizedState& state, double t, double dt, const ForcingFn& forcing,
                          const AcmParams& params, ModelMode mode) {
  const ChartState next = rk4_step(dynamics::to_chart(state, params), state, t, dt, forcing, params, mode);
  return dynamics::from_chart(next, state, params);
}

GeneralizedState rk4_step(const GeneralizedState& state, double t, double dt, const Forcing& forcing,
                          const AcmParams& params, ModelMode mode) {
  const ChartState next = rk4_step(dynamics::to_chart(state, params), state, t, dt, forcing, params, mode);
  return dynamics::from_chart(next, state, params);
}

void append_record(SimTrace& trace, double t, const GeneralizedState& state, const AcmParams& params,
                   double step_wall) {
  append_record(trace, t, state, params, dynamics::kinetic_energy(state, params, trace.mode),
                dynamics::potential_energy(state, params), step_wall);
}

void append_record(SimTrace& trace, double t, const GeneralizedState& state, const AcmParams& params, double K,
                   double U, double step_wall) {
  const Pose tip = kinematics::tip_pose(state, params);
  const Mat3 attitude = kinematics::tip_attitude(state, params);
  const Vec3 rv = trace.tip_rotvec.empty() ? kinematics::rotation_vector(attitude)
                                           : kinematics::rotation_vector(attitude, &trace.tip_rotvec.back());
  trace.t.push_back(t);
  trace.states.push_back(state);
  trace.tip_position.push_back(tip.position);
  trace.tip_rotvec.push_back(rv);
  trace.kinetic.push_back(K);
  trace.potential.push_back(U);
  trace.total.push_back(K + U);
  trace.step_wall.push_back(step_wall);
}

SimTrace run(const Scenario& scenario, const AcmParams& params, ModelMode mode) {
  scenario.validate();
  params.validate();
  using Clock = std::chrono::steady_clock;

  SimTrace trace;
  trace.scenario = scenario.name;
  trace.mode = mode;
  trace.dt = scenario.dt;
  const long steps = std::lround(scenario.duration / scenario.dt);
  trace.t.reserve(steps + 1);

  GeneralizedState st = scenario.initial_state;
  st.q[idx::kPsiA] = kinematics::wrap_angle(st.q[idx::kPsiA]);
  append_record(trace, 0.0, st, params, 0.0);
  const ForcingFn forcing = [&scenario](double t) { return scenario.forcing(t); };
  dynamics::ChartState cs = dynamics::to_chart(st, params);

  for (long k = 0; k < steps; ++k) {
    const double t = k * scenario.dt;
    const auto t0 = Clock::now();
    try {
      cs = dynamics::rebase(rk4_step(cs, st, t, scenario.dt, forcing, params, mode));
    } catch (const IntegrationBlowupError& e) {
      std::ostringstream msg;
      msg << scenario.name << " (" << to_string(mode) << "): integration blew up at step " << k << ", t = " << t;
      throw IntegrationBlowupError(msg.str(), t, k);
    }
    const double wall = std::chrono::duration<double>(Clock::now() - t0).count();
    st = dynamics::from_chart(cs, st, params);
    append_record(trace, (k + 1) * scenario.dt, st, params, dynamics::kinetic_energy(cs, params, mode),
                  dynamics::potential_energy(cs, params), wall);
  }
  return trace;
}

TracePair run_both(const Scenario& scenario, const AcmParams& params, int jobs) {
  TracePair pair;
  parallel_for(2, jobs, [&](std::size_t i) {
    if (i == 0) {
      pair.coupled = run(scenario, params, ModelMode::kCoupled);
    } else {
      pair.decoupled = run(scenario, params, ModelMode::kDecoupled);
    }
  });
  return pair;
}

SweepAxis sweep_axis_from_string(const std::string& name) {
  if (name == "r_a") return SweepAxis::kRadius;
  if (name == "m_u") return SweepAxis::kUavMass;
  if (name == "l_a") return SweepAxis::kArmLength;
  if (name == "E") return SweepAxis::kYoungModulus;
  if (name == "kappa0") return SweepAxis::kKappa0;
  if (name == "phi0") return SweepAxis::kPhi0;
  throw ConfigError("axis", "expected one of r_a, m_u, l_a, E, kappa0, phi0; got '" + name + "'");
}

const char* to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kRadius: return "r_a";
    case SweepAxis::kUavMass: return "m_u";
    case SweepAxis::kArmLength: return "l_a";
    case SweepAxis::kYoungModulus: return "E";
    case SweepAxis::kKappa0: return "kappa0";
    default: return "phi0";
  }
}

std::vector<double> default_sweep_values(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kRadius: return {1e-3, 5e-3, 1e-2};
    case SweepAxis::kUavMass: return {1.0, 2.0, 3.0};
    case SweepAxis::kArmLength: return {0.5, 1.0, 1.5};
    case SweepAxis::kYoungModulus: return {207e9, 120e9, 40e9};
    case SweepAxis::kKappa0: return {0.1, 1.0, 2.0};
    default: return {0.0, std::numbers::pi / 12, std::numbers::pi / 6};
  }
}

void apply_sweep_value(SweepAxis axis, double value, Scenario& scenario, AcmParams& params) {
  switch (axis) {
    case SweepAxis::kRadius: params.r_a = value; break;
    case SweepAxis::kUavMass: params.m_u = value; break;
    case SweepAxis::kArmLength: params.l_a = value; break;
    case SweepAxis::kYoungModulus: params.E = value; break;
    case SweepAxis::kKappa0: scenario.initial_state.q[idx::kKappa] = value; break;
    case SweepAxis::kPhi0: scenario.initial_state.q[idx::kRoll] = value; break;
  }
}

std::vector<SweepEntry> parameter_sweep(const Scenario& base, const AcmParams& params, SweepAxis axis,
                                        const std::vector<double>& values, int jobs) {
  // Each value contributes two independent runs; slot 2i is coupled, 2i+1 decoupled.
  std::vector<std::optional<SimTrace>> runs(2 * values.size());
  std::vector<std::string> errors(2 * values.size());
  parallel_for(runs.size(), jobs, [&](std::size_t job) {
    const ModelMode mode = job % 2 == 0 ? ModelMode::kCoupled : ModelMode::kDecoupled;
    Scenario sc = base;
    AcmParams p = params;
    try {
      apply_sweep_value(axis, values[job / 2], sc, p);
      runs[job] = run(sc, p, mode);
    } catch (const AcmError& e) {
      errors[job] = e.what();
    }
  });

  std::vector<SweepEntry> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i].value = values[i];
    if (runs[2 * i] && runs[2 * i + 1]) {
      out[i].traces = TracePair{std::move(*runs[2 * i]), std::move(*runs[2 * i + 1])};
    } else {
      out[i].error = !errors[2 * i].empty() ? errors[2 * i] : errors[2 * i + 1];
    }
  }
  return out;
}

}  // namespace acm::sim
