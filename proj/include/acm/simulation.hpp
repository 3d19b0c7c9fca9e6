#pragma once

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "acm/dynamics.hpp"
#include "acm/params.hpp"
#include "acm/types.hpp"

namespace acm::sim {

// Generalized actuation and tip wrench acting over one integration step.
struct Forcing {
  Vec8 tau = Vec8::Zero();
  dynamics::ExternalWrench wrench = dynamics::ExternalWrench::Zero();
};

using ForcingFn = std::function<Forcing(double)>;

// Time profiles. Each produces a vector of the profile's dimension.
struct ZeroProfile {};

struct ConstantProfile {
  Eigen::VectorXd value;
};

// sum of amplitude * sin(omega t + phase) on selected components; omega in rad/s.
struct SineTerm {
  int index = 0;
  double amplitude = 0.0;
  double omega = 0.0;
  double phase = 0.0;
};
struct SinusoidProfile {
  std::vector<SineTerm> terms;
};

// Linear chirp amplitude * sin(2 pi (f0 t + (f1 - f0) t^2 / (2 T)) + phase) on
// selected components plus a constant offset vector; frequencies in Hz.
struct ChirpTerm {
  int index = 0;
  double amplitude = 0.0;
  double phase = 0.0;
};
struct ChirpProfile {
  double f0 = 1.0;
  double f1 = 1.0;
  double sweep_time = 10.0;
  std::vector<ChirpTerm> terms;
  Eigen::VectorXd offset;
};

// In-plane force of magnitude a rotating with angular rate omega [rad/s]:
// (a sin wt, -a cos wt) up to switch_time, (a cos wt, a sin wt) after.
struct PiecewiseRotatingProfile {
  double amplitude = 100.0;
  double omega = 10.0;
  double switch_time = 2.5;
  int index_x = 0;
  int index_y = 1;
};

// Piecewise-linear interpolation, clamped outside [times.front(), times.back()].
struct TableProfile {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> values;
};

class WrenchProfile {
 public:
  using Kind = std::variant<ZeroProfile, ConstantProfile, SinusoidProfile, ChirpProfile, PiecewiseRotatingProfile,
                            TableProfile>;

  WrenchProfile(int dim = 8, Kind kind = ZeroProfile{});

  Eigen::VectorXd operator()(double t) const;
  int dim() const { return dim_; }
  const Kind& kind() const { return kind_; }
  std::string kind_name() const;

 private:
  int dim_;
  Kind kind_;
};

enum class RunMode { kCoupled, kDecoupled, kBoth };
const char* to_string(RunMode mode);
RunMode run_mode_from_string(const std::string& name);

struct Scenario {
  std::string name = "custom";
  GeneralizedState initial_state;
  double duration = 1.0;
  double dt = 1e-4;
  WrenchProfile actuation{8};
  WrenchProfile external{6};
  RunMode mode = RunMode::kBoth;

  Forcing forcing(double t) const;
  // Throws ConfigError naming the offending field.
  void validate() const;
};

// testA, testB, testC, testD, testE_bending, sweep_wrench.
Scenario builtin_scenario(const std::string& name);
const std::vector<std::string>& builtin_scenario_names();

struct SimTrace {
  std::string scenario;
  ModelMode mode = ModelMode::kCoupled;
  double dt = 0.0;
  std::vector<double> t;
  std::vector<GeneralizedState> states;
  std::vector<Vec3> tip_position;
  std::vector<Vec3> tip_rotvec;  // of tip_attitude, unwrapped over time
  std::vector<double> kinetic;
  std::vector<double> potential;
  std::vector<double> total;
  std::vector<double> step_wall;  // 0 for the initial record

  std::size_t size() const { return t.size(); }
};

// Classical RK4 with forcing sampled at t, t + dt/2, t + dt. The state is
// advanced in chart coordinates (see dynamics::ChartState) and mapped back
// with the input state as hint, so psi_a comes out wrapped to (-pi, pi] and
// the Euler angles continue those of the input. Throws
// IntegrationBlowupError on a non-finite stage.
GeneralizedState rk4_step(const GeneralizedState& state, double t, double dt, const ForcingFn& forcing,
                          const AcmParams& params, ModelMode mode);

// Zero-order-hold variant used by the servo loop.
GeneralizedState rk4_step(const GeneralizedState& state, double t, double dt, const Forcing& forcing,
                          const AcmParams& params, ModelMode mode);

// The same steps directly in the chart; `hint` fixes the Euler angles and the
// (kappa, psi_a) representative that the actuation refers to. The result is
// not rebased.
dynamics::ChartState rk4_step(const dynamics::ChartState& state, const GeneralizedState& hint, double t, double dt,
                              const ForcingFn& forcing, const AcmParams& params, ModelMode mode);
dynamics::ChartState rk4_step(const dynamics::ChartState& state, const GeneralizedState& hint, double t, double dt,
                              const Forcing& forcing, const AcmParams& params, ModelMode mode);

// Appends the record for `state` at time t (tip pose, energies). The second
// form takes precomputed kinetic and potential energy.
void append_record(SimTrace& trace, double t, const GeneralizedState& state, const AcmParams& params,
                   double step_wall);
void append_record(SimTrace& trace, double t, const GeneralizedState& state, const AcmParams& params, double K,
                   double U, double step_wall);

SimTrace run(const Scenario& scenario, const AcmParams& params, ModelMode mode);

struct TracePair {
  SimTrace coupled;
  SimTrace decoupled;
};

// Both models under identical initial state, dt and profiles. With jobs > 1
// the two runs execute on separate threads.
TracePair run_both(const Scenario& scenario, const AcmParams& params, int jobs = 1);

enum class SweepAxis { kRadius, kUavMass, kArmLength, kYoungModulus, kKappa0, kPhi0 };
SweepAxis sweep_axis_from_string(const std::string& name);
const char* to_string(SweepAxis axis);

struct SweepEntry {
  double value = 0.0;
  std::optional<TracePair> traces;
  std::string error;  // set when this value failed
};

// Applies one axis value to copies of the scenario and params.
void apply_sweep_value(SweepAxis axis, double value, Scenario& scenario, AcmParams& params);

// One coupled/decoupled pair per value; failing values record their error and
// the sweep continues.
std::vector<SweepEntry> parameter_sweep(const Scenario& base, const AcmParams& params, SweepAxis axis,
                                        const std::vector<double>& values, int jobs = 1);

// Default value sets per axis.
std::vector<double> default_sweep_values(SweepAxis axis);

}  // namespace acm::sim
