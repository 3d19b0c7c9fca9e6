#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "acm/analysis.hpp"
#include "acm/dynamics.hpp"
#include "acm/errors.hpp"
#include "acm/simulation.hpp"

using namespace acm;
using namespace acm::sim;

namespace {

Scenario short_scenario(const std::string& name, double duration = 0.05) {
  Scenario sc = builtin_scenario(name);
  sc.duration = duration;
  return sc;
}

}  // namespace

TEST(Scenarios, TestAActuation) {
  const Scenario sc = builtin_scenario("testA");
  for (double t : {0.0, 0.37, 1.0}) {
    Vec8 expected = Vec8::Zero();
    expected[0] = 100.0;
    EXPECT_TRUE(sc.forcing(t).tau.isApprox(expected, 0.0));
    EXPECT_TRUE(sc.forcing(t).wrench.isZero(0.0));
  }
}

TEST(Scenarios, TestDChirpPhase) {
  const Scenario sc = builtin_scenario("testD");
  EXPECT_NEAR(sc.forcing(0.0).wrench[0], 10.0 * std::sin(std::numbers::pi / 4), 1e-12);
}

TEST(Scenarios, SweepWrenchAfterSwitch) {
  const Scenario sc = builtin_scenario("sweep_wrench");
  const Forcing f = sc.forcing(3.0);
  EXPECT_NEAR(f.tau[0], 100.0 * std::cos(30.0), 1e-9);
  EXPECT_NEAR(f.tau[1], 100.0 * std::sin(30.0), 1e-9);
  EXPECT_DOUBLE_EQ(sc.duration, 5.0);
}

TEST(Scenarios, TestCArmTorques) {
  const Scenario sc = builtin_scenario("testC");
  const double t = 0.3;
  EXPECT_NEAR(sc.forcing(t).tau[6], 0.1 * std::sin(20 * t + std::numbers::pi / 4), 1e-12);
  EXPECT_NEAR(sc.forcing(t).tau[7], 0.1 * std::cos(20 * t), 1e-12);
}

TEST(Scenarios, InitialStateAndDuration) {
  for (const char* name : {"testA", "testB", "testC", "testD"}) {
    const Scenario sc = builtin_scenario(name);
    Vec8 q0;
    q0 << 0, 0, 5, 0, 0, 0, 0.1, 0;
    EXPECT_TRUE(sc.initial_state.q.isApprox(q0, 0.0)) << name;
    EXPECT_DOUBLE_EQ(sc.duration, 1.0) << name;
  }
}

TEST(Scenarios, UnknownNameListsValidNames) {
  try {
    builtin_scenario("testZ");
    FAIL();
  } catch (const ConfigError& e) {
    for (const auto& n : builtin_scenario_names()) EXPECT_NE(std::string(e.what()).find(n), std::string::npos);
  }
}

TEST(Scenarios, ValidateRejectsBadStep) {
  Scenario sc = builtin_scenario("testB");
  sc.dt = 0.0;
  EXPECT_THROW(sc.validate(), ConfigError);
  sc.dt = 1e-3;
  sc.duration = 5e-4;
  EXPECT_THROW(sc.validate(), ConfigError);
}

TEST(Run, ZeroDurationGivesInitialRecord) {
  Scenario sc = builtin_scenario("testB");
  sc.duration = 0.0;
  const SimTrace tr = run(sc, AcmParams{}, ModelMode::kCoupled);
  ASSERT_EQ(tr.size(), 1u);
  EXPECT_TRUE(tr.states[0].q.isApprox(sc.initial_state.q, 0.0));
  EXPECT_EQ(analysis::energy_audit(tr), 0.0);
}

TEST(Run, OneRecordPerStepStrictlyIncreasing) {
  const SimTrace tr = run(short_scenario("testC", 0.01), AcmParams{}, ModelMode::kCoupled);
  ASSERT_EQ(tr.size(), 101u);
  for (std::size_t k = 1; k < tr.size(); ++k) EXPECT_GT(tr.t[k], tr.t[k - 1]);
  EXPECT_NEAR(tr.t.back(), 0.01, 1e-15);
}

TEST(Run, Deterministic) {
  const Scenario sc = short_scenario("testD");
  const SimTrace a = run(sc, AcmParams{}, ModelMode::kCoupled);
  const SimTrace b = run(sc, AcmParams{}, ModelMode::kCoupled);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a.states[k].q, b.states[k].q);
    EXPECT_EQ(a.states[k].qdot, b.states[k].qdot);
  }
}

TEST(Run, FreeFallConservesEnergyAndModesDiffer) {
  Scenario sc = builtin_scenario("testB");
  const TracePair pair = run_both(sc, AcmParams{});
  EXPECT_LT(analysis::energy_audit(pair.coupled), 1e-6);
  EXPECT_LT(analysis::energy_audit(pair.decoupled), 1e-6);
  EXPECT_GT((pair.coupled.tip_position.back() - pair.decoupled.tip_position.back()).norm(), 0.0);
  EXPECT_EQ(pair.coupled.t, pair.decoupled.t);
}

TEST(Run, ParallelPairMatchesSequential) {
  const Scenario sc = short_scenario("testA");
  const TracePair a = run_both(sc, AcmParams{}, 1);
  const TracePair b = run_both(sc, AcmParams{}, 2);
  EXPECT_EQ(a.coupled.states.back().q, b.coupled.states.back().q);
  EXPECT_EQ(a.decoupled.states.back().q, b.decoupled.states.back().q);
}

TEST(Rk4, FourthOrderConvergence) {
  const AcmParams p;
  auto terminal = [&](double dt) {
    Scenario sc = builtin_scenario("testC");
    sc.duration = 0.02;
    sc.dt = dt;
    const SimTrace tr = run(sc, p, ModelMode::kCoupled);
    Eigen::Matrix<double, 16, 1> x;
    x << tr.states.back().q, tr.states.back().qdot;
    return x;
  };
  const auto ref = terminal(1e-3 / 16);
  const double e1 = (terminal(1e-3) - ref).norm();
  const double e2 = (terminal(5e-4) - ref).norm();
  EXPECT_NEAR(std::log2(e1 / e2), 4.0, 0.3);
}

// Without gravity a force along the straight arm passes through the centre of
// mass and accelerates the whole body uniformly; RK4 is exact for constant
// acceleration.
TEST(Rk4, ConstantForceGivesQuadraticPosition) {
  AcmParams p;
  p.g = 0.0;
  GeneralizedState st;
  st.q << 0, 0, 5, 0, 0, 0, 0, 0;
  sim::Forcing f;
  f.tau[2] = 3.0;
  const double dt = 1e-3;
  const double m = p.m_u + p.arm_mass();
  for (ModelMode mode : {ModelMode::kCoupled, ModelMode::kDecoupled}) {
    GeneralizedState s = st;
    for (int k = 0; k < 200; ++k) s = rk4_step(s, k * dt, dt, f, p, mode);
    EXPECT_NEAR(s.q[2], 5.0 + 0.5 * 3.0 / m * 0.04, 1e-12);
    EXPECT_NEAR(s.qdot[2], 3.0 / m * 0.2, 1e-12);
    EXPECT_NEAR(s.q.head<2>().norm() + s.q.segment<3>(3).norm() + s.q.tail<2>().norm(), 0.0, 1e-12);
  }
}

// A lighter arm perturbs the coupled base less: the base follows the
// rigid-body parabola up to the arm mass fraction.
TEST(Rk4, ConstantForceOnLightArmCoupled) {
  AcmParams p;
  p.g = 0.0;
  p.rho *= 1e-2;
  GeneralizedState st;
  st.q << 0, 0, 5, 0, 0, 0, 0.5, 0;
  sim::Forcing f;
  f.tau[0] = 3.0;
  const double dt = 1e-4;
  for (int k = 0; k < 2000; ++k) st = rk4_step(st, k * dt, dt, f, p, ModelMode::kCoupled);
  const double m = p.m_u + p.arm_mass();
  EXPECT_NEAR(st.q[0], 0.5 * 3.0 / m * 0.04, 0.02 * p.arm_mass() / m);
}

TEST(Rk4, NonFiniteInputsRejected) {
  GeneralizedState st;
  st.q << 0, 0, 5, 0, 0, 0, 0.1, 0;
  sim::Forcing f;
  f.tau[2] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(rk4_step(st, 0.0, 1e-4, f, AcmParams{}, ModelMode::kCoupled), DomainError);
  st.qdot[6] = 1e160;
  EXPECT_THROW(rk4_step(st, 0.0, 1e-4, sim::Forcing{}, AcmParams{}, ModelMode::kCoupled), IntegrationBlowupError);
}

// With decoupled blocks and no gravity the arm never sees the base: a base
// force changes nothing in (kappa, psi_a). Under gravity the arm load follows
// the base attitude, which the base force does change.
TEST(ModeIsolation, BaseForceLeavesDecoupledArmUnchanged) {
  AcmParams p;
  p.g = 0.0;
  const SimTrace forced = run(builtin_scenario("testA"), p, ModelMode::kDecoupled);
  const SimTrace free = run(builtin_scenario("testB"), p, ModelMode::kDecoupled);
  ASSERT_EQ(forced.size(), free.size());
  double gap = 0.0;
  for (std::size_t k = 0; k < forced.size(); ++k) {
    gap = std::max(gap, (forced.states[k].q.tail<2>() - free.states[k].q.tail<2>()).norm());
    gap = std::max(gap, (forced.states[k].qdot.tail<2>() - free.states[k].qdot.tail<2>()).norm());
  }
  EXPECT_LT(gap, 1e-9);
  EXPECT_GT(std::abs(forced.states.back().q[0] - free.states.back().q[0]), 1.0);
}

TEST(ModeIsolation, CoupledArmFeelsBaseForce) {
  const AcmParams p;
  const SimTrace forced = run(short_scenario("testA", 0.2), p, ModelMode::kCoupled);
  const SimTrace free = run(short_scenario("testB", 0.2), p, ModelMode::kCoupled);
  EXPECT_GT((forced.states.back().q.tail<2>() - free.states.back().q.tail<2>()).norm(), 1e-6);
}

TEST(Sweep, InvalidValueRecordedAndSweepContinues) {
  Scenario base = short_scenario("sweep_wrench", 0.01);
  const auto entries = parameter_sweep(base, AcmParams{}, SweepAxis::kRadius, {1e-3, -1.0, 5e-3});
  ASSERT_EQ(entries.size(), 3u);
  EXPECT_TRUE(entries[0].traces.has_value());
  EXPECT_FALSE(entries[1].traces.has_value());
  EXPECT_FALSE(entries[1].error.empty());
  EXPECT_TRUE(entries[2].traces.has_value());
}

TEST(Sweep, AppliesAxisValue) {
  Scenario sc = builtin_scenario("testE_bending");
  AcmParams p;
  apply_sweep_value(SweepAxis::kKappa0, 2.0, sc, p);
  EXPECT_DOUBLE_EQ(sc.initial_state.q[6], 2.0);
  apply_sweep_value(SweepAxis::kPhi0, 0.3, sc, p);
  EXPECT_DOUBLE_EQ(sc.initial_state.q[3], 0.3);
  apply_sweep_value(SweepAxis::kYoungModulus, 40e9, sc, p);
  EXPECT_DOUBLE_EQ(p.E, 40e9);
  EXPECT_THROW(sweep_axis_from_string("mass"), ConfigError);
}

TEST(Sweep, DefaultRadiusValues) {
  EXPECT_EQ(default_sweep_values(SweepAxis::kRadius), (std::vector<double>{1e-3, 5e-3, 1e-2}));
  EXPECT_EQ(default_sweep_values(SweepAxis::kYoungModulus), (std::vector<double>{207e9, 120e9, 40e9}));
}

TEST(Profiles, TableInterpolatesAndClamps) {
  TableProfile table;
  table.times = {0.0, 1.0};
  Eigen::VectorXd a(2), b(2);
  a << 0, 0;
  b << 2, -4;
  table.values = {a, b};
  const WrenchProfile prof(2, table);
  EXPECT_NEAR(prof(0.25)[0], 0.5, 1e-15);
  EXPECT_NEAR(prof(0.25)[1], -1.0, 1e-15);
  EXPECT_EQ(prof(5.0), b);
  EXPECT_EQ(prof(-1.0), a);
}

TEST(RunMode, Names) {
  EXPECT_EQ(run_mode_from_string("both"), RunMode::kBoth);
  EXPECT_STREQ(to_string(RunMode::kDecoupled), "decoupled");
  EXPECT_THROW(run_mode_from_string("half"), ConfigError);
}
