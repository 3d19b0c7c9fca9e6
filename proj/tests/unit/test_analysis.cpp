#include <gtest/gtest.h>

#include <cmath>

#include "acm/analysis.hpp"
#include "acm/errors.hpp"

using namespace acm;
using namespace acm::analysis;

namespace {

// Synthetic trace with tip x = t, y = 2 t^2, z = 5 and rotation (0.1 t, 0.3 t^2, -t).
sim::SimTrace synthetic(std::size_t n) {
  sim::SimTrace tr;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = 0.01 * k;
    tr.t.push_back(t);
    tr.states.emplace_back();
    tr.tip_position.emplace_back(t, 2 * t * t, 5.0);
    tr.tip_rotvec.emplace_back(0.1 * t, 0.3 * t * t, -t);
    tr.kinetic.push_back(1.0);
    tr.potential.push_back(2.0);
    tr.total.push_back(3.0);
    tr.step_wall.push_back(k == 0 ? 0.0 : 1e-5);
  }
  return tr;
}

servo::ServoTrace servo_series(const std::vector<double>& norms) {
  servo::ServoTrace tr;
  for (std::size_t k = 0; k < norms.size(); ++k) {
    tr.t.push_back(0.1 * k);
    tr.e_norm_px.push_back(norms[k]);
  }
  return tr;
}

}  // namespace

TEST(Nrmse, IdenticalTracesGiveZero) {
  const auto a = synthetic(50);
  EXPECT_EQ(nrmse(a, a, Channel::kTranslation), 0.0);
  EXPECT_EQ(nrmse(a, a, Channel::kRotation), 0.0);
}

// Offset delta on x only: sqrt(N delta^2 / (N R_x^2 + N R_y^2 + N R_z^2)) with
// the union ranges, z constant in both traces so its range counts as 1.
TEST(Nrmse, ConstantOffsetMatchesDirectFormula) {
  const std::size_t n = 50;
  const auto a = synthetic(n);
  auto b = a;
  const double delta = 0.03;
  for (auto& p : b.tip_position) p.x() += delta;
  const double t_end = 0.01 * (n - 1);
  const double Rx = t_end + delta;
  const double Ry = 2 * t_end * t_end;
  const double expected = std::sqrt(n * delta * delta / (n * Rx * Rx + n * Ry * Ry + n * 1.0));
  std::vector<std::string> warnings;
  EXPECT_NEAR(nrmse(a, b, Channel::kTranslation, &warnings), expected, 1e-14);
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(Nrmse, SymmetricAndScaleInvariant) {
  auto a = synthetic(40);
  auto b = synthetic(40);
  for (std::size_t k = 0; k < b.size(); ++k) {
    b.tip_position[k] += Vec3(0.01 * std::sin(k), 0.02, -0.01 * k);
    b.tip_rotvec[k] *= 1.1;
  }
  for (Channel ch : {Channel::kTranslation, Channel::kRotation}) {
    EXPECT_NEAR(nrmse(a, b, ch), nrmse(b, a, ch), 1e-15);
  }
  const double before = nrmse(a, b, Channel::kRotation);
  for (auto* tr : {&a, &b}) {
    for (auto& r : tr->tip_rotvec) r *= 3.5;
  }
  EXPECT_NEAR(nrmse(a, b, Channel::kRotation), before, 1e-14);
}

TEST(Nrmse, MisalignedTracesThrow) {
  const auto a = synthetic(10);
  const auto b = synthetic(11);
  EXPECT_THROW(nrmse(a, b, Channel::kTranslation), DimensionError);
  EXPECT_THROW(tip_gap_rms(a, b), DimensionError);
}

TEST(Ds, IdenticalZeroAndAntisymmetric) {
  const auto c = error_norms(servo_series({3.0, 2.0, 1.5, 1.0}));
  const auto d = error_norms(servo_series({2.5, 2.5, 1.0, 1.0}));
  for (const auto& [t, v] : ds_metric(c, c)) EXPECT_EQ(v, 0.0);
  const auto cd = ds_metric(c, d);
  const auto dc = ds_metric(d, c);
  ASSERT_EQ(cd.size(), 4u);
  for (std::size_t k = 0; k < cd.size(); ++k) EXPECT_EQ(cd[k].second, -dc[k].second);
  EXPECT_GT(cd[0].second, 0.0);  // coupled error larger
  EXPECT_LT(cd[1].second, 0.0);
}

TEST(Ds, MisalignedTimestampsThrow) {
  auto c = error_norms(servo_series({1.0, 2.0}));
  auto d = c;
  d.t[1] += 0.5;
  EXPECT_THROW(ds_metric(c, d), DimensionError);
}

TEST(Ds, SummaryFlagsCornersAndCurvature) {
  servo::ServoTrace c = servo_series(std::vector<double>(100, 1.0));
  servo::ServoTrace d = c;
  c.junctions = {2.0};
  c.path_curvature.assign(100, 0.0);
  for (std::size_t k = 70; k < 80; ++k) c.path_curvature[k] = 4.0;
  d.path_curvature = c.path_curvature;
  c.e_norm_px[21] += 0.5;  // t = 2.1, at the junction
  c.e_norm_px[75] -= 0.3;  // t = 7.5, on the arc
  c.e_norm_px[50] += 0.1;  // t = 5.0, neither
  const auto s = summarize_ds(c, d, 0.5, 3, 1.0);
  EXPECT_NEAR(s.max_abs, 0.5, 1e-15);
  EXPECT_NEAR(s.t_max, 2.1, 1e-12);
  ASSERT_EQ(s.peaks.size(), 3u);
  EXPECT_TRUE(s.peaks[0].corner);
  EXPECT_TRUE(s.peaks[1].high_curvature);
  EXPECT_LT(s.peaks[1].ds, 0.0);
  EXPECT_FALSE(s.peaks[2].corner || s.peaks[2].high_curvature);
  EXPECT_EQ(s.attributed, 2u);
}

TEST(Timing, SingleStepStatsEqualThatStep) {
  const auto s = timing_stats(std::vector<double>{2.5e-5});
  EXPECT_EQ(s.steps, 1u);
  EXPECT_EQ(s.median, 2.5e-5);
  EXPECT_EQ(s.p95, 2.5e-5);
  const auto tr = timing_stats(synthetic(2));  // the initial record carries no step
  EXPECT_EQ(tr.steps, 1u);
  EXPECT_EQ(tr.median, 1e-5);
  EXPECT_THROW(timing_stats(std::vector<double>{}), DimensionError);
  EXPECT_THROW(timing_stats(synthetic(1)), DimensionError);
}

TEST(Timing, WarmupDroppedAndRatioReported) {
  auto c = synthetic(100);
  auto d = synthetic(100);
  for (std::size_t k = 1; k <= kWarmupSteps; ++k) c.step_wall[k] = 1.0;
  for (auto& w : d.step_wall) w *= 0.5;
  const auto rep = timing_report(&c, &d);
  ASSERT_TRUE(rep.ratio.has_value());
  EXPECT_NEAR(*rep.ratio, 2.0, 1e-12);
  EXPECT_EQ(rep.coupled->steps, 99 - kWarmupSteps);
  EXPECT_NEAR(kReferenceCostRatio, 32.0 / 22.0, 1e-15);
}

TEST(EnergyAudit, RelativeDrift) {
  auto tr = synthetic(5);
  EXPECT_EQ(energy_audit(tr), 0.0);
  tr.total[3] = 3.3;
  EXPECT_NEAR(energy_audit(tr), 0.1, 1e-12);
  tr.total.assign(5, 0.0);
  tr.total[2] = 1e-13;
  EXPECT_NEAR(energy_audit(tr), 0.1, 1e-12);  // epsilon floor
  EXPECT_EQ(energy_audit(sim::SimTrace{}), 0.0);
}

TEST(Displacement, MaxPlanarExcursion) {
  const auto tr = synthetic(11);
  EXPECT_NEAR(tip_displacement(tr), std::hypot(0.1, 0.02), 1e-15);
  EXPECT_EQ(tip_displacement(sim::SimTrace{}), 0.0);
  auto other = tr;
  for (auto& p : other.tip_position) p.z() += 0.2;
  EXPECT_NEAR(tip_gap_rms(tr, other), 0.2, 1e-15);
}

TEST(Compare, SingleModeLeavesPairFieldsEmpty) {
  const auto a = synthetic(20);
  const auto r = compare(&a, nullptr);
  EXPECT_FALSE(r.nrmse_T.has_value());
  EXPECT_TRUE(r.energy_drift_coupled.has_value());
  EXPECT_FALSE(r.timing.ratio.has_value());
  EXPECT_NE(to_json(r).find("\"nrmse_T\""), std::string::npos);
  const auto both = compare(&a, &a);
  EXPECT_EQ(*both.nrmse_T, 0.0);
  EXPECT_NE(to_text(both).find("nrmse"), std::string::npos);
}
