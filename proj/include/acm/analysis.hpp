#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "acm/servo.hpp"
#include "acm/simulation.hpp"

namespace acm::analysis {

// Floor for denominators of relative quantities.
inline constexpr double kEpsilon = 1e-12;

// Steps excluded from timing statistics as warm-up.
inline constexpr std::size_t kWarmupSteps = 10;

enum class Channel { kTranslation, kRotation };

// sqrt(sum_i sum_k (W_c - W_d)^2 / sum_i sum_k (W_max - W_min)^2) over the tip
// position rows or the tip rotation-vector rows. Each row's range is taken
// over both traces together; a row that is constant in both uses 1 instead
// and adds a message to `warnings`. Throws DimensionError unless the traces
// have the same timestamps.
double nrmse(const sim::SimTrace& c, const sim::SimTrace& d, Channel channel,
             std::vector<std::string>* warnings = nullptr);

// max_t |tip_xy(t) - tip_xy(0)|; 0 for an empty trace.
double tip_displacement(const sim::SimTrace& trace);

// RMS over the records of |p_tip,c - p_tip,d|. Throws DimensionError unless
// the traces have the same timestamps.
double tip_gap_rms(const sim::SimTrace& c, const sim::SimTrace& d);

// Image-error norm over time, as recorded by a servo run.
struct ErrorNormSeries {
  std::vector<double> t;
  std::vector<double> norm;  // [px]
};

// DS(t) = |e|_c - |e|_d. Positive where the coupled run has the larger error.
std::vector<std::pair<double, double>> ds_metric(const ErrorNormSeries& c, const ErrorNormSeries& d);

ErrorNormSeries error_norms(const servo::ServoTrace& trace);

struct DsPeak {
  double t = 0.0;
  double ds = 0.0;             // signed DS at the peak [px]
  bool corner = false;         // within the window around a path junction
  bool high_curvature = false; // curvature > 0 and in the top decile of the run
};

struct DsSummary {
  double max_abs = 0.0;  // [px]
  double t_max = 0.0;
  std::vector<DsPeak> peaks;  // largest first
  std::size_t attributed = 0; // peaks that are corner or high-curvature events
};

// The `peaks` largest |DS| samples at least `separation` seconds apart, each
// checked against the coupled run's junction times (+- corner_window) and
// path curvature.
DsSummary summarize_ds(const servo::ServoTrace& c, const servo::ServoTrace& d, double corner_window,
                       std::size_t peaks = 5, double separation = 1.0);

struct TimingStats {
  std::size_t steps = 0;
  double median = 0.0;  // [s]
  double p95 = 0.0;     // [s]
};

// Statistics of recorded per-step wall times (the initial record carries no
// step). The first kWarmupSteps steps are dropped when more remain after
// that. Throws DimensionError for a trace without steps.
TimingStats timing_stats(const std::vector<double>& step_wall);
TimingStats timing_stats(const sim::SimTrace& trace);

struct TimingReport {
  std::optional<TimingStats> coupled;
  std::optional<TimingStats> decoupled;
  std::optional<double> ratio;  // coupled median / decoupled median
};

// Reference per-sample costs (32 ms coupled, 22 ms decoupled), for context.
inline constexpr double kReferenceCostRatio = 32.0 / 22.0;

TimingReport timing_report(const sim::SimTrace* coupled, const sim::SimTrace* decoupled);

// max_t |E(t) - E(0)| / max(|E(0)|, kEpsilon); 0 for an empty trace.
double energy_audit(const sim::SimTrace& trace);

struct ComparisonReport {
  std::string scenario;
  std::optional<double> nrmse_T;
  std::optional<double> nrmse_R;
  std::vector<std::pair<double, double>> ds_series;
  TimingReport timing;
  std::optional<double> energy_drift_coupled;
  std::optional<double> energy_drift_decoupled;
  std::vector<std::string> warnings;
};

// Either trace may be null (single-mode runs); fields that need both stay empty.
ComparisonReport compare(const sim::SimTrace* coupled, const sim::SimTrace* decoupled);

std::string to_json(const ComparisonReport& report);
std::string to_text(const ComparisonReport& report);

}  // namespace acm::analysis
