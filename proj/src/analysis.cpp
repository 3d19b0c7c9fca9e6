#include "acm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "acm/errors.hpp"

namespace acm::analysis {

namespace {

void require_aligned(const sim::SimTrace& c, const sim::SimTrace& d) {
  if (c.size() != d.size()) {
    throw DimensionError("traces differ in length: " + std::to_string(c.size()) + " vs " + std::to_string(d.size()));
  }
  for (std::size_t k = 0; k < c.size(); ++k) {
    if (c.t[k] != d.t[k]) {
      std::ostringstream msg;
      msg << "timestamps differ at record " << k << ": " << c.t[k] << " vs " << d.t[k];
      throw DimensionError(msg.str());
    }
  }
}

const std::vector<Vec3>& rows_of(const sim::SimTrace& trace, Channel channel) {
  return channel == Channel::kTranslation ? trace.tip_position : trace.tip_rotvec;
}

double quantile(std::vector<double> sorted, double p) {
  std::sort(sorted.begin(), sorted.end());
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

nlohmann::json stats_json(const std::optional<TimingStats>& s) {
  if (!s) return nullptr;
  return {{"steps", s->steps}, {"median_s", s->median}, {"p95_s", s->p95}};
}

}  // namespace

double nrmse(const sim::SimTrace& c, const sim::SimTrace& d, Channel channel, std::vector<std::string>* warnings) {
  require_aligned(c, d);
  if (c.size() == 0) return 0.0;
  const auto& wc = rows_of(c, channel);
  const auto& wd = rows_of(d, channel);
  const double n = static_cast<double>(c.size());
  double num = 0.0, den = 0.0;
  for (int i = 0; i < 3; ++i) {
    double lo = wc[0][i], hi = wc[0][i];
    for (std::size_t k = 0; k < c.size(); ++k) {
      const double a = wc[k][i], b = wd[k][i];
      num += (a - b) * (a - b);
      lo = std::min({lo, a, b});
      hi = std::max({hi, a, b});
    }
    double range = hi - lo;
    if (range == 0.0) {
      range = 1.0;
      if (warnings) {
        warnings->push_back(std::string(channel == Channel::kTranslation ? "translation" : "rotation") + " row " +
                            std::to_string(i) + " is constant in both traces; range taken as 1");
      }
    }
    den += n * range * range;
  }
  return std::sqrt(num / den);
}

std::vector<std::pair<double, double>> ds_metric(const ErrorNormSeries& c, const ErrorNormSeries& d) {
  if (c.t.size() != c.norm.size() || d.t.size() != d.norm.size()) {
    throw DimensionError("error series: times and norms differ in length");
  }
  if (c.t.size() != d.t.size()) {
    throw DimensionError("error series differ in length: " + std::to_string(c.t.size()) + " vs " +
                         std::to_string(d.t.size()));
  }
  std::vector<std::pair<double, double>> out;
  out.reserve(c.t.size());
  for (std::size_t k = 0; k < c.t.size(); ++k) {
    if (c.t[k] != d.t[k]) {
      std::ostringstream msg;
      msg << "error series timestamps differ at sample " << k << ": " << c.t[k] << " vs " << d.t[k];
      throw DimensionError(msg.str());
    }
    out.emplace_back(c.t[k], c.norm[k] - d.norm[k]);
  }
  return out;
}

double tip_displacement(const sim::SimTrace& trace) {
  double out = 0.0;
  for (const Vec3& p : trace.tip_position) out = std::max(out, (p - trace.tip_position.front()).head<2>().norm());
  return out;
}

double tip_gap_rms(const sim::SimTrace& c, const sim::SimTrace& d) {
  require_aligned(c, d);
  if (c.size() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) sum += (c.tip_position[k] - d.tip_position[k]).squaredNorm();
  return std::sqrt(sum / static_cast<double>(c.size()));
}

ErrorNormSeries error_norms(const servo::ServoTrace& trace) { return {trace.t, trace.e_norm_px}; }

DsSummary summarize_ds(const servo::ServoTrace& c, const servo::ServoTrace& d, double corner_window,
                       std::size_t peaks, double separation) {
  ErrorNormSeries sc = error_norms(c), sd = error_norms(d);
  const std::size_t n = std::min(sc.t.size(), sd.t.size());
  for (auto* s : {&sc, &sd}) {
    s->t.resize(n);
    s->norm.resize(n);
  }
  const auto ds = ds_metric(sc, sd);
  DsSummary out;
  if (ds.empty()) return out;

  std::vector<double> curv(c.path_curvature.begin(), c.path_curvature.begin() + static_cast<std::ptrdiff_t>(
                                                                             std::min(n, c.path_curvature.size())));
  const double threshold = curv.empty() ? 0.0 : quantile(curv, 0.9);

  std::vector<std::size_t> order(ds.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(ds[a].second) > std::abs(ds[b].second); });
  out.max_abs = std::abs(ds[order.front()].second);
  out.t_max = ds[order.front()].first;

  for (std::size_t k : order) {
    if (out.peaks.size() >= peaks) break;
    const double t = ds[k].first;
    const bool near_peak = std::any_of(out.peaks.begin(), out.peaks.end(),
                                       [&](const DsPeak& p) { return std::abs(p.t - t) < separation; });
    if (near_peak) continue;
    DsPeak p{t, ds[k].second, false, false};
    p.corner = std::any_of(c.junctions.begin(), c.junctions.end(),
                           [&](double j) { return std::abs(j - t) <= corner_window; });
    p.high_curvature = k < curv.size() && curv[k] > 0.0 && curv[k] >= threshold;
    if (p.corner || p.high_curvature) ++out.attributed;
    out.peaks.push_back(p);
  }
  return out;
}

TimingStats timing_stats(const std::vector<double>& step_wall) {
  if (step_wall.empty()) throw DimensionError("no step times recorded");
  const std::size_t skip = step_wall.size() > kWarmupSteps ? kWarmupSteps : 0;
  const std::vector<double> used(step_wall.begin() + static_cast<std::ptrdiff_t>(skip), step_wall.end());
  return {used.size(), quantile(used, 0.5), quantile(used, 0.95)};
}

TimingStats timing_stats(const sim::SimTrace& trace) {
  if (trace.size() < 2) throw DimensionError("trace '" + trace.scenario + "' has no steps");
  return timing_stats(std::vector<double>(trace.step_wall.begin() + 1, trace.step_wall.end()));
}

TimingReport timing_report(const sim::SimTrace* coupled, const sim::SimTrace* decoupled) {
  TimingReport r;
  if (coupled && coupled->size() > 1) r.coupled = timing_stats(*coupled);
  if (decoupled && decoupled->size() > 1) r.decoupled = timing_stats(*decoupled);
  if (r.coupled && r.decoupled) r.ratio = r.coupled->median / std::max(r.decoupled->median, kEpsilon);
  return r;
}

double energy_audit(const sim::SimTrace& trace) {
  if (trace.total.empty()) return 0.0;
  const double e0 = trace.total.front();
  double worst = 0.0;
  for (double e : trace.total) worst = std::max(worst, std::abs(e - e0));
  return worst / std::max(std::abs(e0), kEpsilon);
}

ComparisonReport compare(const sim::SimTrace* coupled, const sim::SimTrace* decoupled) {
  ComparisonReport r;
  r.scenario = coupled ? coupled->scenario : decoupled ? decoupled->scenario : "";
  if (coupled && decoupled) {
    r.nrmse_T = nrmse(*coupled, *decoupled, Channel::kTranslation, &r.warnings);
    r.nrmse_R = nrmse(*coupled, *decoupled, Channel::kRotation, &r.warnings);
  }
  r.timing = timing_report(coupled, decoupled);
  if (coupled) r.energy_drift_coupled = energy_audit(*coupled);
  if (decoupled) r.energy_drift_decoupled = energy_audit(*decoupled);
  return r;
}

std::string to_json(const ComparisonReport& report) {
  nlohmann::json ds = nlohmann::json::array();
  for (const auto& [t, v] : report.ds_series) ds.push_back({t, v});
  nlohmann::json j = {
      {"scenario", report.scenario},
      {"nrmse_T", optional_json(report.nrmse_T)},
      {"nrmse_R", optional_json(report.nrmse_R)},
      {"ds_series", ds},
      {"timing",
       {{"coupled", stats_json(report.timing.coupled)},
        {"decoupled", stats_json(report.timing.decoupled)},
        {"ratio", optional_json(report.timing.ratio)},
        {"reference_ratio", kReferenceCostRatio}}},
      {"energy_drift", {{"coupled", optional_json(report.energy_drift_coupled)},
                        {"decoupled", optional_json(report.energy_drift_decoupled)}}},
      {"warnings", report.warnings},
  };
  return j.dump(2) + "\n";
}

std::string to_text(const ComparisonReport& report) {
  std::ostringstream out;
  auto value = [](const std::optional<double>& v, int precision = 6) {
    if (!v) return std::string("-");
    std::ostringstream s;
    s << std::setprecision(precision) << *v;
    return s.str();
  };
  auto row = [&out](const std::string& name, const std::string& v) {
    out << "  " << std::left << std::setw(26) << name << v << '\n';
  };
  out << "scenario " << report.scenario << '\n';
  row("nrmse translation", value(report.nrmse_T));
  row("nrmse rotation", value(report.nrmse_R));
  auto timing = [&](const char* mode, const std::optional<TimingStats>& s) {
    if (!s) return;
    row(std::string("step median ") + mode + " [s]", value(s->median, 4));
    row(std::string("step p95 ") + mode + " [s]", value(s->p95, 4));
  };
  timing("coupled", report.timing.coupled);
  timing("decoupled", report.timing.decoupled);
  row("cost ratio c/d", value(report.timing.ratio, 4) + " (reference 32/22 = " +
                            value(kReferenceCostRatio, 4) + ")");
  row("energy drift coupled", value(report.energy_drift_coupled, 3));
  row("energy drift decoupled", value(report.energy_drift_decoupled, 3));
  if (!report.ds_series.empty()) {
    double worst = 0.0;
    for (const auto& [t, v] : report.ds_series) worst = std::max(worst, std::abs(v));
    row("max |DS| [px]", value(worst, 4));
  }
  for (const auto& w : report.warnings) out << "  warning: " << w << '\n';
  return out.str();
}

}  // namespace acm::analysis
