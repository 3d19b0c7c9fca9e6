#include "acm_cli.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#if __has_include(<sys/utsname.h>)
#include <sys/utsname.h>
#define ACM_HAS_UTSNAME 1
#endif

#include "acm/analysis.hpp"
#include "acm/errors.hpp"
#include "acm/parallel.hpp"
#include "acm/trace_io.hpp"
#include "acm/verify/suites.hpp"

#ifndef ACM_VERSION
#define ACM_VERSION "0.0.0"
#endif

namespace acm::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// ---- config parsing --------------------------------------------------------

std::string join(const std::string& where, const std::string& key) { return where.empty() ? key : where + "." + key; }

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where.empty() ? "config" : where, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; });
    if (!known) throw ConfigError(join(where, it.key()), "unknown key");
  }
}

double as_number(const json& v, const std::string& field) {
  if (!v.is_number()) throw ConfigError(field, "expected a number");
  return v.get<double>();
}

long as_integer(const json& v, const std::string& field) {
  if (!v.is_number_integer()) throw ConfigError(field, "expected an integer");
  return v.get<long>();
}

bool as_bool(const json& v, const std::string& field) {
  if (!v.is_boolean()) throw ConfigError(field, "expected true or false");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& field) {
  if (!v.is_string()) throw ConfigError(field, "expected a string");
  return v.get<std::string>();
}

template <int N>
Eigen::Matrix<double, N, 1> as_vector(const json& v, const std::string& field) {
  if (!v.is_array() || v.size() != N) throw ConfigError(field, "expected a list of " + std::to_string(N) + " numbers");
  Eigen::Matrix<double, N, 1> out;
  for (int i = 0; i < N; ++i) out[i] = as_number(v[i], field + "[" + std::to_string(i) + "]");
  return out;
}

// A number s (s I), a list of N diagonal entries or N rows of N.
template <int N>
Eigen::Matrix<double, N, N> as_matrix(const json& v, const std::string& field) {
  using Mat = Eigen::Matrix<double, N, N>;
  if (v.is_number()) return v.get<double>() * Mat::Identity();
  if (v.is_array() && v.size() == N && std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); })) {
    return as_vector<N>(v, field).asDiagonal();
  }
  if (!v.is_array() || v.size() != N) {
    throw ConfigError(field, "expected a number, " + std::to_string(N) + " diagonal entries or " + std::to_string(N) +
                                 " rows");
  }
  Mat out;
  for (int r = 0; r < N; ++r) out.row(r) = as_vector<N>(v[r], field + "[" + std::to_string(r) + "]").transpose();
  return out;
}

template <class Derived>
json matrix_json(const Eigen::MatrixBase<Derived>& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

template <class Derived>
json vector_json(const Eigen::MatrixBase<Derived>& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

GeneralizedState parse_state(const json& j, const std::string& where) {
  check_keys(j, where, {"q", "qdot"});
  GeneralizedState st;
  if (j.contains("q")) st.q = as_vector<8>(j["q"], join(where, "q"));
  if (j.contains("qdot")) st.qdot = as_vector<8>(j["qdot"], join(where, "qdot"));
  return st;
}

json state_json(const GeneralizedState& st) { return {{"q", vector_json(st.q)}, {"qdot", vector_json(st.qdot)}}; }

void parse_params(const json& j, AcmParams& p) {
  const std::string w = "params";
  check_keys(j, w, {"m_u", "I_u", "l_a", "r_a", "rho", "E", "g", "kappa_s", "quad_nodes", "arm_offset", "mount_down",
                    "paper_literal_te"});
  auto num = [&](const char* key, double& target) {
    if (j.contains(key)) target = as_number(j[key], join(w, key));
  };
  num("m_u", p.m_u);
  num("l_a", p.l_a);
  num("r_a", p.r_a);
  num("rho", p.rho);
  num("E", p.E);
  num("g", p.g);
  num("kappa_s", p.kappa_s);
  if (j.contains("I_u")) p.I_u = as_matrix<3>(j["I_u"], join(w, "I_u"));
  if (j.contains("quad_nodes")) p.quad_nodes = static_cast<int>(as_integer(j["quad_nodes"], join(w, "quad_nodes")));
  if (j.contains("arm_offset")) p.arm_offset = as_vector<3>(j["arm_offset"], join(w, "arm_offset"));
  if (j.contains("mount_down")) p.mount_down = as_bool(j["mount_down"], join(w, "mount_down"));
  if (j.contains("paper_literal_te")) p.paper_literal_te = as_bool(j["paper_literal_te"], join(w, "paper_literal_te"));
}

json params_json(const AcmParams& p) {
  return {{"m_u", p.m_u},         {"I_u", matrix_json(p.I_u)},  {"l_a", p.l_a},
          {"r_a", p.r_a},         {"rho", p.rho},               {"E", p.E},
          {"g", p.g},             {"kappa_s", p.kappa_s},       {"quad_nodes", p.quad_nodes},
          {"arm_offset", vector_json(p.arm_offset)}, {"mount_down", p.mount_down},
          {"paper_literal_te", p.paper_literal_te}};
}

void parse_scenario(const json& j, ScenarioConfig& s) {
  const std::string w = "scenario";
  check_keys(j, w, {"name", "duration", "dt", "mode", "initial_state"});
  if (j.contains("name")) s.name = as_string(j["name"], join(w, "name"));
  if (j.contains("duration")) s.duration = as_number(j["duration"], join(w, "duration"));
  if (j.contains("dt")) s.dt = as_number(j["dt"], join(w, "dt"));
  if (j.contains("mode")) s.mode = sim::run_mode_from_string(as_string(j["mode"], join(w, "mode")));
  if (j.contains("initial_state")) s.initial_state = parse_state(j["initial_state"], join(w, "initial_state"));
}

json scenario_json(const ScenarioConfig& s) {
  json j = {{"name", s.name}, {"mode", sim::to_string(s.mode)}};
  if (s.duration) j["duration"] = *s.duration;
  if (s.dt) j["dt"] = *s.dt;
  if (s.initial_state) j["initial_state"] = state_json(*s.initial_state);
  return j;
}

void parse_sweep(const json& j, SweepConfig& s) {
  const std::string w = "sweep";
  check_keys(j, w, {"axis", "values", "scenario", "duration", "dt"});
  if (j.contains("axis")) s.axis = as_string(j["axis"], join(w, "axis"));
  if (j.contains("values")) {
    const json& v = j["values"];
    if (!v.is_array()) throw ConfigError(join(w, "values"), "expected a list of numbers");
    std::vector<double> values;
    for (std::size_t i = 0; i < v.size(); ++i) values.push_back(as_number(v[i], join(w, "values") + "[" + std::to_string(i) + "]"));
    s.values = values;
  }
  if (j.contains("scenario")) s.scenario = as_string(j["scenario"], join(w, "scenario"));
  if (j.contains("duration")) s.duration = as_number(j["duration"], join(w, "duration"));
  if (j.contains("dt")) s.dt = as_number(j["dt"], join(w, "dt"));
}

json sweep_json(const SweepConfig& s) {
  json j = {{"axis", s.axis}};
  if (s.values) j["values"] = *s.values;
  if (s.scenario) j["scenario"] = *s.scenario;
  if (s.duration) j["duration"] = *s.duration;
  if (s.dt) j["dt"] = *s.dt;
  return j;
}

servo::EdotMode edot_from_string(const std::string& name) {
  if (name == "analytic") return servo::EdotMode::kAnalytic;
  if (name == "back_difference") return servo::EdotMode::kBackDifference;
  throw ConfigError("servo.edot", "expected analytic or back_difference, got '" + name + "'");
}

const char* to_string(servo::EdotMode mode) {
  return mode == servo::EdotMode::kAnalytic ? "analytic" : "back_difference";
}

void parse_servo(const json& j, ServoRunConfig& s) {
  const std::string w = "servo";
  check_keys(j, w, {"path", "mode", "horizon", "control_dt", "substeps", "edot", "paper_literal_ta", "null_damping",
                    "desired_depth", "record_every", "letter_speed", "intrinsics", "gains", "trajectory",
                    "initial_state"});
  auto num = [&](const char* key, double& target) {
    if (j.contains(key)) target = as_number(j[key], join(w, key));
  };
  if (j.contains("path")) s.path = as_string(j["path"], join(w, "path"));
  if (j.contains("mode")) s.mode = sim::run_mode_from_string(as_string(j["mode"], join(w, "mode")));
  num("horizon", s.servo.horizon);
  num("control_dt", s.servo.control_dt);
  num("null_damping", s.servo.null_damping);
  num("desired_depth", s.servo.desired_depth);
  num("letter_speed", s.letter_speed);
  if (j.contains("substeps")) s.servo.substeps = static_cast<int>(as_integer(j["substeps"], join(w, "substeps")));
  if (j.contains("edot")) s.servo.edot_mode = edot_from_string(as_string(j["edot"], join(w, "edot")));
  if (j.contains("paper_literal_ta")) s.servo.literal_ta = as_bool(j["paper_literal_ta"], join(w, "paper_literal_ta"));
  if (j.contains("record_every")) {
    const long every = as_integer(j["record_every"], join(w, "record_every"));
    if (every < 1) throw ConfigError(join(w, "record_every"), "must be >= 1");
    s.record_every = static_cast<std::size_t>(every);
  }
  if (j.contains("initial_state")) s.servo.initial_state = parse_state(j["initial_state"], join(w, "initial_state"));

  if (j.contains("intrinsics")) {
    const json& k = j["intrinsics"];
    const std::string wk = join(w, "intrinsics");
    check_keys(k, wk, {"fx", "fy", "cx", "cy", "width", "height"});
    auto& in = s.servo.intrinsics;
    if (k.contains("fx")) in.fx = as_number(k["fx"], join(wk, "fx"));
    if (k.contains("fy")) in.fy = as_number(k["fy"], join(wk, "fy"));
    if (k.contains("cx")) in.cx = as_number(k["cx"], join(wk, "cx"));
    if (k.contains("cy")) in.cy = as_number(k["cy"], join(wk, "cy"));
    if (k.contains("width")) in.width = static_cast<int>(as_integer(k["width"], join(wk, "width")));
    if (k.contains("height")) in.height = static_cast<int>(as_integer(k["height"], join(wk, "height")));
  }
  if (j.contains("gains")) {
    const json& g = j["gains"];
    const std::string wg = join(w, "gains");
    check_keys(g, wg, {"K_p", "K_d", "C_p", "C_d", "C_s", "sigma"});
    auto& gains = s.servo.gains;
    const std::pair<const char*, Mat6*> mats[] = {
        {"K_p", &gains.K_p}, {"K_d", &gains.K_d}, {"C_p", &gains.C_p}, {"C_d", &gains.C_d}, {"C_s", &gains.C_s}};
    for (const auto& [key, target] : mats) {
      if (g.contains(key)) *target = as_matrix<6>(g[key], join(wg, key));
    }
    if (g.contains("sigma")) gains.sigma = as_number(g["sigma"], join(wg, "sigma"));
  }
  if (j.contains("trajectory")) {
    const json& t = j["trajectory"];
    const std::string wt = join(w, "trajectory");
    check_keys(t, wt, {"plane_z", "square_side", "ramp_time", "hold_start", "origin"});
    auto& o = s.trajectory;
    if (t.contains("plane_z")) o.plane_z = as_number(t["plane_z"], join(wt, "plane_z"));
    if (t.contains("square_side")) o.square_side = as_number(t["square_side"], join(wt, "square_side"));
    if (t.contains("ramp_time")) o.ramp_time = as_number(t["ramp_time"], join(wt, "ramp_time"));
    if (t.contains("hold_start")) o.hold_start = as_number(t["hold_start"], join(wt, "hold_start"));
    if (t.contains("origin")) o.origin = as_vector<2>(t["origin"], join(wt, "origin"));
  }
}

json servo_json(const ServoRunConfig& s) {
  const auto& c = s.servo;
  const auto& g = c.gains;
  return {{"path", s.path},
          {"mode", sim::to_string(s.mode)},
          {"horizon", c.horizon},
          {"control_dt", c.control_dt},
          {"substeps", c.substeps},
          {"edot", to_string(c.edot_mode)},
          {"paper_literal_ta", c.literal_ta},
          {"null_damping", c.null_damping},
          {"desired_depth", c.desired_depth},
          {"record_every", s.record_every},
          {"letter_speed", s.letter_speed},
          {"intrinsics",
           {{"fx", c.intrinsics.fx},
            {"fy", c.intrinsics.fy},
            {"cx", c.intrinsics.cx},
            {"cy", c.intrinsics.cy},
            {"width", c.intrinsics.width},
            {"height", c.intrinsics.height}}},
          {"gains",
           {{"K_p", matrix_json(g.K_p)},
            {"K_d", matrix_json(g.K_d)},
            {"C_p", matrix_json(g.C_p)},
            {"C_d", matrix_json(g.C_d)},
            {"C_s", matrix_json(g.C_s)},
            {"sigma", g.sigma}}},
          {"trajectory",
           {{"plane_z", s.trajectory.plane_z},
            {"square_side", s.trajectory.square_side},
            {"ramp_time", s.trajectory.ramp_time},
            {"hold_start", s.trajectory.hold_start},
            {"origin", vector_json(s.trajectory.origin)}}},
          {"initial_state", state_json(c.initial_state)}};
}

void validate(const RunConfig& c) {
  c.params.validate();
  c.servo.servo.validate();
  if (c.jobs < 1) throw ConfigError("jobs", "must be >= 1");
  if (c.stride < 1) throw ConfigError("stride", "must be >= 1");
  if (!(c.servo.letter_speed > 0.0)) throw ConfigError("servo.letter_speed", "must be > 0");
  if (c.selftest.kinematic_samples < 1) throw ConfigError("selftest.kinematic_samples", "must be >= 1");
  if (c.selftest.dynamics_samples < 1) throw ConfigError("selftest.dynamics_samples", "must be >= 1");
}

// ---- command helpers -------------------------------------------------------

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::vector<std::string> outputs;
};

void write_output(Context& ctx, const fs::path& dir, const std::string& name, const std::string& contents) {
  io::write_file_atomic(dir / name, contents);
  ctx.outputs.push_back(name);
}

std::string iso_utc(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
#if defined(_WIN32)
  gmtime_s(&tm, &t);
#else
  gmtime_r(&t, &tm);
#endif
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

json platform_json() {
  json p;
#ifdef ACM_HAS_UTSNAME
  utsname u{};
  if (uname(&u) == 0) {
    p = {{"system", u.sysname}, {"release", u.release}, {"machine", u.machine}};
  }
#endif
  p["hardware_threads"] = std::thread::hardware_concurrency();
  return p;
}

json versions_json() {
  std::ostringstream eigen, nl, cli11;
  eigen << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION;
  nl << NLOHMANN_JSON_VERSION_MAJOR << '.' << NLOHMANN_JSON_VERSION_MINOR << '.' << NLOHMANN_JSON_VERSION_PATCH;
  cli11 << CLI11_VERSION_MAJOR << '.' << CLI11_VERSION_MINOR << '.' << CLI11_VERSION_PATCH;
  json v = {{"acm_sim", ACM_VERSION}, {"eigen", eigen.str()}, {"nlohmann_json", nl.str()}, {"cli11", cli11.str()}};
#if defined(__clang__)
  v["compiler"] = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  v["compiler"] = std::string("gcc ") + __VERSION__;
#endif
  return v;
}

void write_manifest(Context& ctx, const RunConfig& config, const std::string& command,
                    std::chrono::system_clock::time_point started, double wall_seconds) {
  const json m = {{"command", command},
                  {"config", to_json(config)},
                  {"versions", versions_json()},
                  {"platform", platform_json()},
                  {"started_utc", iso_utc(started)},
                  {"wall_seconds", wall_seconds},
                  {"outputs", ctx.outputs}};
  io::write_file_atomic(config.out / "manifest.json", m.dump(2) + "\n");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

sim::Scenario build_scenario(const std::string& name, const std::optional<double>& duration,
                             const std::optional<double>& dt) {
  sim::Scenario sc = sim::builtin_scenario(name);
  if (duration) sc.duration = *duration;
  if (dt) sc.dt = *dt;
  return sc;
}

std::vector<ModelMode> modes_of(sim::RunMode mode) {
  if (mode == sim::RunMode::kCoupled) return {ModelMode::kCoupled};
  if (mode == sim::RunMode::kDecoupled) return {ModelMode::kDecoupled};
  return {ModelMode::kCoupled, ModelMode::kDecoupled};
}

std::string fmt(double v) { return io::format_double(v); }

// ---- commands --------------------------------------------------------------

int cmd_run(RunConfig& config, Context& ctx) {
  const auto started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  sim::Scenario sc = build_scenario(config.scenario.name, config.scenario.duration, config.scenario.dt);
  if (config.scenario.initial_state) sc.initial_state = *config.scenario.initial_state;
  sc.mode = config.scenario.mode;
  sc.validate();
  config.scenario.duration = sc.duration;
  config.scenario.dt = sc.dt;
  config.scenario.initial_state = sc.initial_state;

  std::optional<sim::SimTrace> coupled, decoupled;
  if (sc.mode == sim::RunMode::kBoth) {
    sim::TracePair pair = sim::run_both(sc, config.params, config.jobs);
    coupled = std::move(pair.coupled);
    decoupled = std::move(pair.decoupled);
  } else if (sc.mode == sim::RunMode::kCoupled) {
    coupled = sim::run(sc, config.params, ModelMode::kCoupled);
  } else {
    decoupled = sim::run(sc, config.params, ModelMode::kDecoupled);
  }

  for (const auto* trace : {coupled ? &*coupled : nullptr, decoupled ? &*decoupled : nullptr}) {
    if (trace == nullptr) continue;
    std::ostringstream csv;
    io::write_trace_csv(csv, *trace, config.stride);
    write_output(ctx, config.out, sc.name + "_" + to_string(trace->mode) + ".csv", csv.str());
  }
  analysis::ComparisonReport report =
      analysis::compare(coupled ? &*coupled : nullptr, decoupled ? &*decoupled : nullptr);
  report.scenario = sc.name;
  write_output(ctx, config.out, "report.json", analysis::to_json(report) + "\n");
  const std::string text = analysis::to_text(report);
  write_output(ctx, config.out, "report.txt", text);
  write_manifest(ctx, config, "run", started, seconds_since(t0));
  ctx.out << text;
  return kExitOk;
}

int cmd_sweep(RunConfig& config, Context& ctx) {
  const auto started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  const sim::SweepAxis axis = sim::sweep_axis_from_string(config.sweep.axis);
  const std::vector<double> values = config.sweep.values ? *config.sweep.values : sim::default_sweep_values(axis);
  if (values.empty()) throw ConfigError("sweep.values", "empty value list");
  const std::string scenario_name =
      config.sweep.scenario ? *config.sweep.scenario
                            : (axis == sim::SweepAxis::kKappa0 ? "testE_bending" : "sweep_wrench");
  sim::Scenario base = build_scenario(scenario_name, config.sweep.duration, config.sweep.dt);
  base.validate();
  config.sweep.values = values;
  config.sweep.scenario = scenario_name;

  const auto entries = sim::parameter_sweep(base, config.params, axis, values, config.jobs);

  std::ostringstream overview;
  overview << "value,mode,t,tipx,tipy\n";
  json summary = {{"axis", config.sweep.axis}, {"scenario", scenario_name}, {"values", json::array()}};
  int failures = 0;
  for (const auto& entry : entries) {
    json item = {{"value", entry.value}};
    if (!entry.traces) {
      ++failures;
      item["error"] = entry.error;
      ctx.err << "sweep " << config.sweep.axis << " = " << entry.value << " failed: " << entry.error << '\n';
      summary["values"].push_back(item);
      continue;
    }
    for (const auto* trace : {&entry.traces->coupled, &entry.traces->decoupled}) {
      std::ostringstream csv;
      io::write_trace_csv(csv, *trace, config.stride);
      write_output(ctx, config.out,
                   config.sweep.axis + "_" + fmt(entry.value) + "_" + to_string(trace->mode) + ".csv", csv.str());
      for (std::size_t k : io::strided_indices(trace->size(), config.stride)) {
        overview << fmt(entry.value) << ',' << to_string(trace->mode) << ',' << fmt(trace->t[k]) << ','
            << fmt(trace->tip_position[k].x()) << ',' << fmt(trace->tip_position[k].y()) << '\n';
      }
    }
    item["displacement_coupled"] = analysis::tip_displacement(entry.traces->coupled);
    item["displacement_decoupled"] = analysis::tip_displacement(entry.traces->decoupled);
    item["gap_rms"] = analysis::tip_gap_rms(entry.traces->coupled, entry.traces->decoupled);
    ctx.out << config.sweep.axis << " = " << std::setw(10) << entry.value << "  displacement "
            << item["displacement_coupled"].get<double>() << " m  gap " << item["gap_rms"].get<double>() << " m\n";
    summary["values"].push_back(item);
  }
  write_output(ctx, config.out, "sweep_" + config.sweep.axis + ".csv", overview.str());
  write_output(ctx, config.out, "sweep.json", summary.dump(2) + "\n");
  write_manifest(ctx, config, "sweep", started, seconds_since(t0));
  return failures == 0 ? kExitOk : kExitNumeric;
}

struct NamedPath {
  std::string name;
  servo::TargetTrajectory path;
};

std::vector<NamedPath> resolve_paths(const ServoRunConfig& c) {
  const fs::path file(c.path);
  if (file.extension() == ".json" || fs::is_regular_file(file)) {
    return {{file.stem().string(), servo::load_path_json(file)}};
  }
  std::string letters = c.path;
  std::transform(letters.begin(), letters.end(), letters.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
  if (letters.empty() || letters.find_first_not_of("MRAL") != std::string::npos) {
    throw ConfigError("servo.path", "expected letters from M, R, A, L ('mral' for all four) or a .json path file; got '" +
                                        c.path + "'");
  }
  std::vector<NamedPath> out;
  for (char ch : letters) {
    out.push_back({std::string(1, ch), servo::TargetTrajectory(servo::letter_segments(ch, c.letter_speed), c.trajectory)});
  }
  return out;
}

json stats_json(const analysis::TimingStats& s) {
  return {{"steps", s.steps}, {"median_s", s.median}, {"p95_s", s.p95}};
}

int cmd_servo(RunConfig& config, Context& ctx) {
  const auto started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  const auto paths = resolve_paths(config.servo);
  const auto modes = modes_of(config.servo.mode);

  struct Job {
    std::size_t path;
    ModelMode mode;
    servo::ServoTrace trace;
  };
  std::vector<Job> jobs;
  for (std::size_t p = 0; p < paths.size(); ++p) {
    for (ModelMode m : modes) jobs.push_back({p, m, {}});
  }
  parallel_for(jobs.size(), config.jobs, [&](std::size_t i) {
    jobs[i].trace = servo::run_servo(paths[jobs[i].path].path, config.servo.servo, config.params, jobs[i].mode,
                                     paths[jobs[i].path].name);
  });

  const std::size_t every = config.servo.record_every;
  std::ostringstream tip_xy, qdot;
  tip_xy << "path,mode,t,tipx,tipy,targetx,targety\n";
  qdot << "path,mode,t,qdot_norm\n";
  json summary = {{"runs", json::array()}, {"ds", json::object()}, {"bound_set", json::object()}};
  std::vector<std::string> losses;
  std::map<std::string, std::vector<double>> all_steps;
  for (const Job& job : jobs) {
    const servo::ServoTrace& tr = job.trace;
    const std::string mode = to_string(job.mode);
    std::ostringstream csv;
    io::write_servo_csv(csv, tr, every);
    write_output(ctx, config.out, "servo_" + tr.path_name + "_" + mode + ".csv", csv.str());
    for (std::size_t k : io::strided_indices(tr.size(), every)) {
      tip_xy << tr.path_name << ',' << mode << ',' << fmt(tr.t[k]) << ',' << fmt(tr.tip[k].x()) << ','
           << fmt(tr.tip[k].y()) << ',' << fmt(tr.target[k].x()) << ',' << fmt(tr.target[k].y()) << '\n';
      qdot << tr.path_name << ',' << mode << ',' << fmt(tr.t[k]) << ',' << fmt(tr.qdot_norm[k]) << '\n';
    }
    const auto lyap = servo::lyapunov_summary(tr);
    json run = {{"path", tr.path_name},
                {"mode", mode},
                {"completed", tr.completed},
                {"hold_events", tr.hold_events},
                {"lyapunov", {{"outside", lyap.outside}, {"increases", lyap.increases}, {"worst_increase", lyap.worst_increase}}}};
    if (!tr.e_norm_px.empty()) {
      run["final_e_px"] = tr.e_norm_px.back();
      run["max_e_px"] = *std::max_element(tr.e_norm_px.begin(), tr.e_norm_px.end());
    }
    if (!tr.completed) {
      run["loss_time"] = tr.loss_time;
      run["loss_message"] = tr.loss_message;
      losses.push_back(tr.loss_message);
    }
    summary["runs"].push_back(run);
    auto& steps = all_steps[mode];
    steps.insert(steps.end(), tr.step_wall.begin(), tr.step_wall.end());
    ctx.out << tr.path_name << " " << mode << ": " << (tr.completed ? "completed" : "feature loss") << ", final |e| "
            << (tr.e_norm_px.empty() ? 0.0 : tr.e_norm_px.back()) << " px\n";
  }
  write_output(ctx, config.out, "tip_xy.csv", tip_xy.str());
  write_output(ctx, config.out, "qdot_norm.csv", qdot.str());

  for (const auto& np : paths) {
    const auto b = servo::bound_set(config.servo.servo.gains, np.path.bounds(1e-3, config.servo.servo.horizon));
    summary["bound_set"][np.name] = {{"lambda", b.lambda}, {"r_max", b.r_max}, {"radius", b.radius}};
  }

  json timing = {{"reference_ratio", analysis::kReferenceCostRatio}, {"paths", json::object()}};
  if (modes.size() == 2) {
    std::ostringstream ds_csv;
    ds_csv << "path,t,ds\n";
    for (std::size_t p = 0; p < paths.size(); ++p) {
      const servo::ServoTrace& c = jobs[2 * p].trace;
      const servo::ServoTrace& d = jobs[2 * p + 1].trace;
      const auto s = analysis::summarize_ds(c, d, config.servo.trajectory.ramp_time);
      json peaks = json::array();
      for (const auto& pk : s.peaks) {
        peaks.push_back({{"t", pk.t}, {"ds", pk.ds}, {"corner", pk.corner}, {"high_curvature", pk.high_curvature}});
      }
      summary["ds"][paths[p].name] = {{"max_abs_px", s.max_abs}, {"t_max", s.t_max}, {"peaks", peaks},
                                      {"attributed", s.attributed}};
      const std::size_t n = std::min(c.size(), d.size());
      for (std::size_t k : io::strided_indices(n, every)) {
        ds_csv << paths[p].name << ',' << fmt(c.t[k]) << ',' << fmt(c.e_norm_px[k] - d.e_norm_px[k]) << '\n';
      }
      ctx.out << paths[p].name << ": max |DS| " << s.max_abs << " px at t = " << s.t_max << " s\n";
    }
    write_output(ctx, config.out, "ds.csv", ds_csv.str());
  }
  for (const Job& job : jobs) {
    if (job.trace.step_wall.empty()) continue;
    timing["paths"][job.trace.path_name][to_string(job.mode)] = stats_json(analysis::timing_stats(job.trace.step_wall));
  }
  for (const auto& [mode, steps] : all_steps) {
    if (!steps.empty()) timing["overall"][mode] = stats_json(analysis::timing_stats(steps));
  }
  if (timing.contains("overall") && timing["overall"].contains("coupled") && timing["overall"].contains("decoupled")) {
    timing["overall"]["ratio"] =
        timing["overall"]["coupled"]["median_s"].get<double>() / timing["overall"]["decoupled"]["median_s"].get<double>();
  }
  write_output(ctx, config.out, "timing.json", timing.dump(2) + "\n");
  write_output(ctx, config.out, "servo_summary.json", summary.dump(2) + "\n");
  write_manifest(ctx, config, "servo", started, seconds_since(t0));

  if (!losses.empty()) {
    for (const auto& msg : losses) ctx.err << "feature loss: " << msg << '\n';
    return kExitServo;
  }
  return kExitOk;
}

int cmd_report(const fs::path& dir, const fs::path& out_dir, Context& ctx) {
  if (!fs::is_directory(dir)) throw ConfigError("dir", "not a directory: " + dir.string());
  std::map<std::string, std::map<std::string, fs::path>> sims, servos;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    const std::string stem = entry.path().stem().string();
    for (const std::string mode : {"coupled", "decoupled"}) {
      const std::string suffix = "_" + mode;
      if (stem.size() <= suffix.size() || stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) != 0) {
        continue;
      }
      const std::string base = stem.substr(0, stem.size() - suffix.size());
      if (base.rfind("servo_", 0) == 0) {
        servos[base.substr(6)][mode] = entry.path();
      } else {
        sims[base][mode] = entry.path();
      }
    }
  }
  if (sims.empty() && servos.empty()) throw ConfigError("dir", "no trace files in " + dir.string());

  json report = {{"scenarios", json::array()}, {"servo", json::array()}};
  std::ostringstream text;
  for (const auto& [name, files] : sims) {
    std::optional<sim::SimTrace> c, d;
    if (files.count("coupled")) c = io::read_trace_csv(files.at("coupled"), name, ModelMode::kCoupled);
    if (files.count("decoupled")) d = io::read_trace_csv(files.at("decoupled"), name, ModelMode::kDecoupled);
    auto r = analysis::compare(c ? &*c : nullptr, d ? &*d : nullptr);
    r.scenario = name;
    report["scenarios"].push_back(json::parse(analysis::to_json(r)));
    text << analysis::to_text(r) << '\n';
  }
  for (const auto& [name, files] : servos) {
    json item = {{"path", name}};
    std::optional<servo::ServoTrace> c, d;
    if (files.count("coupled")) c = io::read_servo_csv(files.at("coupled"));
    if (files.count("decoupled")) d = io::read_servo_csv(files.at("decoupled"));
    for (const auto* tr : {c ? &*c : nullptr, d ? &*d : nullptr}) {
      if (tr == nullptr || tr->e_norm_px.empty()) continue;
      item[std::string("final_e_px_") + to_string(tr->mode)] = tr->e_norm_px.back();
    }
    if (c && d) {
      const auto ds = analysis::ds_metric(analysis::error_norms(*c), analysis::error_norms(*d));
      double max_abs = 0.0, t_max = 0.0;
      for (const auto& [t, v] : ds) {
        if (std::abs(v) > max_abs) {
          max_abs = std::abs(v);
          t_max = t;
        }
      }
      item["max_abs_ds_px"] = max_abs;
      item["t_max"] = t_max;
      text << "servo " << name << ": max |DS| " << max_abs << " px at t = " << t_max << " s (recorded samples)\n";
    }
    report["servo"].push_back(item);
  }
  io::write_file_atomic(out_dir / "report.json", report.dump(2) + "\n");
  io::write_file_atomic(out_dir / "report.txt", text.str());
  ctx.out << text.str();
  return kExitOk;
}

int cmd_selftest(const RunConfig& config, Context& ctx) {
  const verify::SuiteResult results[] = {
      verify::kinematic_suite(config.selftest.kinematic_samples, config.seed, config.params),
      verify::dynamics_suite(config.selftest.dynamics_samples, config.seed, config.params),
      verify::coupling_entry_suite(config.params),
  };
  bool all = true;
  for (const auto& r : results) {
    all = all && r.pass;
    ctx.out << (r.pass ? "PASS " : "FAIL ") << r.name << " (" << std::fixed << std::setprecision(2) << r.seconds
            << " s)" << std::defaultfloat << std::setprecision(6);
    for (const auto& [key, value] : r.metrics) ctx.out << "  " << key << "=" << value;
    ctx.out << '\n';
    if (!r.detail.empty()) ctx.out << "  " << r.detail << '\n';
  }
  return all ? kExitOk : kExitSelftestFailed;
}

std::vector<double> parse_value_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(io::parse_double(item));
    } catch (const ConfigError&) {
      throw ConfigError("--values", "cannot parse '" + item + "'");
    }
  }
  return out;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", e.what());
  }
  if (j.is_object() && j.contains("command") && j.contains("config")) j = j["config"];
  check_keys(j, "", {"params", "scenario", "sweep", "servo", "selftest", "out", "seed", "jobs", "stride"});
  RunConfig c;
  if (j.contains("params")) parse_params(j["params"], c.params);
  if (j.contains("scenario")) parse_scenario(j["scenario"], c.scenario);
  if (j.contains("sweep")) parse_sweep(j["sweep"], c.sweep);
  if (j.contains("servo")) parse_servo(j["servo"], c.servo);
  if (j.contains("selftest")) {
    const json& s = j["selftest"];
    check_keys(s, "selftest", {"kinematic_samples", "dynamics_samples"});
    if (s.contains("kinematic_samples")) {
      c.selftest.kinematic_samples = static_cast<int>(as_integer(s["kinematic_samples"], "selftest.kinematic_samples"));
    }
    if (s.contains("dynamics_samples")) {
      c.selftest.dynamics_samples = static_cast<int>(as_integer(s["dynamics_samples"], "selftest.dynamics_samples"));
    }
  }
  if (j.contains("out")) c.out = as_string(j["out"], "out");
  if (j.contains("seed")) {
    const long seed = as_integer(j["seed"], "seed");
    if (seed < 0) throw ConfigError("seed", "must be >= 0");
    c.seed = static_cast<std::uint64_t>(seed);
  }
  if (j.contains("jobs")) c.jobs = static_cast<int>(as_integer(j["jobs"], "jobs"));
  if (j.contains("stride")) {
    const long stride = as_integer(j["stride"], "stride");
    if (stride < 1) throw ConfigError("stride", "must be >= 1");
    c.stride = static_cast<std::size_t>(stride);
  }
  validate(c);
  return c;
}

RunConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("config", "cannot open " + file.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

json to_json(const RunConfig& c) {
  return {{"params", params_json(c.params)},
          {"scenario", scenario_json(c.scenario)},
          {"sweep", sweep_json(c.sweep)},
          {"servo", servo_json(c.servo)},
          {"selftest", {{"kinematic_samples", c.selftest.kinematic_samples}, {"dynamics_samples", c.selftest.dynamics_samples}}},
          {"out", c.out.string()},
          {"seed", c.seed},
          {"jobs", c.jobs},
          {"stride", c.stride}};
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coupled and decoupled dynamics of an aerial continuum manipulator, with image-based visual servoing."};
  app.name("acm_sim");
  app.require_subcommand(1);

  std::string config_file, out_dir;
  int jobs = 1;
  std::uint64_t seed = 1;
  bool literal_te = false;
  std::map<CLI::App*, std::vector<CLI::Option*>> common;
  auto add_common = [&](CLI::App* sub) {
    common[sub] = {sub->add_option("--config", config_file, "JSON config file (or a manifest.json)"),
                   sub->add_option("--out", out_dir, "Output directory"),
                   sub->add_option("--jobs", jobs, "Parallel runs")->envname("ACM_SIM_JOBS")->check(CLI::PositiveNumber),
                   sub->add_option("--seed", seed, "Seed for randomized checks"),
                   sub->add_flag("--paper-literal-te", literal_te, "Inverse Euler-rate map in the Jacobian base columns")};
  };

  std::string scenario, model, axis, values, path, edot, dir;
  double dt = 0.0, duration = 0.0, horizon = 0.0, control_dt = 0.0;
  std::size_t stride = 1, record_every = 1;
  int kin_samples = 0, dyn_samples = 0;
  bool literal_ta = false;

  CLI::App* run = app.add_subcommand("run", "Simulate one scenario in one or both models");
  add_common(run);
  auto* run_scenario = run->add_option("--scenario", scenario, "testA, testB, testC, testD, testE_bending, sweep_wrench");
  auto* run_dt = run->add_option("--dt", dt, "Step size [s]");
  auto* run_duration = run->add_option("--duration", duration, "Horizon [s]");
  auto* run_model = run->add_option("--model", model, "coupled, decoupled or both");
  auto* run_stride = run->add_option("--stride", stride, "Write every n-th record");

  CLI::App* sweep = app.add_subcommand("sweep", "Coupled/decoupled pairs over one parameter axis");
  add_common(sweep);
  auto* sweep_axis = sweep->add_option("--axis", axis, "r_a, m_u, l_a, E, kappa0 or phi0");
  auto* sweep_values = sweep->add_option("--values", values, "Comma-separated values");
  auto* sweep_scenario = sweep->add_option("--scenario", scenario, "Base scenario");
  auto* sweep_dt = sweep->add_option("--dt", dt, "Step size [s]");
  auto* sweep_duration = sweep->add_option("--duration", duration, "Horizon [s]");
  auto* sweep_stride = sweep->add_option("--stride", stride, "Write every n-th record");

  CLI::App* servo_cmd = app.add_subcommand("servo", "Closed-loop visual tracking of letter or file paths");
  add_common(servo_cmd);
  auto* servo_path = servo_cmd->add_option("--path", path, "Letters from MRAL, 'mral', or a .json path file");
  auto* servo_model = servo_cmd->add_option("--model", model, "coupled, decoupled or both");
  auto* servo_horizon = servo_cmd->add_option("--horizon", horizon, "Horizon [s]");
  auto* servo_cdt = servo_cmd->add_option("--control-dt", control_dt, "Control period [s]");
  auto* servo_edot = servo_cmd->add_option("--edot", edot, "analytic or back_difference");
  auto* servo_ta = servo_cmd->add_flag("--paper-literal-ta", literal_ta, "Euler-rate blocks in the task Jacobian");
  auto* servo_every = servo_cmd->add_option("--record-every", record_every, "Write every n-th control step");

  CLI::App* report = app.add_subcommand("report", "Recompute metrics from trace files in a directory");
  report->add_option("--dir", dir, "Directory with trace CSVs")->required();
  auto* report_out = report->add_option("--out", out_dir, "Where report.json and report.txt go (default: --dir)");

  CLI::App* selftest = app.add_subcommand("selftest", "Run the kinematic, dynamics and coupling-entry oracle suites");
  add_common(selftest);
  auto* st_kin = selftest->add_option("--kinematic-samples", kin_samples, "Random configurations");
  auto* st_dyn = selftest->add_option("--dynamics-samples", dyn_samples, "Random states");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  Context ctx{out, err, {}};
  try {
    if (report->parsed()) {
      return cmd_report(dir, report_out->count() ? fs::path(out_dir) : fs::path(dir), ctx);
    }
    CLI::App* sub = app.get_subcommands().front();
    RunConfig config = config_file.empty() ? RunConfig{} : load_config(config_file);
    const auto& opts = common[sub];
    if (opts[1]->count()) config.out = out_dir;
    if (opts[2]->count()) config.jobs = jobs;
    if (opts[3]->count()) config.seed = seed;
    if (literal_te) config.params.paper_literal_te = true;

    if (sub == run) {
      if (run_scenario->count()) config.scenario.name = scenario;
      if (run_dt->count()) config.scenario.dt = dt;
      if (run_duration->count()) config.scenario.duration = duration;
      if (run_model->count()) config.scenario.mode = sim::run_mode_from_string(model);
      if (run_stride->count()) config.stride = stride;
    } else if (sub == sweep) {
      if (sweep_axis->count()) config.sweep.axis = axis;
      if (sweep_values->count()) config.sweep.values = parse_value_list(values);
      if (sweep_scenario->count()) config.sweep.scenario = scenario;
      if (sweep_dt->count()) config.sweep.dt = dt;
      if (sweep_duration->count()) config.sweep.duration = duration;
      if (sweep_stride->count()) config.stride = stride;
    } else if (sub == servo_cmd) {
      if (servo_path->count()) config.servo.path = path;
      if (servo_model->count()) config.servo.mode = sim::run_mode_from_string(model);
      if (servo_horizon->count()) config.servo.servo.horizon = horizon;
      if (servo_cdt->count()) config.servo.servo.control_dt = control_dt;
      if (servo_edot->count()) config.servo.servo.edot_mode = edot_from_string(edot);
      if (servo_ta->count()) config.servo.servo.literal_ta = literal_ta;
      if (servo_every->count()) config.servo.record_every = record_every;
    } else if (sub == selftest) {
      if (st_kin->count()) config.selftest.kinematic_samples = kin_samples;
      if (st_dyn->count()) config.selftest.dynamics_samples = dyn_samples;
    }
    if (config.stride < 1) throw ConfigError("stride", "must be >= 1");
    if (config.servo.record_every < 1) throw ConfigError("record_every", "must be >= 1");
    validate(config);

    if (sub == run) return cmd_run(config, ctx);
    if (sub == sweep) return cmd_sweep(config, ctx);
    if (sub == servo_cmd) return cmd_servo(config, ctx);
    return cmd_selftest(config, ctx);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IntegrationBlowupError& e) {
    err << "numeric error at step " << e.step() << " (t = " << e.time() << " s): " << e.what() << '\n';
    return kExitNumeric;
  } catch (const FeatureLossError& e) {
    err << "feature loss at t = " << e.time() << " s: " << e.what() << '\n';
    return kExitServo;
  } catch (const AcmError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const fs::filesystem_error& e) {
    err << "file error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace acm::cli
