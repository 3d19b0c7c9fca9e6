#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "acm/params.hpp"
#include "acm/servo.hpp"
#include "acm/simulation.hpp"

// Configuration and commands of the acm_sim executable.
namespace acm::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitSelftestFailed = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitServo = 4;

struct ScenarioConfig {
  std::string name = "testB";
  std::optional<double> duration;
  std::optional<double> dt;
  sim::RunMode mode = sim::RunMode::kBoth;
  std::optional<GeneralizedState> initial_state;
};

struct SweepConfig {
  std::string axis = "r_a";
  std::optional<std::vector<double>> values;  // unset: the axis defaults
  std::optional<std::string> scenario;  // default: testE_bending for kappa0, sweep_wrench otherwise
  std::optional<double> duration;
  std::optional<double> dt;
};

struct ServoRunConfig {
  std::string path = "mral";  // letters from {M, R, A, L}, "mral", or a JSON path file
  sim::RunMode mode = sim::RunMode::kBoth;
  servo::ServoConfig servo;
  servo::TrajectoryOptions trajectory;
  double letter_speed = 0.1;   // [m/s]
  std::size_t record_every = 100;
};

struct SelftestConfig {
  int kinematic_samples = 1000;
  int dynamics_samples = 500;
};

struct RunConfig {
  AcmParams params;
  ScenarioConfig scenario;
  SweepConfig sweep;
  ServoRunConfig servo;
  SelftestConfig selftest;
  std::filesystem::path out = "out";
  std::uint64_t seed = 1;
  int jobs = 1;
  std::size_t stride = 1;  // trace CSV decimation for run and sweep
};

// Parses a config document. Unknown keys, wrong types and invalid values
// throw ConfigError naming the dotted field path; JSON syntax errors name the
// line and column. A manifest written by this tool is accepted too (its
// "config" member is used).
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& file);

// Full config as JSON; parse_config(to_json(c).dump()) reproduces c.
nlohmann::json to_json(const RunConfig& config);

// Entry point of acm_sim. Returns the exit code.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace acm::cli
