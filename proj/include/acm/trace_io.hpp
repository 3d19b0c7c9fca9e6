#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "acm/servo.hpp"
#include "acm/simulation.hpp"

// Trace CSV: one header row, then one row per record with columns
// t, q1..q8, qd1..qd8, tipx, tipy, tipz, tip_rotvec_x..z, K, U, E_total, step_wall_s.
// Numbers are written in shortest round-trip form, so reading a written trace
// gives back the same doubles.
namespace acm::io {

const std::vector<std::string>& trace_columns();

// Every `stride`-th record is written; the last record always is.
void write_trace_csv(std::ostream& out, const sim::SimTrace& trace, std::size_t stride = 1);

// Throws ConfigError on a wrong header, a short row or an unparsable number
// (the message names the line). Scenario name and mode are not stored in the
// file and are taken from the arguments.
sim::SimTrace read_trace_csv(std::istream& in, const std::string& scenario = "",
                             ModelMode mode = ModelMode::kCoupled);

sim::SimTrace read_trace_csv(const std::filesystem::path& path, const std::string& scenario = "",
                             ModelMode mode = ModelMode::kCoupled);

// Shortest representation that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

void write_trace_csv(const std::filesystem::path& path, const sim::SimTrace& trace, std::size_t stride = 1);

// Servo trace CSV: t, e_1..e_2N (normalized), e_norm_px, V, tau_1..tau_8,
// tipx, tipy, tipz, mode. N is taken from the first record.
std::vector<std::string> servo_columns(int features);
void write_servo_csv(std::ostream& out, const servo::ServoTrace& trace, std::size_t stride = 1);
void write_servo_csv(const std::filesystem::path& path, const servo::ServoTrace& trace, std::size_t stride = 1);

// Record indices 0, stride, 2 stride, ... plus the last one.
std::vector<std::size_t> strided_indices(std::size_t size, std::size_t stride);

// Restores t, e, e_norm_px, V, tau, tip and mode; N is inferred from the
// header. Throws ConfigError like read_trace_csv.
servo::ServoTrace read_servo_csv(std::istream& in, const std::string& name = "");
servo::ServoTrace read_servo_csv(const std::filesystem::path& path);

}  // namespace acm::io
