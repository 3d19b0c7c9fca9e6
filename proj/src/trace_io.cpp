#include "acm/trace_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "acm/errors.hpp"

namespace acm::io {

namespace {

constexpr std::size_t kColumns = 1 + 8 + 8 + 3 + 3 + 4;

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

const std::vector<std::string>& trace_columns() {
  static const std::vector<std::string> columns = [] {
    std::vector<std::string> c{"t"};
    for (int i = 1; i <= 8; ++i) c.push_back("q" + std::to_string(i));
    for (int i = 1; i <= 8; ++i) c.push_back("qd" + std::to_string(i));
    for (const char* name : {"tipx", "tipy", "tipz", "tip_rotvec_x", "tip_rotvec_y", "tip_rotvec_z", "K", "U",
                             "E_total", "step_wall_s"}) {
      c.emplace_back(name);
    }
    return c;
  }();
  return columns;
}

std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError("cannot parse number '" + std::string(text) + "'");
  }
  return value;
}

std::vector<std::size_t> strided_indices(std::size_t size, std::size_t stride) {
  if (stride == 0) throw ConfigError("stride", "must be >= 1");
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < size; k += stride) out.push_back(k);
  if (size > 0 && out.back() != size - 1) out.push_back(size - 1);
  return out;
}

void write_trace_csv(std::ostream& out, const sim::SimTrace& trace, std::size_t stride) {
  const auto& cols = trace_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  std::string row;
  for (std::size_t k : strided_indices(trace.size(), stride)) {
    row.clear();
    auto put = [&row](double v) {
      if (!row.empty()) row += ',';
      row += format_double(v);
    };
    put(trace.t[k]);
    for (int i = 0; i < 8; ++i) put(trace.states[k].q[i]);
    for (int i = 0; i < 8; ++i) put(trace.states[k].qdot[i]);
    for (int i = 0; i < 3; ++i) put(trace.tip_position[k][i]);
    for (int i = 0; i < 3; ++i) put(trace.tip_rotvec[k][i]);
    put(trace.kinetic[k]);
    put(trace.potential[k]);
    put(trace.total[k]);
    put(trace.step_wall[k]);
    out << row << '\n';
  }
}

sim::SimTrace read_trace_csv(std::istream& in, const std::string& scenario, ModelMode mode) {
  sim::SimTrace trace;
  trace.scenario = scenario;
  trace.mode = mode;

  std::string line;
  if (!std::getline(in, line)) throw ConfigError("trace csv: missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  const auto& cols = trace_columns();
  if (header.size() != cols.size()) throw ConfigError("trace csv: header has " + std::to_string(header.size()) +
                                                      " columns, expected " + std::to_string(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (header[i] != cols[i]) {
      throw ConfigError("trace csv: column " + std::to_string(i + 1) + " is '" + std::string(header[i]) +
                        "', expected '" + cols[i] + "'");
    }
  }

  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != kColumns) {
      throw ConfigError("trace csv line " + std::to_string(line_no) + ": " + std::to_string(fields.size()) +
                        " fields, expected " + std::to_string(kColumns));
    }
    double v[kColumns];
    try {
      for (std::size_t i = 0; i < kColumns; ++i) v[i] = parse_double(fields[i]);
    } catch (const ConfigError& e) {
      throw ConfigError("trace csv line " + std::to_string(line_no) + ": " + e.what());
    }
    GeneralizedState st;
    for (int i = 0; i < 8; ++i) {
      st.q[i] = v[1 + i];
      st.qdot[i] = v[9 + i];
    }
    trace.t.push_back(v[0]);
    trace.states.push_back(st);
    trace.tip_position.emplace_back(v[17], v[18], v[19]);
    trace.tip_rotvec.emplace_back(v[20], v[21], v[22]);
    trace.kinetic.push_back(v[23]);
    trace.potential.push_back(v[24]);
    trace.total.push_back(v[25]);
    trace.step_wall.push_back(v[26]);
  }
  if (trace.t.size() > 1) trace.dt = trace.t[1] - trace.t[0];
  return trace;
}

sim::SimTrace read_trace_csv(const std::filesystem::path& path, const std::string& scenario, ModelMode mode) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return read_trace_csv(in, scenario, mode);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw ConfigError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_trace_csv(const std::filesystem::path& path, const sim::SimTrace& trace, std::size_t stride) {
  std::ostringstream out;
  write_trace_csv(out, trace, stride);
  write_file_atomic(path, out.str());
}

std::vector<std::string> servo_columns(int features) {
  std::vector<std::string> c{"t"};
  for (int i = 1; i <= 2 * features; ++i) c.push_back("e_" + std::to_string(i));
  c.emplace_back("e_norm_px");
  c.emplace_back("V");
  for (int i = 1; i <= 8; ++i) c.push_back("tau_" + std::to_string(i));
  for (const char* name : {"tipx", "tipy", "tipz", "mode"}) c.emplace_back(name);
  return c;
}

void write_servo_csv(std::ostream& out, const servo::ServoTrace& trace, std::size_t stride) {
  const int n = trace.e.empty() ? 4 : static_cast<int>(trace.e.front().size() / 2);
  const auto cols = servo_columns(n);
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  const std::string mode = to_string(trace.mode);
  std::string row;
  for (std::size_t k : strided_indices(trace.size(), stride)) {
    row.clear();
    auto put = [&row](double v) {
      if (!row.empty()) row += ',';
      row += format_double(v);
    };
    put(trace.t[k]);
    for (int i = 0; i < trace.e[k].size(); ++i) put(trace.e[k][i]);
    put(trace.e_norm_px[k]);
    put(trace.V[k]);
    for (int i = 0; i < 8; ++i) put(trace.tau[k][i]);
    for (int i = 0; i < 3; ++i) put(trace.tip[k][i]);
    out << row << ',' << mode << '\n';
  }
}

void write_servo_csv(const std::filesystem::path& path, const servo::ServoTrace& trace, std::size_t stride) {
  std::ostringstream out;
  write_servo_csv(out, trace, stride);
  write_file_atomic(path, out.str());
}

servo::ServoTrace read_servo_csv(std::istream& in, const std::string& name) {
  servo::ServoTrace trace;
  trace.path_name = name;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("servo csv: missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  const long fixed = 1 + 2 + 8 + 3 + 1;
  const long extra = static_cast<long>(header.size()) - fixed;
  if (extra < 2 || extra % 2 != 0) {
    throw ConfigError("servo csv: header has " + std::to_string(header.size()) + " columns");
  }
  const int n = static_cast<int>(extra / 2);
  const auto cols = servo_columns(n);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (header[i] != cols[i]) {
      throw ConfigError("servo csv: column " + std::to_string(i + 1) + " is '" + std::string(header[i]) +
                        "', expected '" + cols[i] + "'");
    }
  }

  long line_no = 1;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line);
    const std::string where = "servo csv line " + std::to_string(line_no) + ": ";
    if (fields.size() != cols.size()) {
      throw ConfigError(where + std::to_string(fields.size()) + " fields, expected " + std::to_string(cols.size()));
    }
    std::vector<double> v(cols.size() - 1);
    try {
      for (std::size_t i = 0; i + 1 < cols.size(); ++i) v[i] = parse_double(fields[i]);
      const ModelMode mode = model_mode_from_string(std::string(fields.back()));
      if (first) trace.mode = mode;
      else if (mode != trace.mode) throw ConfigError("mode changes within the file");
    } catch (const AcmError& e) {
      throw ConfigError(where + e.what());
    }
    first = false;
    std::size_t c = 0;
    trace.t.push_back(v[c++]);
    servo::VecX e(2 * n);
    for (int i = 0; i < 2 * n; ++i) e[i] = v[c++];
    trace.e.push_back(e);
    trace.e_norm_px.push_back(v[c++]);
    trace.V.push_back(v[c++]);
    Vec8 tau;
    for (int i = 0; i < 8; ++i) tau[i] = v[c++];
    trace.tau.push_back(tau);
    trace.tip.emplace_back(v[c], v[c + 1], v[c + 2]);
  }
  return trace;
}

servo::ServoTrace read_servo_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return read_servo_csv(in, path.stem().string());
}

}  // namespace acm::io
