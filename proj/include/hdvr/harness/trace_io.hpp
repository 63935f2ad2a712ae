#pragma once

// Trace, voltage-profile and message-log files.
//
// Trace CSV columns: t,residual,objective,v_min,v_max,P0,coupling_flops,messages
// (residual is ||z(t) - z(t-1)||_2). A summary block of "# key,value" lines
// follows the rows: converged, iterations, stop, step, and when available
// certificate_M, certificate_L, step_bound.

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hdvr/harness/feeder_io.hpp"
#include "hdvr/hierarchy/messages.hpp"
#include "hdvr/run.hpp"

namespace hdvr {

inline constexpr const char* kTraceHeader = "t,residual,objective,v_min,v_max,P0,coupling_flops,messages";

inline void write_trace(std::ostream& out, const RunTrace& trace) {
  out << kTraceHeader << '\n';
  for (const auto& r : trace.records) {
    out << r.t << ',' << format_double(r.residual) << ',' << format_double(r.objective) << ','
        << format_double(r.v_min) << ',' << format_double(r.v_max) << ',' << format_double(r.p0) << ','
        << r.coupling_flops << ',' << r.messages << '\n';
  }
  out << "# converged," << (trace.converged ? "true" : "false") << '\n';
  out << "# iterations," << trace.iterations << '\n';
  out << "# stop," << to_string(trace.stop) << '\n';
  out << "# step," << format_double(trace.step) << '\n';
  if (trace.certificate) {
    out << "# certificate_M," << format_double(trace.certificate->M) << '\n';
    out << "# certificate_L," << format_double(trace.certificate->L) << '\n';
    out << "# step_bound," << format_double(trace.certificate->step_bound) << '\n';
  }
}

inline void write_trace(const std::string& path, const RunTrace& trace) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write trace file '" + path + "'");
  write_trace(out, trace);
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

template <class T>
T parse_cell(const std::string& cell, const std::string& source, std::size_t line) {
  T v{};
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
    throw ValidationError(source + ":" + std::to_string(line) + ": bad value '" + cell + "'");
  }
  return v;
}

}  // namespace detail

// Reads a trace back; wall time and the infinity-norm residual are not stored.
inline RunTrace parse_trace(std::istream& in, const std::string& source = "<trace>") {
  RunTrace trace;
  std::string line;
  std::size_t number = 0;
  if (!std::getline(in, line) || (++number, line != kTraceHeader)) {
    throw ValidationError(source + ":1: expected header '" + std::string(kTraceHeader) + "'");
  }
  ConvergenceCertificate cert;
  bool has_cert = false;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto cells = detail::split_csv(line.substr(line.find_first_not_of("# ")));
      if (cells.size() != 2) throw ValidationError(source + ":" + std::to_string(number) + ": bad summary line");
      const auto& key = cells[0];
      const auto& val = cells[1];
      if (key == "converged") {
        trace.converged = val == "true";
      } else if (key == "iterations") {
        trace.iterations = detail::parse_cell<std::size_t>(val, source, number);
      } else if (key == "stop") {
        trace.stop = parse_stop_rule(val);
      } else if (key == "step") {
        trace.step = detail::parse_cell<double>(val, source, number);
      } else if (key == "certificate_M") {
        cert.M = detail::parse_cell<double>(val, source, number);
        has_cert = true;
      } else if (key == "certificate_L") {
        cert.L = detail::parse_cell<double>(val, source, number);
      } else if (key == "step_bound") {
        cert.step_bound = detail::parse_cell<double>(val, source, number);
      }
      continue;
    }
    const auto cells = detail::split_csv(line);
    if (cells.size() != 8) {
      throw ValidationError(source + ":" + std::to_string(number) + ": expected 8 columns, got " +
                            std::to_string(cells.size()));
    }
    IterationRecord r;
    r.t = detail::parse_cell<std::size_t>(cells[0], source, number);
    r.residual = detail::parse_cell<double>(cells[1], source, number);
    r.objective = detail::parse_cell<double>(cells[2], source, number);
    r.v_min = detail::parse_cell<double>(cells[3], source, number);
    r.v_max = detail::parse_cell<double>(cells[4], source, number);
    r.p0 = detail::parse_cell<double>(cells[5], source, number);
    r.coupling_flops = detail::parse_cell<std::uint64_t>(cells[6], source, number);
    r.messages = detail::parse_cell<std::uint64_t>(cells[7], source, number);
    trace.records.push_back(r);
  }
  if (has_cert) trace.certificate = cert;
  return trace;
}

inline RunTrace read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open trace file '" + path + "'");
  return parse_trace(in, path);
}

// node,v_initial,v_final,v_min,v_max
inline void write_profile(std::ostream& out, const Vector& v_initial, const Vector& v_final, const Vector& v_min,
                          const Vector& v_max) {
  out << "node,v_initial,v_final,v_min,v_max\n";
  for (Eigen::Index s = 0; s < v_final.size(); ++s) {
    out << node_at(s) << ',' << format_double(v_initial[s]) << ',' << format_double(v_final[s]) << ','
        << format_double(v_min[s]) << ',' << format_double(v_max[s]) << '\n';
  }
}

inline void write_profile(const std::string& path, const Vector& v_initial, const Vector& v_final, const Vector& v_min,
                          const Vector& v_max) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write profile file '" + path + "'");
  write_profile(out, v_initial, v_final, v_min, v_max);
}

inline void write_message_log(const std::string& path, const RoundMessageLog& log) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write message log '" + path + "'");
  log.write_csv(out);
}

}  // namespace hdvr
