#pragma once

// Text formats for feeders and partitions.
//
// Feeder file: '#' starts a comment; blank lines are ignored; sections are
// introduced by a bracketed name. All values are per unit.
//
//   [base]
//   v0 1.0
//   nodes 3
//   [nodes]          # id p0 q0   (nominal injections; loads are negative)
//   1 -0.02 -0.01
//   [lines]          # from to r x
//   0 1 0.01 0.02
//   [devices]        # node cost_p cost_q p_target q_target p_min p_max q_min q_max
//   2 1 1 0 0 -0.05 0.05 -0.05 0.05
//   [bounds]         # node v_min v_max; '*' sets every node
//   * 0.95 1.05
//
// Nodes missing from [nodes] have zero nominal injection; nodes missing from
// [devices] have no controllable device (box {0} x {0}); bounds default to
// [0.95, 1.05]. A '*' bounds row applies before any per-node rows.
//
// Partition file:
//
//   ag 2 4 5         # members of one AG (root inferred)
//   unclustered 1 3  # optional; checked against the complement when present

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "hdvr/hierarchy/partition.hpp"
#include "hdvr/opf.hpp"

namespace hdvr {

struct FeederFile {
  FeederModel model;
  std::vector<DeviceSpec> devices;  // slot order, one per node
  Vector v_min;
  Vector v_max;

  friend bool operator==(const FeederFile& a, const FeederFile& b) {
    return a.model == b.model && a.devices == b.devices && a.v_min.size() == b.v_min.size() &&
           a.v_min == b.v_min && a.v_max == b.v_max;
  }
};

// Default devices and bounds for a bare model.
inline FeederFile make_feeder_file(FeederModel model, double v_min = 0.95, double v_max = 1.05) {
  const auto n = model.size();
  FeederFile f{std::move(model), {}, Vector::Constant(n, v_min), Vector::Constant(n, v_max)};
  f.devices.assign(static_cast<std::size_t>(n), DeviceSpec::fixed());
  return f;
}

// Shortest decimal form that reads back to the same double.
inline std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string_view strip_comment(std::string_view line) {
  const auto hash = line.find('#');
  return hash == std::string_view::npos ? line : line.substr(0, hash);
}

class LineError {
 public:
  LineError(std::string source, std::size_t line) : source_(std::move(source)), line_(line) {}
  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError(source_ + ":" + std::to_string(line_) + ": " + what);
  }
  double number(std::string_view text) const {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) fail("bad number '" + std::string(text) + "'");
    return v;
  }
  NodeId node(std::string_view text) const {
    long v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size() || v < 0 || v > 100'000'000) {
      fail("bad node id '" + std::string(text) + "'");
    }
    return static_cast<NodeId>(v);
  }
  void arity(const std::vector<std::string_view>& f, std::size_t n, const char* what) const {
    if (f.size() != n) fail(std::string(what) + " rows need " + std::to_string(n) + " fields, got " + std::to_string(f.size()));
  }

 private:
  std::string source_;
  std::size_t line_;
};

}  // namespace detail

inline FeederFile parse_feeder(std::istream& in, const std::string& source = "<feeder>") {
  std::string section;
  std::optional<double> v0;
  std::optional<std::size_t> declared;
  struct NodeRow { NodeId id; double p, q; std::size_t line; };
  struct DeviceRow { NodeId id; DeviceSpec dev; std::size_t line; };
  struct BoundRow { std::optional<NodeId> id; double lo, hi; std::size_t line; };
  std::vector<NodeRow> node_rows;
  std::vector<Line> lines;
  std::vector<DeviceRow> device_rows;
  std::vector<BoundRow> bound_rows;

  std::string raw;
  std::size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const detail::LineError at(source, number);
    const auto fields = detail::split_fields(detail::strip_comment(raw));
    if (fields.empty()) continue;
    if (fields[0].front() == '[') {
      if (fields.size() != 1 || fields[0].back() != ']') at.fail("malformed section header");
      section = std::string(fields[0].substr(1, fields[0].size() - 2));
      if (section != "base" && section != "nodes" && section != "lines" && section != "devices" && section != "bounds") {
        at.fail("unknown section [" + section + "]");
      }
      continue;
    }
    if (section.empty()) at.fail("data before any section header");
    if (section == "base") {
      at.arity(fields, 2, "[base]");
      if (fields[0] == "v0") {
        v0 = at.number(fields[1]);
      } else if (fields[0] == "nodes") {
        declared = static_cast<std::size_t>(at.node(fields[1]));
      } else {
        at.fail("unknown [base] key '" + std::string(fields[0]) + "'");
      }
    } else if (section == "nodes") {
      at.arity(fields, 3, "[nodes]");
      node_rows.push_back({at.node(fields[0]), at.number(fields[1]), at.number(fields[2]), number});
    } else if (section == "lines") {
      at.arity(fields, 4, "[lines]");
      lines.push_back({at.node(fields[0]), at.node(fields[1]), at.number(fields[2]), at.number(fields[3])});
    } else if (section == "devices") {
      at.arity(fields, 9, "[devices]");
      DeviceSpec d;
      d.cost_p = at.number(fields[1]);
      d.cost_q = at.number(fields[2]);
      d.p_target = at.number(fields[3]);
      d.q_target = at.number(fields[4]);
      d.box = {at.number(fields[5]), at.number(fields[6]), at.number(fields[7]), at.number(fields[8])};
      device_rows.push_back({at.node(fields[0]), d, number});
    } else {
      at.arity(fields, 3, "[bounds]");
      std::optional<NodeId> id;
      if (fields[0] != "*") id = at.node(fields[0]);
      bound_rows.push_back({id, at.number(fields[1]), at.number(fields[2]), number});
    }
  }

  std::size_t n = declared.value_or(lines.size());
  if (declared && *declared != lines.size()) {
    throw ValidationError(source + ": [base] declares " + std::to_string(*declared) + " nodes but [lines] has " +
                          std::to_string(lines.size()) + " rows");
  }
  FeederModel model(n, lines, v0.value_or(1.0));
  auto check_id = [&](NodeId id, std::size_t line, const char* where) {
    if (id < 1 || static_cast<std::size_t>(id) > n) {
      detail::LineError(source, line).fail(std::string(where) + " refers to unknown node " + std::to_string(id));
    }
  };
  for (const auto& r : node_rows) {
    check_id(r.id, r.line, "[nodes]");
    model.p_nominal[slot(r.id)] = r.p;
    model.q_nominal[slot(r.id)] = r.q;
  }
  if (auto report = validate_tree(model); !report.ok()) {
    throw ValidationError(source + ": invalid feeder: " + report.str());
  }
  FeederFile file = make_feeder_file(std::move(model));
  for (const auto& r : device_rows) {
    check_id(r.id, r.line, "[devices]");
    file.devices[static_cast<std::size_t>(slot(r.id))] = r.dev;
  }
  for (const auto& r : bound_rows) {
    if (!r.id) {
      file.v_min.setConstant(r.lo);
      file.v_max.setConstant(r.hi);
    }
  }
  for (const auto& r : bound_rows) {
    if (r.id) {
      check_id(*r.id, r.line, "[bounds]");
      file.v_min[slot(*r.id)] = r.lo;
      file.v_max[slot(*r.id)] = r.hi;
    }
  }
  return file;
}

inline FeederFile read_feeder(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open feeder file '" + path + "'");
  return parse_feeder(in, path);
}

inline void write_feeder(std::ostream& out, const FeederFile& f) {
  const auto& m = f.model;
  const auto n = m.size();
  out << "[base]\nv0 " << format_double(m.v0) << "\nnodes " << m.node_count << "\n";
  out << "\n[nodes]\n# id p0 q0\n";
  for (Eigen::Index s = 0; s < n; ++s) {
    out << node_at(s) << ' ' << format_double(m.p_nominal[s]) << ' ' << format_double(m.q_nominal[s]) << '\n';
  }
  out << "\n[lines]\n# from to r x\n";
  for (const auto& l : m.lines) {
    out << l.parent << ' ' << l.child << ' ' << format_double(l.r) << ' ' << format_double(l.x) << '\n';
  }
  out << "\n[devices]\n# node cost_p cost_q p_target q_target p_min p_max q_min q_max\n";
  for (Eigen::Index s = 0; s < n; ++s) {
    const auto& d = f.devices[static_cast<std::size_t>(s)];
    if (d == DeviceSpec::fixed()) continue;
    out << node_at(s) << ' ' << format_double(d.cost_p) << ' ' << format_double(d.cost_q) << ' '
        << format_double(d.p_target) << ' ' << format_double(d.q_target) << ' ' << format_double(d.box.p_min) << ' '
        << format_double(d.box.p_max) << ' ' << format_double(d.box.q_min) << ' ' << format_double(d.box.q_max)
        << '\n';
  }
  out << "\n[bounds]\n# node v_min v_max\n";
  const bool uniform = n > 0 && (f.v_min.array() == f.v_min[0]).all() && (f.v_max.array() == f.v_max[0]).all();
  if (uniform) {
    out << "* " << format_double(f.v_min[0]) << ' ' << format_double(f.v_max[0]) << '\n';
  } else {
    for (Eigen::Index s = 0; s < n; ++s) {
      out << node_at(s) << ' ' << format_double(f.v_min[s]) << ' ' << format_double(f.v_max[s]) << '\n';
    }
  }
}

inline void write_feeder(const std::string& path, const FeederFile& f) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write feeder file '" + path + "'");
  write_feeder(out, f);
}

inline Partition parse_partition(std::istream& in, const FeederModel& model, const std::string& source = "<partition>") {
  std::vector<std::vector<NodeId>> groups;
  std::optional<std::vector<NodeId>> unclustered;
  std::string raw;
  std::size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const detail::LineError at(source, number);
    const auto fields = detail::split_fields(detail::strip_comment(raw));
    if (fields.empty()) continue;
    std::vector<NodeId> ids;
    for (std::size_t i = 1; i < fields.size(); ++i) ids.push_back(at.node(fields[i]));
    if (fields[0] == "ag") {
      if (ids.empty()) at.fail("empty AG");
      groups.push_back(std::move(ids));
    } else if (fields[0] == "unclustered") {
      if (unclustered) at.fail("duplicate unclustered row");
      std::sort(ids.begin(), ids.end());
      unclustered = std::move(ids);
    } else {
      at.fail("expected 'ag' or 'unclustered', got '" + std::string(fields[0]) + "'");
    }
  }
  Partition part = Partition::from_groups(model, groups);
  if (unclustered) part.unclustered = *unclustered;
  if (auto report = validate_partition(model, part); !report.ok()) {
    throw ValidationError(source + ": invalid partition: " + report.str());
  }
  return part;
}

inline Partition read_partition(const std::string& path, const FeederModel& model) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open partition file '" + path + "'");
  return parse_partition(in, model, path);
}

inline void write_partition(std::ostream& out, const Partition& part) {
  for (const auto& g : part.groups) {
    out << "ag";
    for (NodeId m : g.members) out << ' ' << m;
    out << "  # root " << g.root << '\n';
  }
  out << "unclustered";
  for (NodeId u : part.unclustered) out << ' ' << u;
  out << '\n';
}

inline void write_partition(const std::string& path, const Partition& part) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write partition file '" + path + "'");
  write_partition(out, part);
}

}  // namespace hdvr
