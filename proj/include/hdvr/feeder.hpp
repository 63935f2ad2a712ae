#pragma once

// Radial feeder model, tree checks, and the linear (LinDistFlow) voltage map.

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hdvr/errors.hpp"

namespace hdvr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Dense node ids 0..N; 0 is the slack bus. Per-node vectors (p, q, v, ...)
// have length N and hold node i at position i - 1.
using NodeId = int;

inline constexpr NodeId kSlack = 0;

inline Eigen::Index slot(NodeId node) { return static_cast<Eigen::Index>(node) - 1; }
inline NodeId node_at(Eigen::Index slot_index) { return static_cast<NodeId>(slot_index) + 1; }

struct Line {
  NodeId parent = 0;
  NodeId child = 0;
  double r = 0.0;  // p.u.
  double x = 0.0;  // p.u.

  friend bool operator==(const Line&, const Line&) = default;
};

// Rooted radial network. `p_nominal`/`q_nominal` are the fixed, uncontrolled
// injections (negative = consumption); controllable dispatch is a deviation on
// top of them.
struct FeederModel {
  std::size_t node_count = 0;  // N, excluding the slack
  std::vector<Line> lines;
  double v0 = 1.0;
  Vector p_nominal;
  Vector q_nominal;

  FeederModel() = default;
  FeederModel(std::size_t n, std::vector<Line> ls, double slack_voltage = 1.0)
      : node_count(n),
        lines(std::move(ls)),
        v0(slack_voltage),
        p_nominal(Vector::Zero(static_cast<Eigen::Index>(n))),
        q_nominal(Vector::Zero(static_cast<Eigen::Index>(n))) {}

  Eigen::Index size() const { return static_cast<Eigen::Index>(node_count); }

  friend bool operator==(const FeederModel& a, const FeederModel& b) {
    return a.node_count == b.node_count && a.lines == b.lines && a.v0 == b.v0 &&
           a.p_nominal.size() == b.p_nominal.size() && a.q_nominal.size() == b.q_nominal.size() &&
           a.p_nominal == b.p_nominal && a.q_nominal == b.q_nominal;
  }
};

inline ValidationReport validate_tree(const FeederModel& model) {
  ValidationReport report;
  const std::size_t n = model.node_count;
  if (n == 0) report.add("feeder has no non-slack nodes");
  if (model.lines.size() != n) {
    std::ostringstream oss;
    oss << "expected " << n << " lines, found " << model.lines.size();
    report.add(oss.str());
  }
  if (model.p_nominal.size() != static_cast<Eigen::Index>(n) ||
      model.q_nominal.size() != static_cast<Eigen::Index>(n)) {
    report.add("nominal injection vectors must have length N");
  }

  auto in_range = [n](NodeId id) { return id >= 0 && static_cast<std::size_t>(id) <= n; };
  std::vector<std::vector<NodeId>> children(n + 1);
  std::vector<int> parent_count(n + 1, 0);

  for (const auto& line : model.lines) {
    std::ostringstream tag;
    tag << "(" << line.parent << "," << line.child << ")";
    if (!in_range(line.parent) || !in_range(line.child)) {
      report.add("unknown node on line " + tag.str());
      continue;
    }
    if (line.parent == line.child) {
      report.add("self loop on line " + tag.str());
      continue;
    }
    if (line.child == kSlack) report.add("slack cannot be a child on line " + tag.str());
    if (!(line.r > 0.0) || !(line.x > 0.0)) report.add("nonpositive impedance on line " + tag.str());
    children[static_cast<std::size_t>(line.parent)].push_back(line.child);
    ++parent_count[static_cast<std::size_t>(line.child)];
  }

  for (std::size_t i = 1; i <= n; ++i) {
    if (parent_count[i] > 1) report.add("duplicate parent for node " + std::to_string(i));
  }

  // Directed cycles, via iterative DFS coloring.
  std::set<std::vector<NodeId>> cycles;
  std::vector<int> color(n + 1, 0);  // 0 white, 1 on stack, 2 done
  for (std::size_t start = 0; start <= n; ++start) {
    if (color[start]) continue;
    std::vector<std::pair<NodeId, std::size_t>> stack{{static_cast<NodeId>(start), 0}};
    color[start] = 1;
    while (!stack.empty()) {
      auto& [u, next] = stack.back();
      const auto& kids = children[static_cast<std::size_t>(u)];
      if (next < kids.size()) {
        const NodeId w = kids[next++];
        if (color[static_cast<std::size_t>(w)] == 0) {
          color[static_cast<std::size_t>(w)] = 1;
          stack.emplace_back(w, 0);
        } else if (color[static_cast<std::size_t>(w)] == 1) {
          std::vector<NodeId> members;
          for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
            members.push_back(it->first);
            if (it->first == w) break;
          }
          std::sort(members.begin(), members.end());
          cycles.insert(members);
        }
      } else {
        color[static_cast<std::size_t>(u)] = 2;
        stack.pop_back();
      }
    }
  }
  for (const auto& cyc : cycles) {
    std::ostringstream oss;
    oss << "cycle {";
    for (std::size_t i = 0; i < cyc.size(); ++i) oss << (i ? "," : "") << cyc[i];
    oss << "}";
    report.add(oss.str());
  }

  // Reachability from the slack.
  std::vector<bool> seen(n + 1, false);
  std::vector<NodeId> frontier{kSlack};
  seen[0] = true;
  while (!frontier.empty()) {
    const NodeId u = frontier.back();
    frontier.pop_back();
    for (NodeId w : children[static_cast<std::size_t>(u)]) {
      if (!seen[static_cast<std::size_t>(w)]) {
        seen[static_cast<std::size_t>(w)] = true;
        frontier.push_back(w);
      }
    }
  }
  for (std::size_t i = 1; i <= n; ++i) {
    if (!seen[i]) report.add("disconnected node " + std::to_string(i));
  }
  return report;
}

// Parent/children/BFS-order view of a validated feeder.
class Tree {
 public:
  explicit Tree(const FeederModel& model) {
    if (auto report = validate_tree(model); !report.ok()) {
      throw ValidationError("invalid feeder tree: " + report.str());
    }
    const std::size_t n = model.node_count;
    parent_.assign(n + 1, -1);
    line_of_.assign(n + 1, 0);
    children_.assign(n + 1, {});
    for (std::size_t li = 0; li < model.lines.size(); ++li) {
      const auto& line = model.lines[li];
      parent_[static_cast<std::size_t>(line.child)] = line.parent;
      line_of_[static_cast<std::size_t>(line.child)] = li;
      children_[static_cast<std::size_t>(line.parent)].push_back(line.child);
    }
    for (auto& kids : children_) std::sort(kids.begin(), kids.end());
    order_.reserve(n + 1);
    order_.push_back(kSlack);
    for (std::size_t head = 0; head < order_.size(); ++head) {
      for (NodeId w : children_[static_cast<std::size_t>(order_[head])]) order_.push_back(w);
    }
    depth_.assign(n + 1, 0);
    for (std::size_t k = 1; k < order_.size(); ++k) {
      const auto u = static_cast<std::size_t>(order_[k]);
      depth_[u] = depth_[static_cast<std::size_t>(parent_[u])] + 1;
    }
  }

  std::size_t node_count() const { return parent_.size() - 1; }
  NodeId parent(NodeId i) const { return parent_.at(static_cast<std::size_t>(i)); }
  std::size_t line_index(NodeId i) const { return line_of_.at(static_cast<std::size_t>(i)); }
  const std::vector<NodeId>& children(NodeId i) const { return children_.at(static_cast<std::size_t>(i)); }
  // Slack first; every parent precedes its children.
  const std::vector<NodeId>& bfs_order() const { return order_; }
  std::size_t depth(NodeId i) const { return depth_.at(static_cast<std::size_t>(i)); }
  std::size_t height() const { return *std::max_element(depth_.begin(), depth_.end()); }

  bool is_ancestor(NodeId ancestor, NodeId node) const {
    for (NodeId u = node; u != -1; u = parent_[static_cast<std::size_t>(u)]) {
      if (u == ancestor) return true;
    }
    return false;
  }

  // `root` and all of its descendants, ascending.
  std::vector<NodeId> subtree(NodeId root) const {
    std::vector<NodeId> out{root};
    for (std::size_t head = 0; head < out.size(); ++head) {
      for (NodeId w : children(out[head])) out.push_back(w);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<std::size_t> subtree_sizes() const {
    std::vector<std::size_t> size(parent_.size(), 1);
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
      if (*it != kSlack) size[static_cast<std::size_t>(parent_[static_cast<std::size_t>(*it)])] += size[static_cast<std::size_t>(*it)];
    }
    return size;
  }

 private:
  std::vector<NodeId> parent_;
  std::vector<std::size_t> line_of_;
  std::vector<std::vector<NodeId>> children_;
  std::vector<NodeId> order_;
  std::vector<std::size_t> depth_;
};

// Lines on the unique path from the slack down to node i.
inline std::vector<Line> path_to_root(const FeederModel& model, NodeId i) {
  if (i == kSlack) throw ValidationError("slack has no path");
  if (i < 0 || static_cast<std::size_t>(i) > model.node_count) {
    throw ValidationError("unknown node id " + std::to_string(i));
  }
  const Tree tree(model);
  std::vector<Line> path;
  for (NodeId u = i; u != kSlack; u = tree.parent(u)) path.push_back(model.lines[tree.line_index(u)]);
  std::reverse(path.begin(), path.end());
  return path;
}

struct SensitivityPair {
  Matrix R;
  Matrix X;
  Vector v_tilde;

  Eigen::Index size() const { return R.rows(); }
};

// Common-path resistance/reactance matrices plus the affine offset
// v_tilde = v0 + R p_nominal + X q_nominal. O(N^2): each node copies its
// parent's row, since a node's common path with any node outside its own
// subtree equals its parent's.
inline SensitivityPair build_sensitivity(const FeederModel& model) {
  const Tree tree(model);
  const Eigen::Index n = model.size();
  SensitivityPair s{Matrix::Zero(n, n), Matrix::Zero(n, n), Vector::Zero(n)};

  const auto& order = tree.bfs_order();
  for (std::size_t k = 1; k < order.size(); ++k) {
    const NodeId node = order[k];
    const NodeId up = tree.parent(node);
    const Line& line = model.lines[tree.line_index(node)];
    const Eigen::Index a = slot(node);
    for (std::size_t m = 1; m < k; ++m) {
      const Eigen::Index b = slot(order[m]);
      const double r = up == kSlack ? 0.0 : s.R(slot(up), b);
      const double x = up == kSlack ? 0.0 : s.X(slot(up), b);
      s.R(a, b) = s.R(b, a) = r;
      s.X(a, b) = s.X(b, a) = x;
    }
    s.R(a, a) = (up == kSlack ? 0.0 : s.R(slot(up), slot(up))) + line.r;
    s.X(a, a) = (up == kSlack ? 0.0 : s.X(slot(up), slot(up))) + line.x;
  }
  s.v_tilde = Vector::Constant(n, model.v0) + s.R * model.p_nominal + s.X * model.q_nominal;
  return s;
}

inline Vector voltages(const SensitivityPair& sens, const Vector& p, const Vector& q) {
  if (p.size() != sens.size() || q.size() != sens.size()) {
    throw DimensionError("voltages: injection vectors must have length " + std::to_string(sens.size()));
  }
  return sens.R * p + sens.X * q + sens.v_tilde;
}

// Feeder-head power P0 = -P_I - sum(p).
inline double feeder_head_power(const Vector& p, double inelastic_load) {
  return -inelastic_load - p.sum();
}

}  // namespace hdvr
