#pragma once

// Autonomous-grid partitions: K descendant-closed subtrees plus the
// unclustered remainder, the reduced network they induce, and the
// common-path property that lets AGs be collapsed to their roots.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hdvr/feeder.hpp"

namespace hdvr {

struct Subtree {
  NodeId root = 0;
  std::vector<NodeId> members;  // ascending, includes root

  std::size_t size() const { return members.size(); }
  bool contains(NodeId i) const { return std::binary_search(members.begin(), members.end(), i); }
};

struct Partition {
  std::vector<Subtree> groups;      // AG k = groups[k]
  std::vector<NodeId> unclustered;  // ascending

  std::size_t K() const { return groups.size(); }
  std::size_t U() const { return unclustered.size(); }

  // AGs given by root; members are each root's full subtree, the rest is unclustered.
  static Partition from_roots(const FeederModel& model, std::vector<NodeId> roots) {
    const Tree tree(model);
    Partition part;
    for (NodeId r : roots) {
      if (r <= kSlack || static_cast<std::size_t>(r) > model.node_count) {
        throw ValidationError("invalid AG root " + std::to_string(r));
      }
      part.groups.push_back({r, tree.subtree(r)});
    }
    part.fill_unclustered(model.node_count);
    return part;
  }

  // AGs given by member lists; root = shallowest member (ties: smallest id).
  // The rest is unclustered. Not validated here.
  static Partition from_groups(const FeederModel& model, const std::vector<std::vector<NodeId>>& groups) {
    const Tree tree(model);
    Partition part;
    for (auto members : groups) {
      std::sort(members.begin(), members.end());
      members.erase(std::unique(members.begin(), members.end()), members.end());
      NodeId root = members.empty() ? kSlack : members.front();
      for (NodeId m : members) {
        if (m <= kSlack || static_cast<std::size_t>(m) > model.node_count) continue;
        if (root <= kSlack || static_cast<std::size_t>(root) > model.node_count || tree.depth(m) < tree.depth(root)) root = m;
      }
      part.groups.push_back({root, std::move(members)});
    }
    part.fill_unclustered(model.node_count);
    return part;
  }

  void fill_unclustered(std::size_t n) {
    std::vector<bool> taken(n + 1, false);
    for (const auto& g : groups) {
      for (NodeId m : g.members) {
        if (m > 0 && static_cast<std::size_t>(m) <= n) taken[static_cast<std::size_t>(m)] = true;
      }
    }
    unclustered.clear();
    for (std::size_t i = 1; i <= n; ++i) {
      if (!taken[i]) unclustered.push_back(static_cast<NodeId>(i));
    }
  }

  // AG index of each node, or -1 when unclustered. Assumes a valid partition.
  std::vector<int> owner(std::size_t n) const {
    std::vector<int> out(n + 1, -1);
    for (std::size_t k = 0; k < groups.size(); ++k) {
      for (NodeId m : groups[k].members) out[static_cast<std::size_t>(m)] = static_cast<int>(k);
    }
    return out;
  }
};

inline ValidationReport validate_partition(const FeederModel& model, const Partition& part) {
  ValidationReport report = validate_tree(model);
  if (!report.ok()) return report;
  const Tree tree(model);
  const std::size_t n = model.node_count;
  std::vector<std::vector<std::string>> seen_in(n + 1);
  auto in_range = [n](NodeId i) { return i >= 1 && static_cast<std::size_t>(i) <= n; };

  for (std::size_t k = 0; k < part.groups.size(); ++k) {
    const auto& g = part.groups[k];
    const std::string ag = "AG " + std::to_string(k + 1);
    if (g.members.empty()) {
      report.add(ag + " is empty");
      continue;
    }
    bool ranged = true;
    for (NodeId m : g.members) {
      if (m == kSlack) {
        report.add("slack in partition (" + ag + ")");
        ranged = false;
      } else if (!in_range(m)) {
        report.add("unknown node " + std::to_string(m) + " in " + ag);
        ranged = false;
      } else {
        seen_in[static_cast<std::size_t>(m)].push_back(ag);
      }
    }
    if (!ranged || !in_range(g.root)) continue;
    if (!g.contains(g.root)) {
      report.add(ag + " does not contain its root " + std::to_string(g.root));
      continue;
    }
    const auto closure = tree.subtree(g.root);
    for (NodeId m : closure) {
      if (!g.contains(m)) {
        report.add("subtree not descendant-closed: " + ag + " (root " + std::to_string(g.root) + ") is missing node " +
                   std::to_string(m));
      }
    }
    for (NodeId m : g.members) {
      if (!std::binary_search(closure.begin(), closure.end(), m)) {
        report.add("subtree not descendant-closed: node " + std::to_string(m) + " in " + ag +
                   " is not a descendant of root " + std::to_string(g.root));
      }
    }
  }
  for (std::size_t h = 0; h < part.groups.size(); ++h) {
    for (std::size_t k = 0; k < part.groups.size(); ++k) {
      if (h != k && part.groups[k].contains(part.groups[h].root) && !part.groups[h].members.empty()) {
        report.add("AG " + std::to_string(k + 1) + " contains the root of AG " + std::to_string(h + 1));
      }
    }
  }
  for (NodeId u : part.unclustered) {
    if (!in_range(u)) {
      report.add("unknown unclustered node " + std::to_string(u));
    } else {
      seen_in[static_cast<std::size_t>(u)].push_back("unclustered set");
    }
  }
  for (std::size_t i = 1; i <= n; ++i) {
    const auto& where = seen_in[i];
    if (where.empty()) {
      report.add("node " + std::to_string(i) + " not covered");
    } else if (where.size() > 1) {
      std::ostringstream oss;
      oss << "nondisjoint: node " << i << " appears in";
      for (const auto& w : where) oss << " [" << w << "]";
      report.add(oss.str());
    }
  }
  return report;
}

inline void require_valid_partition(const FeederModel& model, const Partition& part) {
  if (auto r = validate_partition(model, part); !r.ok()) throw ValidationError("invalid partition: " + r.str());
}

// What the central coordinator may know: the AG roots, the unclustered nodes,
// and the original lines feeding each of them. Every ancestor of a reduced
// node is itself reduced (or the slack), so these lines form a tree.
struct ReducedTopology {
  std::vector<NodeId> roots;        // roots[k] = root of AG k
  std::vector<NodeId> unclustered;  // ascending
  std::vector<Line> lines;
};

inline ReducedTopology extract_reduced_topology(const FeederModel& model, const Partition& part) {
  require_valid_partition(model, part);
  const Tree tree(model);
  ReducedTopology topo;
  for (const auto& g : part.groups) topo.roots.push_back(g.root);
  topo.unclustered = part.unclustered;
  std::vector<NodeId> nodes = topo.roots;
  nodes.insert(nodes.end(), topo.unclustered.begin(), topo.unclustered.end());
  std::sort(nodes.begin(), nodes.end());
  for (NodeId u : nodes) topo.lines.push_back(model.lines[tree.line_index(u)]);
  return topo;
}

// Common-path resistance/reactance among reduced nodes, computed from the
// reduced topology alone.
class ReducedNetwork {
 public:
  explicit ReducedNetwork(const ReducedTopology& topo) : roots_(topo.roots), unclustered_(topo.unclustered) {
    nodes_ = roots_;
    nodes_.insert(nodes_.end(), unclustered_.begin(), unclustered_.end());
    std::sort(nodes_.begin(), nodes_.end());
    if (std::adjacent_find(nodes_.begin(), nodes_.end()) != nodes_.end()) {
      throw ValidationError("reduced network: duplicate reduced node");
    }
    for (std::size_t a = 0; a < nodes_.size(); ++a) local_[nodes_[a]] = static_cast<NodeId>(a + 1);

    // Relabel to a dense local feeder and reuse the full-network construction.
    std::vector<Line> local_lines;
    for (const auto& line : topo.lines) {
      const auto c = local_.find(line.child);
      const auto p = line.parent == kSlack ? local_.end() : local_.find(line.parent);
      if (c == local_.end() || (line.parent != kSlack && p == local_.end())) {
        throw InformationHidingError("reduced network cannot hold line (" + std::to_string(line.parent) + "," +
                                     std::to_string(line.child) + "): endpoint outside the reduced node set");
      }
      local_lines.push_back({line.parent == kSlack ? kSlack : p->second, c->second, line.r, line.x});
    }
    lines_ = topo.lines;
    FeederModel local(nodes_.size(), std::move(local_lines));
    SensitivityPair s = build_sensitivity(local);
    R_ = std::move(s.R);
    X_ = std::move(s.X);
  }

  const std::vector<NodeId>& nodes() const { return nodes_; }
  const std::vector<NodeId>& roots() const { return roots_; }
  const std::vector<NodeId>& unclustered() const { return unclustered_; }
  const std::vector<Line>& lines() const { return lines_; }
  bool holds(NodeId i) const { return local_.count(i) != 0; }

  double r(NodeId i, NodeId j) const { return R_(index(i), index(j)); }
  double x(NodeId i, NodeId j) const { return X_(index(i), index(j)); }

 private:
  Eigen::Index index(NodeId i) const {
    const auto it = local_.find(i);
    if (it == local_.end()) {
      throw InformationHidingError("node " + std::to_string(i) + " is not part of the reduced network");
    }
    return slot(it->second);
  }

  std::vector<NodeId> roots_;
  std::vector<NodeId> unclustered_;
  std::vector<NodeId> nodes_;
  std::vector<Line> lines_;
  std::map<NodeId, NodeId> local_;
  Matrix R_;
  Matrix X_;
};

inline ReducedNetwork build_reduced(const FeederModel& model, const Partition& part) {
  return ReducedNetwork(extract_reduced_topology(model, part));
}

struct Lemma2Witness {
  NodeId i = 0;
  NodeId j = 0;
  NodeId proxy_i = 0;  // node whose entry R_ij should equal (root or unclustered node)
  NodeId proxy_j = 0;
  char matrix = 'R';
  double actual = 0.0;
  double expected = 0.0;
};

struct Lemma2Result {
  bool holds = true;
  std::optional<Lemma2Witness> witness;
  explicit operator bool() const { return holds; }
};

// Exhaustive check of the common-path collapse against full matrices:
// R_ij = R_{root(h) root(k)} for i in AG h, j in AG k (h != k), and
// R_ij = R_{i root(k)} for unclustered i, j in AG k. Same for X. Exact.
// Does not validate the partition, so corrupted partitions yield witnesses.
inline Lemma2Result lemma2_check(const SensitivityPair& sens, const Partition& part) {
  auto entry_check = [&](NodeId i, NodeId j, NodeId pi, NodeId pj) -> std::optional<Lemma2Witness> {
    const double r = sens.R(slot(i), slot(j));
    const double rp = sens.R(slot(pi), slot(pj));
    if (r != rp) return Lemma2Witness{i, j, pi, pj, 'R', r, rp};
    const double x = sens.X(slot(i), slot(j));
    const double xp = sens.X(slot(pi), slot(pj));
    if (x != xp) return Lemma2Witness{i, j, pi, pj, 'X', x, xp};
    return std::nullopt;
  };
  Lemma2Result result;
  for (std::size_t h = 0; h < part.groups.size(); ++h) {
    for (std::size_t k = 0; k < part.groups.size(); ++k) {
      if (h == k) continue;
      for (NodeId i : part.groups[h].members) {
        for (NodeId j : part.groups[k].members) {
          if (auto w = entry_check(i, j, part.groups[h].root, part.groups[k].root)) {
            result.holds = false;
            result.witness = w;
            return result;
          }
        }
      }
    }
  }
  for (NodeId i : part.unclustered) {
    for (const auto& g : part.groups) {
      for (NodeId j : g.members) {
        if (auto w = entry_check(i, j, i, g.root)) {
          result.holds = false;
          result.witness = w;
          return result;
        }
      }
    }
  }
  return result;
}

}  // namespace hdvr
