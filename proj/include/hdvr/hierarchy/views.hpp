#pragma once

// What each coordinator is allowed to know. A RegionalView is built from one
// AG's internal lines plus its trunk entries; a CentralView from the reduced
// topology. Out-of-scope data is rejected at construction, and lookups outside
// the scope throw.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hdvr/hierarchy/partition.hpp"

namespace hdvr {

// Lines strictly inside AG k (one per non-root member).
struct SubtreeTopology {
  std::size_t k = 0;
  NodeId root = 0;
  std::vector<NodeId> members;  // ascending
  std::vector<Line> lines;
};

// R, X of the common path from the slack to the AG root, sent by the CC.
struct Trunk {
  double r = 0.0;
  double x = 0.0;
};

inline SubtreeTopology extract_subtree_topology(const FeederModel& model, const Partition& part, std::size_t k) {
  require_valid_partition(model, part);
  if (k >= part.K()) throw ValidationError("no AG " + std::to_string(k + 1));
  const Tree tree(model);
  const auto& g = part.groups[k];
  SubtreeTopology topo{k, g.root, g.members, {}};
  for (NodeId m : g.members) {
    if (m != g.root) topo.lines.push_back(model.lines[tree.line_index(m)]);
  }
  return topo;
}

class RegionalView {
 public:
  RegionalView(SubtreeTopology topo, Trunk trunk) : k_(topo.k), root_(topo.root), members_(std::move(topo.members)) {
    const std::string who = "regional view for AG " + std::to_string(k_ + 1);
    if (!std::is_sorted(members_.begin(), members_.end()) ||
        std::adjacent_find(members_.begin(), members_.end()) != members_.end()) {
      throw ValidationError(who + ": members must be ascending and unique");
    }
    for (std::size_t a = 0; a < members_.size(); ++a) local_[members_[a]] = static_cast<Eigen::Index>(a);
    if (!holds(root_)) throw ValidationError(who + ": root " + std::to_string(root_) + " is not a member");

    const auto m = static_cast<Eigen::Index>(members_.size());
    std::vector<Eigen::Index> parent(members_.size(), -1);
    std::vector<std::vector<Eigen::Index>> children(members_.size());
    std::vector<double> r(members_.size(), 0.0), x(members_.size(), 0.0);
    for (const auto& line : topo.lines) {
      if (!holds(line.parent) || !holds(line.child)) {
        throw InformationHidingError(who + " cannot hold line (" + std::to_string(line.parent) + "," +
                                     std::to_string(line.child) + ") outside the AG");
      }
      const auto c = local_.at(line.child);
      if (line.child == root_ || parent[static_cast<std::size_t>(c)] != -1) {
        throw ValidationError(who + ": node " + std::to_string(line.child) + " has more than one feeding line");
      }
      parent[static_cast<std::size_t>(c)] = local_.at(line.parent);
      children[static_cast<std::size_t>(local_.at(line.parent))].push_back(c);
      r[static_cast<std::size_t>(c)] = line.r;
      x[static_cast<std::size_t>(c)] = line.x;
    }

    // Common-path sums from the root down; the trunk seeds the root entry.
    R_ = Matrix::Zero(m, m);
    X_ = Matrix::Zero(m, m);
    std::vector<Eigen::Index> order{local_.at(root_)};
    std::vector<bool> placed(members_.size(), false);
    placed[static_cast<std::size_t>(order[0])] = true;
    R_(order[0], order[0]) = trunk.r;
    X_(order[0], order[0]) = trunk.x;
    for (std::size_t head = 0; head < order.size(); ++head) {
      const auto u = order[head];
      for (auto c : children[static_cast<std::size_t>(u)]) {
        if (placed[static_cast<std::size_t>(c)]) throw ValidationError(who + ": lines do not form a tree");
        for (std::size_t b = 0; b < order.size(); ++b) {
          R_(c, order[b]) = R_(u, order[b]);
          R_(order[b], c) = R_(u, order[b]);
          X_(c, order[b]) = X_(u, order[b]);
          X_(order[b], c) = X_(u, order[b]);
        }
        R_(c, c) = R_(u, u) + r[static_cast<std::size_t>(c)];
        X_(c, c) = X_(u, u) + x[static_cast<std::size_t>(c)];
        placed[static_cast<std::size_t>(c)] = true;
        order.push_back(c);
      }
    }
    if (order.size() != members_.size()) {
      throw ValidationError(who + ": members not connected to the root by AG lines");
    }
  }

  std::size_t k() const { return k_; }
  NodeId root() const { return root_; }
  const std::vector<NodeId>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  bool holds(NodeId i) const { return local_.count(i) != 0; }

  double r(NodeId i, NodeId j) const { return R_(index(i), index(j)); }
  double x(NodeId i, NodeId j) const { return X_(index(i), index(j)); }

  // sum_{i in AG} d_i, ascending member order. d is in member order.
  double aggregate(const std::vector<double>& d, std::uint64_t& flops) const {
    check_size(d);
    double s = 0.0;
    for (double v : d) s += v;
    flops += d.size();
    return s;
  }

  // alpha_in_i = sum_{j in AG} R_ij d_j, likewise beta_in, for each member i.
  void inner(const std::vector<double>& d, std::vector<double>& alpha_in, std::vector<double>& beta_in,
             std::uint64_t& flops) const {
    check_size(d);
    const auto m = static_cast<Eigen::Index>(members_.size());
    alpha_in.assign(members_.size(), 0.0);
    beta_in.assign(members_.size(), 0.0);
    for (Eigen::Index a = 0; a < m; ++a) {
      double sa = 0.0, sb = 0.0;
      for (Eigen::Index b = 0; b < m; ++b) {
        sa += R_(a, b) * d[static_cast<std::size_t>(b)];
        sb += X_(a, b) * d[static_cast<std::size_t>(b)];
      }
      alpha_in[static_cast<std::size_t>(a)] = sa;
      beta_in[static_cast<std::size_t>(a)] = sb;
    }
    flops += 4ull * members_.size() * members_.size();
  }

 private:
  Eigen::Index index(NodeId i) const {
    const auto it = local_.find(i);
    if (it == local_.end()) {
      throw InformationHidingError("regional view for AG " + std::to_string(k_ + 1) + " has no entry for node " +
                                   std::to_string(i));
    }
    return it->second;
  }

  void check_size(const std::vector<double>& d) const {
    if (d.size() != members_.size()) throw DimensionError("regional view: expected one value per AG member");
  }

  std::size_t k_;
  NodeId root_;
  std::vector<NodeId> members_;
  std::map<NodeId, Eigen::Index> local_;
  Matrix R_;
  Matrix X_;
};

class CentralView {
 public:
  explicit CentralView(const ReducedTopology& topo) : net_(topo) {}

  std::size_t K() const { return net_.roots().size(); }
  std::size_t U() const { return net_.unclustered().size(); }
  const ReducedNetwork& network() const { return net_; }
  NodeId root(std::size_t k) const { return net_.roots().at(k); }
  const std::vector<NodeId>& unclustered() const { return net_.unclustered(); }

  Trunk trunk(std::size_t k) const { return {net_.r(root(k), root(k)), net_.x(root(k), root(k))}; }

  // (alpha_out_k, beta_out_k) from the other AG aggregates (ascending AG index)
  // and the unclustered dual differences (ascending node id).
  std::pair<double, double> outer(std::size_t k, const std::vector<double>& aggregates,
                                  const std::vector<double>& d_unclustered, std::uint64_t& flops) const {
    check(aggregates, d_unclustered);
    const NodeId rk = root(k);
    double a = 0.0, b = 0.0;
    for (std::size_t h = 0; h < K(); ++h) {
      if (h == k) continue;
      a += net_.r(root(h), rk) * aggregates[h];
      b += net_.x(root(h), rk) * aggregates[h];
    }
    for (std::size_t u = 0; u < U(); ++u) {
      a += net_.r(unclustered()[u], rk) * d_unclustered[u];
      b += net_.x(unclustered()[u], rk) * d_unclustered[u];
    }
    flops += 4ull * (K() - 1 + U());
    return {a, b};
  }

  // (alpha_i, beta_i) for the u-th unclustered node.
  std::pair<double, double> unclustered_coupling(std::size_t u, const std::vector<double>& aggregates,
                                                 const std::vector<double>& d_unclustered,
                                                 std::uint64_t& flops) const {
    check(aggregates, d_unclustered);
    const NodeId i = unclustered().at(u);
    double a = 0.0, b = 0.0;
    for (std::size_t k = 0; k < K(); ++k) {
      a += net_.r(i, root(k)) * aggregates[k];
      b += net_.x(i, root(k)) * aggregates[k];
    }
    for (std::size_t w = 0; w < U(); ++w) {
      a += net_.r(i, unclustered()[w]) * d_unclustered[w];
      b += net_.x(i, unclustered()[w]) * d_unclustered[w];
    }
    flops += 4ull * (K() + U());
    return {a, b};
  }

 private:
  void check(const std::vector<double>& aggregates, const std::vector<double>& d_unclustered) const {
    if (aggregates.size() != K() || d_unclustered.size() != U()) {
      throw DimensionError("central view: expected K aggregates and U unclustered values");
    }
  }

  ReducedNetwork net_;
};

struct AgentViews {
  CentralView central;
  std::vector<RegionalView> regional;
};

// Setup: the CC receives the reduced topology, each RC its own subtree lines
// plus the trunk entries computed by the CC.
inline AgentViews make_agent_views(const FeederModel& model, const Partition& part) {
  AgentViews views{CentralView(extract_reduced_topology(model, part)), {}};
  views.regional.reserve(part.K());
  for (std::size_t k = 0; k < part.K(); ++k) {
    views.regional.emplace_back(extract_subtree_topology(model, part, k), views.central.trunk(k));
  }
  return views;
}

struct HierarchicalCoupling {
  Vector alpha;
  Vector beta;
  std::vector<double> alpha_out;  // per AG
  std::vector<double> beta_out;
  Vector alpha_in;  // zero at unclustered nodes
  Vector beta_in;
  std::uint64_t flops = 0;
};

// alpha = R^T d and beta = X^T d assembled from AG blocks and reduced entries
// only, in the same order the agents use.
inline HierarchicalCoupling coupling_via_hierarchy(const Partition& part, const AgentViews& views, const Vector& d) {
  Eigen::Index n = static_cast<Eigen::Index>(part.U());
  for (const auto& g : part.groups) n += static_cast<Eigen::Index>(g.size());
  if (d.size() != n) throw DimensionError("coupling_via_hierarchy: dual vector size mismatch");
  if (views.regional.size() != part.K()) throw DimensionError("coupling_via_hierarchy: view count mismatch");

  HierarchicalCoupling out;
  out.alpha = Vector::Zero(n);
  out.beta = Vector::Zero(n);
  out.alpha_in = Vector::Zero(n);
  out.beta_in = Vector::Zero(n);
  std::vector<std::vector<double>> local(part.K());
  std::vector<double> aggregates(part.K());
  for (std::size_t k = 0; k < part.K(); ++k) {
    for (NodeId m : views.regional[k].members()) local[k].push_back(d[slot(m)]);
    aggregates[k] = views.regional[k].aggregate(local[k], out.flops);
  }
  std::vector<double> d_unc;
  for (NodeId u : views.central.unclustered()) d_unc.push_back(d[slot(u)]);

  for (std::size_t k = 0; k < part.K(); ++k) {
    const auto [a, b] = views.central.outer(k, aggregates, d_unc, out.flops);
    out.alpha_out.push_back(a);
    out.beta_out.push_back(b);
  }
  for (std::size_t u = 0; u < d_unc.size(); ++u) {
    const auto [a, b] = views.central.unclustered_coupling(u, aggregates, d_unc, out.flops);
    const auto s = slot(views.central.unclustered()[u]);
    out.alpha[s] = a;
    out.beta[s] = b;
  }
  for (std::size_t k = 0; k < part.K(); ++k) {
    std::vector<double> ai, bi;
    views.regional[k].inner(local[k], ai, bi, out.flops);
    const auto& members = views.regional[k].members();
    for (std::size_t a = 0; a < members.size(); ++a) {
      const auto s = slot(members[a]);
      out.alpha_in[s] = ai[a];
      out.beta_in[s] = bi[a];
      out.alpha[s] = ai[a] + out.alpha_out[k];
      out.beta[s] = bi[a] + out.beta_out[k];
    }
    out.flops += 2ull * members.size();
  }
  return out;
}

// Closed form of the per-iteration coupling count above: RC aggregation N_k,
// inner products 4 N_k^2, in/out combine 2 N_k; CC outer terms 4 (K - 1 + U)
// per AG and 4 (K + U) per unclustered node.
inline std::uint64_t hierarchical_coupling_flops(const Partition& part) {
  const std::uint64_t K = part.K(), U = part.U();
  std::uint64_t total = 0;
  for (const auto& g : part.groups) total += 4ull * g.size() * g.size() + 3ull * g.size();
  total += 4ull * K * (K - 1 + U) + 4ull * U * (K + U);
  return total;
}

// Per iteration: d_i up from every node, one aggregate per RC, two scalars CC
// to each RC and each unclustered node, two RC to each member, one broadcast.
inline std::uint64_t hierarchical_message_scalars(const Partition& part) {
  std::uint64_t members = 0;
  for (const auto& g : part.groups) members += g.size();
  return 3ull * members + 3ull * part.U() + 3ull * part.K() + 1;
}

}  // namespace hdvr
