#pragma once

// Synthetic radial feeders and partition heuristics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "hdvr/harness/feeder_io.hpp"
#include "hdvr/hierarchy/partition.hpp"
#include "hdvr/physics.hpp"

namespace hdvr {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct FeederSpec {
  std::size_t nodes = 50;
  std::size_t max_branching = 3;
  double chain_bias = 0.5;  // chance a new node extends the previous one
  Range r{0.002, 0.01};
  Range x{0.002, 0.01};
  Range load_p{0.005, 0.03};  // consumption, drawn positive and stored as negative injection
  Range load_q{0.002, 0.015};
  double v0 = 1.0;
  // When positive, loads are scaled so the lowest linear-model voltage at
  // nominal load equals this value.
  double target_v_min = 0.0;

  // Devices
  double device_fraction = 0.5;  // chance a node carries a DER
  Range capacity_p{0.01, 0.05};  // p in [-cap, cap]
  Range capacity_q{0.01, 0.05};
  Range cost{0.5, 2.0};

  ValidationReport validate() const {
    ValidationReport report;
    auto range = [&](const Range& rg, const char* name, bool positive) {
      if (!(rg.lo <= rg.hi) || (positive ? !(rg.lo > 0.0) : !(rg.lo >= 0.0))) {
        report.add(std::string("bad ") + name + " range");
      }
    };
    if (nodes == 0) report.add("node count must be positive");
    if (max_branching == 0) report.add("max branching must be positive");
    if (!(chain_bias >= 0.0 && chain_bias <= 1.0)) report.add("chain bias must lie in [0, 1]");
    range(r, "resistance", true);
    range(x, "reactance", true);
    range(load_p, "real load", false);
    range(load_q, "reactive load", false);
    range(capacity_p, "real capacity", false);
    range(capacity_q, "reactive capacity", false);
    range(cost, "cost", true);
    if (!(v0 > 0.0)) report.add("v0 must be positive");
    if (!(target_v_min >= 0.0 && target_v_min < v0)) report.add("target v_min must lie in [0, v0)");
    if (!(device_fraction >= 0.0 && device_fraction <= 1.0)) report.add("device fraction must lie in [0, 1]");
    return report;
  }
};

namespace detail {
inline double draw(std::mt19937_64& rng, const Range& r) {
  return r.lo == r.hi ? r.lo : std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}
}  // namespace detail

// Random rooted tree: the slack feeds node 1; each later node attaches to an
// earlier node with spare branching capacity (or extends the previous node with
// probability chain_bias).
inline FeederModel generate_feeder(const FeederSpec& spec, std::uint64_t seed) {
  if (auto r = spec.validate(); !r.ok()) throw ValidationError("infeasible feeder spec: " + r.str());
  std::mt19937_64 rng(seed);
  const std::size_t n = spec.nodes;
  std::vector<std::size_t> child_count(n + 1, 0);
  std::vector<NodeId> open{1};  // nodes with spare capacity
  std::vector<Line> lines;
  lines.push_back({kSlack, 1, detail::draw(rng, spec.r), detail::draw(rng, spec.x)});
  std::bernoulli_distribution extend(spec.chain_bias);
  for (std::size_t i = 2; i <= n; ++i) {
    const auto prev = static_cast<NodeId>(i - 1);
    NodeId parent;
    if (child_count[i - 1] < spec.max_branching && extend(rng)) {
      parent = prev;
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
      parent = open[pick(rng)];
    }
    lines.push_back({parent, static_cast<NodeId>(i), detail::draw(rng, spec.r), detail::draw(rng, spec.x)});
    if (++child_count[static_cast<std::size_t>(parent)] == spec.max_branching) {
      open.erase(std::find(open.begin(), open.end(), parent));
    }
    open.push_back(static_cast<NodeId>(i));
  }
  FeederModel model(n, std::move(lines), spec.v0);
  for (std::size_t i = 0; i < n; ++i) {
    model.p_nominal[static_cast<Eigen::Index>(i)] = -detail::draw(rng, spec.load_p);
    model.q_nominal[static_cast<Eigen::Index>(i)] = -detail::draw(rng, spec.load_q);
  }
  if (spec.target_v_min > 0.0) {
    const Tree tree(model);
    const Vector v = linear_sweep_voltages(model, tree, model.p_nominal, model.q_nominal);
    const double drop = spec.v0 - v.minCoeff();
    if (drop > 0.0) {
      const double scale = (spec.v0 - spec.target_v_min) / drop;
      model.p_nominal *= scale;
      model.q_nominal *= scale;
    }
  }
  if (auto r = validate_tree(model); !r.ok()) throw ValidationError("generated feeder is invalid: " + r.str());
  return model;
}

// DERs on a random subset of nodes, drawn from a stream separate from the
// topology so the same seed gives the same tree with or without devices.
inline std::vector<DeviceSpec> generate_devices(const FeederModel& model, const FeederSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::bernoulli_distribution has(spec.device_fraction);
  std::vector<DeviceSpec> devices(model.node_count, DeviceSpec::fixed());
  for (auto& d : devices) {
    if (!has(rng)) continue;
    const double cp = detail::draw(rng, spec.capacity_p);
    const double cq = detail::draw(rng, spec.capacity_q);
    d.cost_p = detail::draw(rng, spec.cost);
    d.cost_q = detail::draw(rng, spec.cost);
    d.box = {-cp, cp, -cq, cq};
  }
  return devices;
}

inline FeederFile generate_feeder_file(const FeederSpec& spec, std::uint64_t seed, double v_min = 0.95,
                                       double v_max = 1.05) {
  FeederFile f = make_feeder_file(generate_feeder(spec, seed), v_min, v_max);
  f.devices = generate_devices(f.model, spec, seed);
  return f;
}

// Greedy largest-subtree split. Candidates start as the subtrees hanging off
// the slack's children; while there are fewer than K, the largest splittable
// candidate (ties: smaller root id) is replaced by its children's subtrees and
// its root becomes unclustered. Once there are at least K candidates the K
// largest become AGs (ties: smaller root id) and the rest is unclustered.
// At most one AG per leaf is possible, so K above the leaf count (in
// particular K = N > 1) throws.
inline Partition auto_partition(const FeederModel& model, std::size_t K) {
  if (K == 0) throw ValidationError("auto_partition: K must be at least 1");
  const Tree tree(model);
  const auto sizes = tree.subtree_sizes();
  std::vector<NodeId> candidates = tree.children(kSlack);
  auto larger = [&](NodeId a, NodeId b) {
    const auto sa = sizes[static_cast<std::size_t>(a)], sb = sizes[static_cast<std::size_t>(b)];
    return sa != sb ? sa > sb : a < b;
  };
  while (candidates.size() < K) {
    std::sort(candidates.begin(), candidates.end(), larger);
    auto it = std::find_if(candidates.begin(), candidates.end(),
                           [&](NodeId c) { return !tree.children(c).empty(); });
    if (it == candidates.end()) {
      throw ValidationError("auto_partition: only " + std::to_string(candidates.size()) +
                            " disjoint subtrees available, asked for " + std::to_string(K));
    }
    const NodeId split = *it;
    candidates.erase(it);
    for (NodeId c : tree.children(split)) candidates.push_back(c);
  }
  std::sort(candidates.begin(), candidates.end(), larger);
  candidates.resize(K);
  std::sort(candidates.begin(), candidates.end());
  Partition part = Partition::from_roots(model, candidates);
  require_valid_partition(model, part);
  return part;
}

// K random disjoint subtrees: roots drawn uniformly among nodes that are
// neither inside nor above an already chosen subtree. A greedy draw can block
// itself, so a few fresh shuffles are tried before giving up.
inline Partition random_partition(const FeederModel& model, std::size_t K, std::mt19937_64& rng) {
  if (K == 0) throw ValidationError("random_partition: K must be at least 1");
  const Tree tree(model);
  std::vector<NodeId> order(model.node_count);
  std::iota(order.begin(), order.end(), 1);
  for (int attempt = 0; attempt < 64; ++attempt) {
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<NodeId> roots;
    for (NodeId r : order) {
      if (roots.size() == K) break;
      const bool clash = std::any_of(roots.begin(), roots.end(),
                                     [&](NodeId s) { return tree.is_ancestor(s, r) || tree.is_ancestor(r, s); });
      if (!clash) roots.push_back(r);
    }
    if (roots.size() == K) {
      std::sort(roots.begin(), roots.end());
      return Partition::from_roots(model, roots);
    }
  }
  throw ValidationError("random_partition: could not place " + std::to_string(K) + " disjoint subtrees");
}

}  // namespace hdvr
