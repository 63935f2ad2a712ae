#pragma once

// Shared fixtures and independent reference computations for the tests.

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "hdvr/hdvr.hpp"

namespace hdvr::testing {

// Chain 0 -> 1 -> ... -> n with the given per-line impedances.
inline FeederModel chain(const std::vector<std::pair<double, double>>& rx) {
  std::vector<Line> lines;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    lines.push_back({static_cast<NodeId>(i), static_cast<NodeId>(i + 1), rx[i].first, rx[i].second});
  }
  return FeederModel(rx.size(), lines);
}

// Tree 0->1; 1->{2,3}; 2->4.
inline FeederModel small_tree() {
  return FeederModel(4, {{0, 1, 0.01, 0.02}, {1, 2, 0.02, 0.01}, {1, 3, 0.015, 0.01}, {2, 4, 0.01, 0.03}});
}

inline FeederModel random_tree(std::size_t n, std::uint64_t seed, std::size_t max_branching = 3) {
  FeederSpec spec;
  spec.nodes = n;
  spec.max_branching = max_branching;
  return generate_feeder(spec, seed);
}

// Leaves bound the number of disjoint subtrees a partition can hold.
inline std::size_t leaf_count(const FeederModel& model) {
  std::set<NodeId> parents;
  for (const auto& l : model.lines) parents.insert(l.parent);
  std::size_t leaves = 0;
  for (std::size_t i = 1; i <= model.node_count; ++i) leaves += parents.count(static_cast<NodeId>(i)) ? 0 : 1;
  return leaves;
}

// Reference common-path sums: collect each node's set of lines by walking
// parents, intersect, and add up. O(N^3) and independent of build_sensitivity.
inline std::pair<Matrix, Matrix> path_enumeration(const FeederModel& model) {
  std::map<NodeId, const Line*> feeding;
  for (const auto& l : model.lines) feeding[l.child] = &l;
  const auto n = model.size();
  std::vector<std::set<const Line*>> paths(static_cast<std::size_t>(n));
  for (Eigen::Index s = 0; s < n; ++s) {
    for (NodeId u = node_at(s); u != kSlack; u = feeding.at(u)->parent) paths[static_cast<std::size_t>(s)].insert(feeding.at(u));
  }
  Matrix R = Matrix::Zero(n, n), X = Matrix::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      // Sum from the slack downwards so the order matches a path walk.
      std::vector<const Line*> common;
      for (const Line* l : paths[static_cast<std::size_t>(a)]) {
        if (paths[static_cast<std::size_t>(b)].count(l)) common.push_back(l);
      }
      std::map<std::size_t, const Line*> by_depth;
      for (const Line* l : common) {
        std::size_t depth = 0;
        for (NodeId u = l->child; u != kSlack; u = feeding.at(u)->parent) ++depth;
        by_depth[depth] = l;
      }
      for (const auto& [depth, l] : by_depth) {
        R(a, b) += l->r;
        X(a, b) += l->x;
      }
    }
  }
  return {R, X};
}

// A problem with every node carrying a device.
struct Instance {
  FeederModel model;
  SensitivityPair sens;
  OpfProblem prob;
};

inline Instance make_instance(FeederModel model, std::uint64_t seed, double phi, double alpha = 0.0,
                              double box = 0.05, double load_scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> cost(0.5, 2.0), load(0.005, 0.03), target(-0.01, 0.01);
  const auto n = model.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    model.p_nominal[i] = -load(rng) * load_scale;
    model.q_nominal[i] = -0.5 * load(rng) * load_scale;
  }
  OpfProblem prob;
  for (Eigen::Index i = 0; i < n; ++i) {
    DeviceSpec d;
    d.cost_p = cost(rng);
    d.cost_q = cost(rng);
    d.p_target = target(rng);
    d.q_target = target(rng);
    d.box = {-box, box, -box, box};
    prob.devices.push_back(d);
  }
  prob.v_min = Vector::Constant(n, 0.95);
  prob.v_max = Vector::Constant(n, 1.05);
  prob.alpha = alpha;
  prob.phi = phi;
  prob.inelastic_load = model.p_nominal.sum();
  prob.p0_target = 0.8 * initial_dispatch(prob).p0;
  SensitivityPair sens = build_sensitivity(model);
  return {std::move(model), std::move(sens), std::move(prob)};
}

// Five-node chain whose nominal load pulls the tail below 0.95; devices at
// every node can lift it back.
inline Instance undervoltage_chain(double phi = 1e-3, double cost = 0.1) {
  FeederModel m = chain(std::vector<std::pair<double, double>>(5, {0.03, 0.03}));
  m.p_nominal = Vector::Constant(5, -0.1);
  m.q_nominal = Vector::Constant(5, -0.05);
  OpfProblem prob;
  for (int i = 0; i < 5; ++i) prob.devices.push_back({cost, cost, 0.0, 0.0, {-0.05, 0.05, -0.05, 0.05}});
  prob.v_min = Vector::Constant(5, 0.95);
  prob.v_max = Vector::Constant(5, 1.05);
  prob.phi = phi;
  prob.inelastic_load = m.p_nominal.sum();
  SensitivityPair sens = build_sensitivity(m);
  return {std::move(m), std::move(sens), std::move(prob)};
}

// One device much stiffer than the rest sets L; with phi = 1 the modulus M is
// 2 min cost, so a tenfold step overshoots that device's primal mode. Its box
// is wide enough that projection does not mask the growth.
inline Instance stiff_device_instance() {
  FeederModel m = chain({{0.02, 0.02}, {0.02, 0.02}, {0.02, 0.02}});
  m.p_nominal = Vector::Constant(3, -0.5);
  m.q_nominal = Vector::Constant(3, -0.2);
  OpfProblem prob;
  for (int i = 0; i < 3; ++i) prob.devices.push_back({0.5, 0.5, 0.0, 0.0, {-0.05, 0.05, -0.05, 0.05}});
  prob.devices[1] = {3.0, 3.0, 0.0, 0.0, {-1e3, 1e3, -1e3, 1e3}};
  prob.v_min = Vector::Constant(3, 0.95);
  prob.v_max = Vector::Constant(3, 1.05);
  prob.phi = 1.0;
  prob.inelastic_load = m.p_nominal.sum();
  SensitivityPair sens = build_sensitivity(m);
  return {std::move(m), std::move(sens), std::move(prob)};
}

// Explicit 4N x 4N Jacobian of the saddle operator, assembled entry by entry.
inline Matrix explicit_jacobian(const OpfProblem& prob, const SensitivityPair& sens) {
  const auto n = prob.size();
  Matrix J = Matrix::Zero(4 * n, 4 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& d = prob.devices[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < n; ++j) {
      J(i, j) = 2.0 * prob.alpha;
      J(i, 2 * n + j) = -sens.R(j, i);
      J(i, 3 * n + j) = sens.R(j, i);
      J(n + i, 2 * n + j) = -sens.X(j, i);
      J(n + i, 3 * n + j) = sens.X(j, i);
      J(2 * n + i, j) = sens.R(i, j);
      J(2 * n + i, n + j) = sens.X(i, j);
      J(3 * n + i, j) = -sens.R(i, j);
      J(3 * n + i, n + j) = -sens.X(i, j);
    }
    J(i, i) += 2.0 * d.cost_p;
    J(n + i, n + i) = 2.0 * d.cost_q;
    J(2 * n + i, 2 * n + i) = prob.phi;
    J(3 * n + i, 3 * n + i) = prob.phi;
  }
  return J;
}

inline IterateState random_state(const OpfProblem& prob, const SensitivityPair& sens, std::mt19937_64& rng,
                                 double dual_scale = 1.0) {
  const auto n = prob.size();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  IterateState s;
  s.p.resize(n);
  s.q.resize(n);
  s.mu_lo.resize(n);
  s.mu_hi.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& b = prob.devices[static_cast<std::size_t>(i)].box;
    s.p[i] = b.p_min + u(rng) * (b.p_max - b.p_min);
    s.q[i] = b.q_min + u(rng) * (b.q_max - b.q_min);
    s.mu_lo[i] = dual_scale * u(rng);
    s.mu_hi[i] = dual_scale * u(rng);
  }
  s.v = voltages(sens, s.p, s.q);
  s.p0 = feeder_head_power(s.p, prob.inelastic_load);
  return s;
}

inline double max_abs(const Vector& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

}  // namespace hdvr::testing
