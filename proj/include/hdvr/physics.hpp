#pragma once

// Nonlinear DistFlow by backward/forward sweep. Stands in for the measured
// plant in closed-loop runs and quantifies the linearization error.

#include <cmath>
#include <cstddef>

#include "hdvr/feeder.hpp"

namespace hdvr {

struct DistFlowOptions {
  double tolerance = 1e-10;  // max |dv| per sweep, p.u.
  std::size_t max_iter = 100;
};

// Vectors indexed by node id (slot 0 is the slack / unused for branch data:
// branch quantities are stored at the child end of each line).
struct PowerFlowSolution {
  Vector v;        // N+1 magnitudes, v[0] = v0
  Vector P;        // P_ij stored at child j
  Vector Q;
  Vector ell;      // squared current magnitude, at child j
  std::size_t iterations = 0;
  double residual = 0.0;     // max DistFlow equation residual at exit
  double last_update = 0.0;  // max |dv| of the final sweep
  double head_power = 0.0;   // real power delivered from the slack into the feeder
  bool converged = false;

  // Per-node magnitudes without the slack, length N.
  Vector node_voltages() const { return v.tail(v.size() - 1); }
  double losses(const FeederModel& model) const {
    double total = 0.0;
    for (const auto& line : model.lines) total += line.r * ell[line.child];
    return total;
  }
};

// Max residual over (1a)-(1d) for a candidate solution.
inline double distflow_residual(const FeederModel& model, const Tree& tree, const Vector& p_total,
                                const Vector& q_total, const PowerFlowSolution& s) {
  double worst = 0.0;
  for (NodeId j = 1; j <= static_cast<NodeId>(model.node_count); ++j) {
    const Line& line = model.lines[tree.line_index(j)];
    double p_down = 0.0;
    double q_down = 0.0;
    for (NodeId k : tree.children(j)) {
      p_down += s.P[k];
      q_down += s.Q[k];
    }
    const double e1 = s.P[j] - (-p_total[slot(j)] + p_down + line.r * s.ell[j]);
    const double e2 = s.Q[j] - (-q_total[slot(j)] + q_down + line.x * s.ell[j]);
    const double vi2 = s.v[line.parent] * s.v[line.parent];
    const double e3 = s.v[j] * s.v[j] -
                      (vi2 - 2.0 * (line.r * s.P[j] + line.x * s.Q[j]) +
                       (line.r * line.r + line.x * line.x) * s.ell[j]);
    const double e4 = s.ell[j] * vi2 - (s.P[j] * s.P[j] + s.Q[j] * s.Q[j]);
    worst = std::max({worst, std::abs(e1), std::abs(e2), std::abs(e3), std::abs(e4)});
  }
  return worst;
}

// Solves DistFlow for *total* nodal injections (nominal plus dispatch).
// Flat start; throws VoltageCollapseError if some v^2 <= 0 and
// ConvergenceError if max_iter sweeps do not reach the tolerance.
inline PowerFlowSolution solve_distflow(const FeederModel& model, const Vector& p_total, const Vector& q_total,
                                        const DistFlowOptions& opts = {}) {
  if (!(opts.tolerance > 0.0)) throw ValidationError("solve_distflow: tolerance must be positive");
  if (p_total.size() != model.size() || q_total.size() != model.size()) {
    throw DimensionError("solve_distflow: injection vectors must have length N");
  }
  const Tree tree(model);
  const Eigen::Index n1 = model.size() + 1;
  PowerFlowSolution s;
  s.v = Vector::Constant(n1, model.v0);
  s.P = Vector::Zero(n1);
  s.Q = Vector::Zero(n1);
  s.ell = Vector::Zero(n1);
  const auto& order = tree.bfs_order();

  auto backward = [&] {
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const NodeId j = *it;
      if (j == kSlack) continue;
      const Line& line = model.lines[tree.line_index(j)];
      double p_down = 0.0;
      double q_down = 0.0;
      for (NodeId k : tree.children(j)) {
        p_down += s.P[k];
        q_down += s.Q[k];
      }
      s.P[j] = -p_total[slot(j)] + p_down + line.r * s.ell[j];
      s.Q[j] = -q_total[slot(j)] + q_down + line.x * s.ell[j];
    }
  };

  for (std::size_t iter = 1; iter <= opts.max_iter; ++iter) {
    backward();
    double change = 0.0;
    for (std::size_t k = 1; k < order.size(); ++k) {
      const NodeId j = order[k];
      const Line& line = model.lines[tree.line_index(j)];
      const double vi = s.v[line.parent];
      const double vj2 = vi * vi - 2.0 * (line.r * s.P[j] + line.x * s.Q[j]) +
                         (line.r * line.r + line.x * line.x) * s.ell[j];
      if (!(vj2 > 0.0)) {
        throw VoltageCollapseError("voltage collapse at node " + std::to_string(j));
      }
      const double vj = std::sqrt(vj2);
      change = std::max(change, std::abs(vj - s.v[j]));
      s.v[j] = vj;
    }
    for (std::size_t k = 1; k < order.size(); ++k) {
      const NodeId j = order[k];
      const double vi = s.v[model.lines[tree.line_index(j)].parent];
      s.ell[j] = (s.P[j] * s.P[j] + s.Q[j] * s.Q[j]) / (vi * vi);
    }
    s.iterations = iter;
    s.last_update = change;
    if (change <= opts.tolerance) {
      // Close (1a)-(1b) against the final currents and re-propagate once so
      // all four equations are evaluated on one consistent state.
      backward();
      for (std::size_t k = 1; k < order.size(); ++k) {
        const NodeId j = order[k];
        const Line& line = model.lines[tree.line_index(j)];
        const double vi = s.v[line.parent];
        s.v[j] = std::sqrt(vi * vi - 2.0 * (line.r * s.P[j] + line.x * s.Q[j]) +
                           (line.r * line.r + line.x * line.x) * s.ell[j]);
      }
      s.converged = true;
      break;
    }
  }
  s.residual = distflow_residual(model, tree, p_total, q_total, s);
  double head = 0.0;
  for (NodeId k : tree.children(kSlack)) head += s.P[k];
  s.head_power = head;
  if (!s.converged) {
    throw ConvergenceError("DistFlow sweep did not converge in " + std::to_string(opts.max_iter) +
                               " iterations (last |dv| = " + std::to_string(s.last_update) + ")",
                           s.last_update);
  }
  return s;
}

// Nominal plus dispatch.
// Lossless linear model evaluated by one backward and one forward sweep:
// the same v = v0 + R p + X q as the sensitivity form, without building R, X.
inline Vector linear_sweep_voltages(const FeederModel& model, const Tree& tree, const Vector& p_total,
                                    const Vector& q_total) {
  const Eigen::Index n = model.size();
  if (p_total.size() != n || q_total.size() != n) throw DimensionError("linear_sweep_voltages: size mismatch");
  const auto& order = tree.bfs_order();
  Vector sp = p_total, sq = q_total;  // downstream sums, indexed by slot
  for (std::size_t k = order.size() - 1; k >= 1; --k) {
    const NodeId up = tree.parent(order[k]);
    if (up != kSlack) {
      sp[slot(up)] += sp[slot(order[k])];
      sq[slot(up)] += sq[slot(order[k])];
    }
  }
  Vector v(n);
  for (std::size_t k = 1; k < order.size(); ++k) {
    const NodeId node = order[k];
    const NodeId up = tree.parent(node);
    const Line& line = model.lines[tree.line_index(node)];
    const double base = up == kSlack ? model.v0 : v[slot(up)];
    v[slot(node)] = base + line.r * sp[slot(node)] + line.x * sq[slot(node)];
  }
  return v;
}

inline Vector total_real_injection(const FeederModel& model, const Vector& p) { return model.p_nominal + p; }
inline Vector total_reactive_injection(const FeederModel& model, const Vector& q) { return model.q_nominal + q; }

// v_nonlinear - v_linear per node (length N) for dispatch deviations (p, q).
inline Vector linearization_error(const FeederModel& model, const SensitivityPair& sens, const Vector& p,
                                  const Vector& q, const DistFlowOptions& opts = {}) {
  const auto pf = solve_distflow(model, total_real_injection(model, p), total_reactive_injection(model, q), opts);
  return pf.node_voltages() - voltages(sens, p, q);
}

inline Vector linearization_error(const FeederModel& model, const Vector& p, const Vector& q,
                                  const DistFlowOptions& opts = {}) {
  return linearization_error(model, build_sensitivity(model), p, q, opts);
}

}  // namespace hdvr
