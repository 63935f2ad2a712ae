#pragma once

// Voltage-regulation OPF with quadratic device costs, its regularized
// Lagrangian, the saddle operator T(z), and step-size certification.

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "hdvr/feeder.hpp"

namespace hdvr {

struct Box {
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;

  bool empty() const { return !(p_min <= p_max) || !(q_min <= q_max); }
  bool contains(double p, double q) const { return p >= p_min && p <= p_max && q >= q_min && q <= q_max; }
  friend bool operator==(const Box&, const Box&) = default;
};

// C_i(p, q) = cost_p (p - p_target)^2 + cost_q (q - q_target)^2 over `box`.
struct DeviceSpec {
  double cost_p = 1.0;
  double cost_q = 1.0;
  double p_target = 0.0;
  double q_target = 0.0;
  Box box;

  // Node without a dispatchable device: dispatch pinned at zero deviation.
  static DeviceSpec fixed() { return DeviceSpec{}; }

  bool dispatchable() const { return box.p_min < box.p_max || box.q_min < box.q_max; }
  double cost(double p, double q) const {
    return cost_p * (p - p_target) * (p - p_target) + cost_q * (q - q_target) * (q - q_target);
  }
  friend bool operator==(const DeviceSpec&, const DeviceSpec&) = default;
};

struct OpfProblem {
  std::vector<DeviceSpec> devices;  // one per node, slot order
  Vector v_min;
  Vector v_max;
  double alpha = 0.0;           // head cost weight
  double p0_target = 0.0;       // dispatch signal for P0
  double inelastic_load = 0.0;  // P_I
  double phi = 1e-3;            // dual regularization

  Eigen::Index size() const { return static_cast<Eigen::Index>(devices.size()); }

  ValidationReport validate() const {
    ValidationReport report;
    const auto n = size();
    if (v_min.size() != n || v_max.size() != n) report.add("voltage bound vectors must have length N");
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& d = devices[static_cast<std::size_t>(i)];
      const std::string at = " at node " + std::to_string(node_at(i));
      if (d.box.empty()) report.add("empty feasible box" + at);
      if (!(d.cost_p > 0.0) || !(d.cost_q > 0.0)) report.add("cost coefficients must be positive" + at);
      if (v_min.size() == n && v_max.size() == n && !(v_min[i] < v_max[i])) report.add("v_min >= v_max" + at);
    }
    if (!(phi > 0.0)) report.add("phi must be positive");
    if (!(alpha >= 0.0)) report.add("alpha must be nonnegative");
    return report;
  }

  void require_valid() const {
    if (auto r = validate(); !r.ok()) throw ValidationError("invalid OPF problem: " + r.str());
  }
};

// Primal (p, q), dual (mu_lo, mu_hi), plus the measured voltage and head power
// that the next update reads.
struct IterateState {
  Vector p;
  Vector q;
  Vector mu_lo;
  Vector mu_hi;
  Vector v;
  double p0 = 0.0;
  std::size_t t = 0;

  Eigen::Index size() const { return p.size(); }

  // z = [p; q; mu_lo; mu_hi]
  Vector stacked() const {
    const auto n = size();
    Vector z(4 * n);
    z << p, q, mu_lo, mu_hi;
    return z;
  }
};

inline void unstack(const Vector& z, Vector& p, Vector& q, Vector& mu_lo, Vector& mu_hi) {
  const auto n = z.size() / 4;
  p = z.segment(0, n);
  q = z.segment(n, n);
  mu_lo = z.segment(2 * n, n);
  mu_hi = z.segment(3 * n, n);
}

// -- projections -------------------------------------------------------------

inline std::pair<double, double> project_box(std::pair<double, double> value, const Box& box) {
  return {std::clamp(value.first, box.p_min, box.p_max), std::clamp(value.second, box.q_min, box.q_max)};
}

inline Vector project_nonneg(const Vector& x) { return x.cwiseMax(0.0); }

// -- costs ---------------------------------------------------------------------

inline double head_cost(const OpfProblem& prob, double p0) {
  return prob.alpha * (p0 - prob.p0_target) * (p0 - prob.p0_target);
}

// C0'(P0)
inline double head_cost_slope(const OpfProblem& prob, double p0) { return 2.0 * prob.alpha * (p0 - prob.p0_target); }

inline double objective(const OpfProblem& prob, const Vector& p, const Vector& q) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < prob.size(); ++i) total += prob.devices[static_cast<std::size_t>(i)].cost(p[i], q[i]);
  return total + head_cost(prob, feeder_head_power(p, prob.inelastic_load));
}

// Initial iterate: device targets projected into their boxes, zero duals.
// Voltages are left empty.
inline IterateState initial_dispatch(const OpfProblem& prob) {
  const auto n = prob.size();
  IterateState s{Vector(n), Vector(n), Vector::Zero(n), Vector::Zero(n), Vector(), 0.0, 0};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& d = prob.devices[static_cast<std::size_t>(i)];
    std::tie(s.p[i], s.q[i]) = project_box({d.p_target, d.q_target}, d.box);
  }
  s.p0 = feeder_head_power(s.p, prob.inelastic_load);
  return s;
}

inline IterateState initial_state(const OpfProblem& prob, const SensitivityPair& sens) {
  IterateState s = initial_dispatch(prob);
  s.v = voltages(sens, s.p, s.q);
  s.p0 = feeder_head_power(s.p, prob.inelastic_load);
  return s;
}

// -- Lagrangian and gradients -----------------------------------------------------

inline double lagrangian_value(const OpfProblem& prob, const SensitivityPair& sens, const IterateState& s) {
  const Vector v = voltages(sens, s.p, s.q);
  return objective(prob, s.p, s.q) + s.mu_lo.dot(prob.v_min - v) + s.mu_hi.dot(v - prob.v_max) -
         0.5 * prob.phi * (s.mu_lo.squaredNorm() + s.mu_hi.squaredNorm());
}

struct PrimalGradient {
  Vector p;
  Vector q;
};

inline PrimalGradient primal_gradient(const OpfProblem& prob, const SensitivityPair& sens, const IterateState& s) {
  const Vector d = s.mu_hi - s.mu_lo;
  const double slope = head_cost_slope(prob, feeder_head_power(s.p, prob.inelastic_load));
  PrimalGradient g{sens.R.transpose() * d, sens.X.transpose() * d};
  for (Eigen::Index i = 0; i < prob.size(); ++i) {
    const auto& dev = prob.devices[static_cast<std::size_t>(i)];
    g.p[i] += 2.0 * dev.cost_p * (s.p[i] - dev.p_target) - slope;
    g.q[i] += 2.0 * dev.cost_q * (s.q[i] - dev.q_target);
  }
  return g;
}

struct DualGradient {
  Vector lower;  // v_min - v - phi mu_lo
  Vector upper;  // v - v_max - phi mu_hi
};

// Uses the voltage stored in the state (linear model or a measurement).
inline DualGradient dual_gradient(const OpfProblem& prob, const IterateState& s) {
  return {prob.v_min - s.v - prob.phi * s.mu_lo, s.v - prob.v_max - prob.phi * s.mu_hi};
}

// -- per-node projected updates (shared by every solver) --------------------------

// One projected primal step at a node, given its coupling terms
// [R^T(mu_hi - mu_lo)]_i, [X^T(mu_hi - mu_lo)]_i and the broadcast C0'.
inline std::pair<double, double> primal_update(const DeviceSpec& dev, double p, double q, double coupling_p,
                                               double coupling_q, double head_slope, double step) {
  const double gp = 2.0 * dev.cost_p * (p - dev.p_target) - head_slope + coupling_p;
  const double gq = 2.0 * dev.cost_q * (q - dev.q_target) + coupling_q;
  return project_box({p - step * gp, q - step * gq}, dev.box);
}

inline double lower_dual_update(double mu, double v_min, double v, double phi, double step) {
  return std::max(0.0, mu + step * (v_min - v - phi * mu));
}

inline double upper_dual_update(double mu, double v_max, double v, double phi, double step) {
  return std::max(0.0, mu + step * (v - v_max - phi * mu));
}

// -- saddle operator ---------------------------------------------------------------

// T(z) = [grad_y L_phi; -grad_mu L_phi] with the linear voltage model.
inline Vector saddle_operator(const OpfProblem& prob, const SensitivityPair& sens, const Vector& z) {
  Vector p, q, lo, hi;
  unstack(z, p, q, lo, hi);
  const auto n = prob.size();
  const Vector d = hi - lo;
  const Vector v = voltages(sens, p, q);
  const double slope = head_cost_slope(prob, feeder_head_power(p, prob.inelastic_load));
  Vector out(4 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& dev = prob.devices[static_cast<std::size_t>(i)];
    out[i] = 2.0 * dev.cost_p * (p[i] - dev.p_target) - slope;
    out[n + i] = 2.0 * dev.cost_q * (q[i] - dev.q_target);
  }
  out.segment(0, n) += sens.R.transpose() * d;
  out.segment(n, n) += sens.X.transpose() * d;
  out.segment(2 * n, n) = v - prob.v_min + prob.phi * lo;
  out.segment(3 * n, n) = prob.v_max - v + prob.phi * hi;
  return out;
}

// Projection onto Y x U for a stacked z.
inline Vector project_feasible(const OpfProblem& prob, const Vector& z) {
  const auto n = prob.size();
  Vector out = z;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::tie(out[i], out[n + i]) = project_box({z[i], z[n + i]}, prob.devices[static_cast<std::size_t>(i)].box);
  }
  out.tail(2 * n) = out.tail(2 * n).cwiseMax(0.0);
  return out;
}

// ||z - P(z - T(z))||_2: zero exactly at the saddle point.
inline double natural_residual(const OpfProblem& prob, const SensitivityPair& sens, const Vector& z) {
  return (z - project_feasible(prob, z - saddle_operator(prob, sens, z))).norm();
}

// T is affine for quadratic costs; this applies its Jacobian J (or J^T) to w.
//   J = [ Hp      0    -R^T   R^T ]     Hp = 2 diag(cost_p) + 2 alpha 11^T
//       [ 0       Hq   -X^T   X^T ]     Hq = 2 diag(cost_q)
//       [ R       X    phi I  0   ]
//       [ -R     -X    0      phi I]
inline Vector apply_saddle_jacobian(const OpfProblem& prob, const SensitivityPair& sens, const Vector& w,
                                    bool transpose = false) {
  const auto n = prob.size();
  const auto wp = w.segment(0, n);
  const auto wq = w.segment(n, n);
  const auto wl = w.segment(2 * n, n);
  const auto wh = w.segment(3 * n, n);
  Vector out(4 * n);
  const double head = 2.0 * prob.alpha * wp.sum();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& dev = prob.devices[static_cast<std::size_t>(i)];
    out[i] = 2.0 * dev.cost_p * wp[i] + head;
    out[n + i] = 2.0 * dev.cost_q * wq[i];
  }
  const Vector flow = sens.R * wp + sens.X * wq;
  if (!transpose) {
    const Vector d = wh - wl;
    out.segment(0, n) += sens.R.transpose() * d;
    out.segment(n, n) += sens.X.transpose() * d;
    out.segment(2 * n, n) = flow + prob.phi * wl;
    out.segment(3 * n, n) = -flow + prob.phi * wh;
  } else {
    const Vector d = wl - wh;
    out.segment(0, n) += sens.R * d;
    out.segment(n, n) += sens.X * d;
    out.segment(2 * n, n) = -flow + prob.phi * wl;
    out.segment(3 * n, n) = flow + prob.phi * wh;
  }
  return out;
}

// -- step-size certification -------------------------------------------------------

struct ConvergenceCertificate {
  double M = 0.0;  // strong monotonicity modulus
  double L = 0.0;  // Lipschitz constant of T
  double step_bound = 0.0;  // 2M / L^2
  std::size_t power_iterations = 0;

  // Squared-distance contraction factor per step: 1 + eps^2 L^2 - 2 eps M.
  double contraction(double step) const { return 1.0 + step * step * L * L - 2.0 * step * M; }
  bool certifies(double step) const { return step > 0.0 && step < step_bound; }
  double step(double fraction = 0.9) const { return fraction * step_bound; }
};

struct CertifyOptions {
  double tolerance = 1e-13;     // relative change of the Rayleigh quotient
  std::size_t max_iter = 20000;
  double safety = 1e-6;         // relative inflation of the power-iteration estimate
};

// M: the symmetric part of J is blockdiag(Hp, Hq, phi I, phi I) because the
// coupling block is skew, so M = min(2 min cost, phi); the PSD rank-one head
// term only raises it. L: ||J||_2 by power iteration on J^T J.
inline ConvergenceCertificate certify_stepsize(const OpfProblem& prob, const SensitivityPair& sens,
                                               const CertifyOptions& opts = {}) {
  prob.require_valid();
  const auto n = prob.size();
  if (sens.size() != n) throw DimensionError("certify_stepsize: sensitivity size mismatch");
  double min_cost = std::numeric_limits<double>::infinity();
  for (const auto& d : prob.devices) min_cost = std::min({min_cost, d.cost_p, d.cost_q});

  ConvergenceCertificate cert;
  cert.M = std::min(2.0 * min_cost, prob.phi);

  Vector u(4 * n);
  for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = 1.0 + 0.25 * std::sin(0.7 * static_cast<double>(i) + 0.3);
  u.normalize();
  double lambda = 0.0;
  for (std::size_t k = 1; k <= opts.max_iter; ++k) {
    const Vector ju = apply_saddle_jacobian(prob, sens, u);
    const double rayleigh = ju.squaredNorm();
    Vector next = apply_saddle_jacobian(prob, sens, ju, true);
    cert.power_iterations = k;
    const double norm = next.norm();
    if (norm == 0.0) break;
    u = next / norm;
    const bool done = k > 1 && std::abs(rayleigh - lambda) <= opts.tolerance * rayleigh;
    lambda = rayleigh;
    if (done) break;
  }
  cert.L = std::max(std::sqrt(lambda) * (1.0 + opts.safety), cert.M);
  cert.step_bound = 2.0 * cert.M / (cert.L * cert.L);
  return cert;
}

}  // namespace hdvr
