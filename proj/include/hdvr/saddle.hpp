#pragma once

// Reference saddle points of the regularized Lagrangian, computed on the dense
// path only (full R, X) and independent of the coordinated solvers.
//
// Two routes:
//  * saddle_point_oracle: the projected primal-dual map with a certified step,
//    iterated to a fixed point.
//  * eliminated_saddle_point: maximizing out the duals in closed form,
//    mu_lo = [v_min - v]_+ / phi, mu_hi = [v - v_max]_+ / phi, leaves a strongly
//    convex box-constrained problem in (p, q), solved by accelerated projected
//    gradient. Usable at small phi where the certified step is tiny.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <tuple>

#include "hdvr/opf.hpp"

namespace hdvr {

struct OracleOptions {
  double tolerance = 1e-10;          // fixed-point residual, relative to the step
  std::size_t max_iter = 5'000'000;
  double step_fraction = 0.9;        // of the certified bound 2M/L^2
};

inline IterateState state_from_stacked(const OpfProblem& prob, const SensitivityPair& sens, const Vector& z,
                                       std::size_t t = 0) {
  IterateState s;
  unstack(z, s.p, s.q, s.mu_lo, s.mu_hi);
  s.v = voltages(sens, s.p, s.q);
  s.p0 = feeder_head_power(s.p, prob.inelastic_load);
  s.t = t;
  return s;
}

inline IterateState saddle_point_oracle(const OpfProblem& prob, const SensitivityPair& sens,
                                        const OracleOptions& opts = {}) {
  const auto cert = certify_stepsize(prob, sens);
  const double step = cert.step(opts.step_fraction);
  Vector z = initial_state(prob, sens).stacked();
  for (std::size_t t = 1; t <= opts.max_iter; ++t) {
    Vector next = project_feasible(prob, z - step * saddle_operator(prob, sens, z));
    const double change = (next - z).lpNorm<Eigen::Infinity>();
    z = std::move(next);
    if (!std::isfinite(change)) throw DivergenceError("saddle_point_oracle: non-finite iterate");
    if (change <= opts.tolerance * step) return state_from_stacked(prob, sens, z, t);
  }
  throw ConvergenceError("saddle_point_oracle: iteration cap exceeded", natural_residual(prob, sens, z));
}

struct EliminationOptions {
  double tolerance = 1e-11;  // infinity norm of the gradient mapping
  std::size_t max_iter = 2'000'000;
};

// Duals implied by a primal point at the regularized optimum.
inline void implied_duals(const OpfProblem& prob, const Vector& v, Vector& mu_lo, Vector& mu_hi) {
  mu_lo = (prob.v_min - v).cwiseMax(0.0) / prob.phi;
  mu_hi = (v - prob.v_max).cwiseMax(0.0) / prob.phi;
}

inline IterateState eliminated_saddle_point(const OpfProblem& prob, const SensitivityPair& sens,
                                            const EliminationOptions& opts = {}) {
  prob.require_valid();
  const auto n = prob.size();

  double max_cost = 0.0;
  double min_cost = std::numeric_limits<double>::infinity();
  for (const auto& d : prob.devices) {
    max_cost = std::max({max_cost, d.cost_p, d.cost_q});
    min_cost = std::min({min_cost, d.cost_p, d.cost_q});
  }
  const Matrix gram = sens.R * sens.R + sens.X * sens.X;
  const double gram_max = Eigen::SelfAdjointEigenSolver<Matrix>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  const double lipschitz = 2.0 * max_cost + 2.0 * prob.alpha * static_cast<double>(n) + gram_max / prob.phi;
  const double convexity = 2.0 * min_cost;
  const double momentum = (std::sqrt(lipschitz) - std::sqrt(convexity)) / (std::sqrt(lipschitz) + std::sqrt(convexity));

  auto value = [&](const Vector& p, const Vector& q) {
    const Vector v = voltages(sens, p, q);
    return objective(prob, p, q) + (0.5 / prob.phi) * ((prob.v_min - v).cwiseMax(0.0).squaredNorm() +
                                                       (v - prob.v_max).cwiseMax(0.0).squaredNorm());
  };
  auto gradient_step = [&](const Vector& p, const Vector& q, Vector& p_out, Vector& q_out) {
    IterateState s;
    s.p = p;
    s.q = q;
    implied_duals(prob, voltages(sens, p, q), s.mu_lo, s.mu_hi);
    const auto g = primal_gradient(prob, sens, s);
    p_out.resize(n);
    q_out.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      std::tie(p_out[i], q_out[i]) =
          project_box({p[i] - g.p[i] / lipschitz, q[i] - g.q[i] / lipschitz}, prob.devices[static_cast<std::size_t>(i)].box);
    }
  };

  IterateState start = initial_state(prob, sens);
  Vector p = start.p, q = start.q;
  Vector yp = p, yq = q;
  double f = value(p, q);
  Vector np, nq;
  bool extrapolated = false;
  for (std::size_t k = 1; k <= opts.max_iter; ++k) {
    gradient_step(yp, yq, np, nq);
    const double fn = value(np, nq);
    if (extrapolated && fn > f) {
      // Momentum overshoot: restart from the last accepted point.
      yp = p;
      yq = q;
      extrapolated = false;
      continue;
    }
    const Vector dp = np - p, dq = nq - q;
    p = np;
    q = nq;
    f = fn;
    yp = p + momentum * dp;
    yq = q + momentum * dq;
    extrapolated = true;

    if (k % 16 == 0 || std::max(dp.lpNorm<Eigen::Infinity>(), dq.lpNorm<Eigen::Infinity>()) * lipschitz <= opts.tolerance) {
      Vector gp, gq;
      gradient_step(p, q, gp, gq);
      const double mapping = std::max((gp - p).lpNorm<Eigen::Infinity>(), (gq - q).lpNorm<Eigen::Infinity>()) * lipschitz;
      if (mapping <= opts.tolerance) {
        IterateState out;
        out.p = p;
        out.q = q;
        out.v = voltages(sens, p, q);
        implied_duals(prob, out.v, out.mu_lo, out.mu_hi);
        out.p0 = feeder_head_power(p, prob.inelastic_load);
        out.t = k;
        return out;
      }
    }
  }
  throw ConvergenceError("eliminated_saddle_point: iteration cap exceeded");
}

}  // namespace hdvr
