#pragma once

// Centrally coordinated primal-dual iteration: one coordinator holds the full
// R and X and forms both coupling products every step.

#include <cstdint>
#include <optional>

#include "hdvr/opf.hpp"
#include "hdvr/plant.hpp"
#include "hdvr/run.hpp"

namespace hdvr {

// Multiply-add counted as two flops.
inline std::uint64_t central_coupling_flops(std::size_t n) { return 4ull * n * n; }

// Per iteration: N dual differences up, (alpha_i, beta_i) down to N nodes, one
// C0' broadcast.
inline std::uint64_t central_message_scalars(std::size_t n) { return 3ull * n + 1; }

// All four blocks are updated simultaneously from time-t values.
inline RunResult run_central(const OpfProblem& prob, const SensitivityPair& sens, const Plant& plant,
                             const SolverOptions& opts, std::optional<IterateState> start = std::nullopt) {
  prob.require_valid();
  require_step(opts);
  const auto n = prob.size();
  if (sens.size() != n) throw DimensionError("run_central: sensitivity size mismatch");

  IterateState cur = start ? *start : initial_state(prob, sens);
  cur.v = plant.measure(cur.p, cur.q);
  cur.p0 = feeder_head_power(cur.p, prob.inelastic_load);
  cur.t = 0;

  RunMonitor monitor(prob, opts);
  const auto flops = central_coupling_flops(static_cast<std::size_t>(n));
  const auto messages = central_message_scalars(static_cast<std::size_t>(n));

  IterateState next = cur;
  for (std::size_t t = 0; t < opts.max_iter; ++t) {
    const Vector d = cur.mu_hi - cur.mu_lo;
    const Vector alpha = sens.R.transpose() * d;
    const Vector beta = sens.X.transpose() * d;
    const double slope = head_cost_slope(prob, cur.p0);

    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& dev = prob.devices[static_cast<std::size_t>(i)];
      std::tie(next.p[i], next.q[i]) = primal_update(dev, cur.p[i], cur.q[i], alpha[i], beta[i], slope, opts.step);
      next.mu_lo[i] = lower_dual_update(cur.mu_lo[i], prob.v_min[i], cur.v[i], prob.phi, opts.step);
      next.mu_hi[i] = upper_dual_update(cur.mu_hi[i], prob.v_max[i], cur.v[i], prob.phi, opts.step);
    }
    next.v = plant.measure(next.p, next.q);
    next.p0 = feeder_head_power(next.p, prob.inelastic_load);
    next.t = t + 1;

    const bool done = monitor.observe(cur, next, flops, messages);
    std::swap(cur, next);
    if (done) break;
  }
  return {std::move(cur), monitor.take()};
}

}  // namespace hdvr
