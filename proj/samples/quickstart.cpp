// Generates a 60-node feeder, splits it into three autonomous grids, and runs
// the central and hierarchical solvers side by side.

#include <cstdio>

#include "hdvr/hdvr.hpp"

int main() {
  using namespace hdvr;

  FeederSpec spec;
  spec.nodes = 60;
  spec.target_v_min = 0.93;
  const FeederFile feeder = generate_feeder_file(spec, 7);
  const Partition part = auto_partition(feeder.model, 3);
  const OpfProblem prob = build_problem(feeder, 5e-4, 0.8, 0.05);

  const SensitivityPair sens = build_sensitivity(feeder.model);
  const ConvergenceCertificate cert = certify_stepsize(prob, sens);
  SolverOptions opts;
  opts.step = cert.step(0.9);
  opts.tolerance = 1e-9;
  opts.max_iter = 200000;

  const RunResult central = run_central(prob, sens, Plant::linear(sens), opts);
  const HierarchicalResult hier =
      run_hierarchical(prob, make_agent_views(feeder.model, part), part, Plant::linear_sweep(feeder.model), opts);

  std::printf("feeder: %zu nodes, %zu AGs, %zu unclustered\n", feeder.model.node_count, part.K(), part.U());
  std::printf("step %.3g (bound %.3g, M %.3g, L %.3g)\n", opts.step, cert.step_bound, cert.M, cert.L);
  std::printf("initial v_min %.4f\n", initial_state(prob, sens).v.minCoeff());
  std::printf("central:      %zu iterations, v_min %.4f, %llu flops/iter\n", central.trace.iterations,
              central.state.v.minCoeff(), static_cast<unsigned long long>(central_coupling_flops(feeder.model.node_count)));
  std::printf("hierarchical: %zu iterations, v_min %.4f, %llu flops/iter\n", hier.trace.iterations,
              hier.state.v.minCoeff(), static_cast<unsigned long long>(hierarchical_coupling_flops(part)));
  std::printf("max |z_h - z_c| = %.3g\n", (hier.state.stacked() - central.state.stacked()).lpNorm<Eigen::Infinity>());
  return 0;
}
