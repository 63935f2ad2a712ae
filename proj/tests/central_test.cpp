#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "support.hpp"

namespace hdvr {
namespace {

using testing::make_instance;
using testing::random_tree;

SolverOptions certified(const OpfProblem& prob, const SensitivityPair& sens, double tol, std::size_t max_iter) {
  SolverOptions o;
  o.step = certify_stepsize(prob, sens).step(0.9);
  o.tolerance = tol;
  o.max_iter = max_iter;
  return o;
}

TEST(RunCentral, LooseBoundsReachSeparableMinimum) {
  auto inst = make_instance(random_tree(8, 1), 1, 0.1, 0.0, 5.0);
  inst.prob.v_min.setConstant(0.5);
  inst.prob.v_max.setConstant(1.5);
  const auto res = run_central(inst.prob, inst.sens, Plant::linear(inst.sens), certified(inst.prob, inst.sens, 1e-12, 100000));
  EXPECT_TRUE(res.trace.converged);
  EXPECT_EQ(res.state.mu_lo.lpNorm<Eigen::Infinity>(), 0.0);
  EXPECT_EQ(res.state.mu_hi.lpNorm<Eigen::Infinity>(), 0.0);
  for (Eigen::Index i = 0; i < 8; ++i) {
    EXPECT_NEAR(res.state.p[i], inst.prob.devices[static_cast<std::size_t>(i)].p_target, 1e-10);
    EXPECT_NEAR(res.state.q[i], inst.prob.devices[static_cast<std::size_t>(i)].q_target, 1e-10);
  }
}

TEST(RunCentral, UndervoltageChainEndsNearBounds) {
  const auto inst = testing::undervoltage_chain();
  const auto initial = initial_state(inst.prob, inst.sens);
  ASSERT_LT(initial.v.minCoeff(), 0.94);
  const auto res = run_central(inst.prob, inst.sens, Plant::linear(inst.sens), certified(inst.prob, inst.sens, 1e-10, 3'000'000));
  ASSERT_TRUE(res.trace.converged);
  EXPECT_GE(res.state.v.minCoeff(), 0.95 - 2e-3);
  EXPECT_LE(res.state.v.maxCoeff(), 1.05 + 2e-3);
  const auto star = saddle_point_oracle(inst.prob, inst.sens);
  EXPECT_LE((res.state.stacked() - star.stacked()).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(RunCentral, TenfoldStepOnStiffDeviceDiverges) {
  const auto inst = testing::stiff_device_instance();
  const auto cert = certify_stepsize(inst.prob, inst.sens);
  // The stiff device's primal mode is overshot: |1 - eps * 2c| > 1.
  ASSERT_GT(10.0 * cert.step_bound * 2.0 * inst.prob.devices[1].cost_p, 2.0);
  SolverOptions o;
  o.step = 10.0 * cert.step_bound;
  o.max_iter = 100000;
  EXPECT_THROW(run_central(inst.prob, inst.sens, Plant::linear(inst.sens), o), DivergenceError);
}

TEST(RunCentral, DivergenceDiagnosticNamesStep) {
  const auto inst = testing::stiff_device_instance();
  SolverOptions o;
  o.step = 10.0 * certify_stepsize(inst.prob, inst.sens).step_bound;
  o.max_iter = 100000;
  try {
    run_central(inst.prob, inst.sens, Plant::linear(inst.sens), o);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("divergence detected"), std::string::npos);
  }
}

TEST(RunCentral, DistanceToSaddlePointNonincreasingAndLinearRate) {
  auto inst = make_instance(random_tree(10, 4), 4, 0.1, 0.1, 0.05, 4.0);
  const auto star = saddle_point_oracle(inst.prob, inst.sens, {1e-13}).stacked();
  auto opts = certified(inst.prob, inst.sens, 1e-12, 200000);
  std::vector<double> dist;
  opts.on_iterate = [&](const IterateState& s) {
    dist.push_back((s.stacked() - star).norm());
    // Projection invariants hold after every iteration.
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      ASSERT_TRUE(inst.prob.devices[static_cast<std::size_t>(i)].box.contains(s.p[i], s.q[i]));
    }
    ASSERT_GE(s.mu_lo.minCoeff(), 0.0);
    ASSERT_GE(s.mu_hi.minCoeff(), 0.0);
  };
  const auto res = run_central(inst.prob, inst.sens, Plant::linear(inst.sens), opts);
  ASSERT_TRUE(res.trace.converged);
  for (std::size_t t = 1; t < dist.size(); ++t) {
    if (dist[t - 1] < 1e-10) break;
    ASSERT_LE(dist[t], dist[t - 1] * (1 + 1e-12)) << "t = " << t;
  }
  // Log-residual is linear in t over the tail: negative slope, R^2 > 0.9.
  const auto& recs = res.trace.records;
  const std::size_t from = recs.size() / 2;
  std::vector<double> xs, ys;
  for (std::size_t k = from; k < recs.size(); ++k) {
    if (recs[k].residual <= 0.0) continue;
    xs.push_back(static_cast<double>(recs[k].t));
    ys.push_back(std::log(recs[k].residual));
  }
  ASSERT_GT(xs.size(), 10u);
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxy += (xs[k] - mx) * (ys[k] - my);
    sxx += (xs[k] - mx) * (xs[k] - mx);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  const double slope = sxy / sxx;
  const double r2 = sxy * sxy / (sxx * syy);
  EXPECT_LT(slope, 0.0);
  EXPECT_GT(r2, 0.9);
}

TEST(RunCentral, DeterministicTraces) {
  auto inst = make_instance(random_tree(12, 5), 5, 0.05, 0.2, 0.05, 3.0);
  const auto opts = certified(inst.prob, inst.sens, 1e-9, 3000);
  const auto a = run_central(inst.prob, inst.sens, Plant::linear(inst.sens), opts);
  const auto b = run_central(inst.prob, inst.sens, Plant::linear(inst.sens), opts);
  ASSERT_EQ(a.trace.records.size(), b.trace.records.size());
  for (std::size_t k = 0; k < a.trace.records.size(); ++k) {
    EXPECT_EQ(a.trace.records[k].residual, b.trace.records[k].residual);
    EXPECT_EQ(a.trace.records[k].objective, b.trace.records[k].objective);
    EXPECT_EQ(a.trace.records[k].p0, b.trace.records[k].p0);
  }
  EXPECT_TRUE(a.state.stacked() == b.state.stacked());
}

TEST(RunCentral, CountsFlopsAndMessages) {
  auto inst = make_instance(random_tree(9, 6), 6, 0.1, 0.5, 0.05, 4.0);
  auto opts = certified(inst.prob, inst.sens, 1e-300, 25);
  const auto res = run_central(inst.prob, inst.sens, Plant::linear(inst.sens), opts);
  ASSERT_EQ(res.trace.records.size(), 25u);
  for (const auto& r : res.trace.records) {
    EXPECT_EQ(r.coupling_flops, 2u * 2u * 81u);
    EXPECT_EQ(r.messages, 3u * 9u + 1u);
  }
}

TEST(RunCentral, HeadPowerStopRule) {
  auto inst = make_instance(random_tree(10, 7), 7, 0.1, 0.5, 0.05, 3.0);
  auto opts = certified(inst.prob, inst.sens, 1e-7, 100000);
  opts.stop = StopRule::HeadPower;
  const auto res = run_central(inst.prob, inst.sens, Plant::linear(inst.sens), opts);
  ASSERT_TRUE(res.trace.converged);
  const auto& recs = res.trace.records;
  ASSERT_GE(recs.size(), 2u);
  EXPECT_LT(std::abs(recs.back().p0 - recs[recs.size() - 2].p0), 1e-7);
}

TEST(RunCentral, NonlinearPlantConverges) {
  const auto inst = testing::undervoltage_chain(1e-3, 0.1);
  auto opts = certified(inst.prob, inst.sens, 1e-10, 3'000'000);
  const auto res = run_central(inst.prob, inst.sens, Plant::nonlinear(inst.model), opts);
  ASSERT_TRUE(res.trace.converged);
  // Measured voltages end near the lower bound, up to the regularization slack.
  EXPECT_GE(res.state.v.minCoeff(), 0.95 - 2e-3);
}

TEST(RunCentral, RejectsBadOptions) {
  auto inst = make_instance(random_tree(4, 8), 8, 0.1);
  SolverOptions o;
  o.step = 0.0;
  EXPECT_THROW(run_central(inst.prob, inst.sens, Plant::linear(inst.sens), o), ValidationError);
  o.step = 1e-3;
  o.tolerance = -1.0;
  EXPECT_THROW(run_central(inst.prob, inst.sens, Plant::linear(inst.sens), o), ValidationError);
}

}  // namespace
}  // namespace hdvr
