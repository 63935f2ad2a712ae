#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"

namespace hdvr {
namespace {

using testing::chain;
using testing::random_tree;

// Light random loading: |p|, |q| <= 0.03 at every node.
void light_load(FeederModel& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.03, 0.0);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.p_nominal[i] = u(rng);
    m.q_nominal[i] = u(rng);
  }
}

TEST(SolveDistflow, NoLoadIsFlat) {
  const auto m = random_tree(20, 3);
  const auto s = solve_distflow(m, Vector::Zero(20), Vector::Zero(20));
  EXPECT_TRUE(s.converged);
  EXPECT_TRUE((s.v.array() == m.v0).all());
  EXPECT_EQ(s.P.lpNorm<Eigen::Infinity>(), 0.0);
  EXPECT_EQ(s.ell.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(SolveDistflow, TwoNodeHandFixedPoint) {
  const auto m = chain({{0.01, 0.02}});
  Vector p(1);
  p << -0.1;
  const auto s = solve_distflow(m, p, Vector::Zero(1));
  // Hand fixed point: P = 0.1 + r l, Q = x l, l = (P^2 + Q^2) / v0^2,
  // v1^2 = v0^2 - 2 (r P + x Q) + (r^2 + x^2) l.
  double P = 0.1, Q = 0.0, ell = 0.0, v = 1.0;
  for (int k = 0; k < 200; ++k) {
    P = 0.1 + 0.01 * ell;
    Q = 0.02 * ell;
    v = std::sqrt(1.0 - 2.0 * (0.01 * P + 0.02 * Q) + (0.01 * 0.01 + 0.02 * 0.02) * ell);
    ell = P * P + Q * Q;
  }
  EXPECT_NEAR(s.v[1], v, 1e-10);
  EXPECT_NEAR(s.P[1], P, 1e-10);
  EXPECT_LT(s.v[1], 1.0 - 0.001);  // losses pull it below the lossless value
  EXPECT_GT(s.v[1], 1.0 - 0.0011);
}

TEST(SolveDistflow, SolutionSatisfiesBranchEquations) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto m = random_tree(50, seed);
    light_load(m, seed);
    const auto s = solve_distflow(m, m.p_nominal, m.q_nominal);
    EXPECT_TRUE(s.converged);
    EXPECT_LE(s.residual, 1e-9);
    EXPECT_EQ(s.v[0], m.v0);
    // Energy balance: head power = consumption + losses.
    const double losses = s.losses(m);
    EXPECT_GE(losses, 0.0);
    EXPECT_NEAR(s.head_power, -m.p_nominal.sum() + losses, 1e-9);
  }
}

TEST(SolveDistflow, LightLoadMatchesLinearModel) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto m = random_tree(50, seed);
    light_load(m, seed);
    const Vector err = linearization_error(m, Vector::Zero(50), Vector::Zero(50));
    EXPECT_EQ(err.size(), 50);
    EXPECT_LE(err.lpNorm<Eigen::Infinity>(), 0.005) << "seed " << seed;
  }
}

TEST(SolveDistflow, CollapseAndNonConvergence) {
  const auto m = chain({{0.5, 0.5}});
  Vector p(1);
  p << -5.0;
  EXPECT_THROW(solve_distflow(m, p, Vector::Zero(1)), VoltageCollapseError);

  const auto light = chain({{0.01, 0.02}});
  p << -0.1;
  DistFlowOptions one;
  one.max_iter = 1;
  try {
    solve_distflow(light, p, Vector::Zero(1), one);
    FAIL() << "expected a convergence error";
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.residual(), 0.0);
  }
  DistFlowOptions bad;
  bad.tolerance = 0.0;
  EXPECT_THROW(solve_distflow(light, p, Vector::Zero(1), bad), ValidationError);
}

TEST(LinearizationError, ZeroInjectionIsZero) {
  auto m = random_tree(15, 2);
  m.p_nominal.setZero();
  m.q_nominal.setZero();
  const Vector err = linearization_error(m, Vector::Zero(15), Vector::Zero(15));
  EXPECT_EQ(err.size(), 15);
  EXPECT_EQ(err.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(LinearSweep, MatchesDenseSensitivity) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto m = random_tree(60, seed);
    light_load(m, seed + 50);
    const Tree tree(m);
    const auto sens = build_sensitivity(m);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    Vector p(60), q(60);
    for (Eigen::Index i = 0; i < 60; ++i) {
      p[i] = u(rng);
      q[i] = u(rng);
    }
    const Vector dense = voltages(sens, p, q);
    const Vector sweep = linear_sweep_voltages(m, tree, total_real_injection(m, p), total_reactive_injection(m, q));
    EXPECT_LE((dense - sweep).lpNorm<Eigen::Infinity>(), 1e-13);
    EXPECT_LE((Plant::linear_sweep(m).measure(p, q) - dense).lpNorm<Eigen::Infinity>(), 1e-13);
  }
}

}  // namespace
}  // namespace hdvr
