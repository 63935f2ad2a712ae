#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <random>

#include "support.hpp"

namespace hdvr {
namespace {

using testing::chain;
using testing::explicit_jacobian;
using testing::make_instance;
using testing::random_state;
using testing::random_tree;

TEST(OpfProblem, ValidationCatchesBadInput) {
  auto inst = make_instance(random_tree(4, 1), 1, 0.1);
  EXPECT_TRUE(inst.prob.validate().ok());
  auto bad = inst.prob;
  bad.phi = 0.0;
  EXPECT_FALSE(bad.validate().ok());
  bad = inst.prob;
  bad.v_min[1] = bad.v_max[1];
  EXPECT_FALSE(bad.validate().ok());
  bad = inst.prob;
  bad.devices[0].cost_p = 0.0;
  EXPECT_FALSE(bad.validate().ok());
  bad = inst.prob;
  bad.devices[2].box = {0.1, -0.1, 0.0, 0.0};
  EXPECT_FALSE(bad.validate().ok());
}

TEST(Projections, Examples) {
  const Box unit{-1, 1, -1, 1};
  EXPECT_EQ(project_box({0.5, 0.0}, unit), std::make_pair(0.5, 0.0));
  EXPECT_EQ(project_box({2.0, -3.0}, unit), std::make_pair(1.0, -1.0));
  Vector x(2);
  x << -1.0, 2.0;
  Vector expected(2);
  expected << 0.0, 2.0;
  EXPECT_EQ(project_nonneg(x), expected);
}

TEST(LagrangianValue, VanishesAtTargetsWithZeroDuals) {
  auto inst = make_instance(random_tree(6, 2), 2, 0.1, 0.0, 0.5);
  auto s = initial_state(inst.prob, inst.sens);
  EXPECT_EQ(lagrangian_value(inst.prob, inst.sens, s), 0.0);
}

TEST(LagrangianValue, LinearInPhi) {
  auto inst = make_instance(random_tree(6, 3), 3, 0.1);
  std::mt19937_64 rng(3);
  const auto s = random_state(inst.prob, inst.sens, rng);
  auto doubled = inst.prob;
  doubled.phi *= 2.0;
  const double drop = lagrangian_value(inst.prob, inst.sens, s) - lagrangian_value(doubled, inst.sens, s);
  const double expected = 0.5 * inst.prob.phi * (s.mu_lo.squaredNorm() + s.mu_hi.squaredNorm());
  EXPECT_NEAR(drop, expected, 1e-14);
}

TEST(LagrangianValue, MatchesTermByTermOracle) {
  auto inst = make_instance(chain({{0.01, 0.02}, {0.02, 0.01}, {0.015, 0.03}}), 4, 0.05, 0.3);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_state(inst.prob, inst.sens, rng);
    const auto& R = inst.sens.R;
    const auto& X = inst.sens.X;
    double total = 0.0;
    double flow = 0.0;
    for (int i = 0; i < 3; ++i) {
      const auto& d = inst.prob.devices[static_cast<std::size_t>(i)];
      total += d.cost_p * std::pow(s.p[i] - d.p_target, 2) + d.cost_q * std::pow(s.q[i] - d.q_target, 2);
      flow += s.p[i];
    }
    const double p0 = -inst.prob.inelastic_load - flow;
    total += inst.prob.alpha * std::pow(p0 - inst.prob.p0_target, 2);
    for (int i = 0; i < 3; ++i) {
      double v = inst.sens.v_tilde[i];
      for (int j = 0; j < 3; ++j) v += R(i, j) * s.p[j] + X(i, j) * s.q[j];
      total += s.mu_lo[i] * (inst.prob.v_min[i] - v) + s.mu_hi[i] * (v - inst.prob.v_max[i]);
      total -= 0.5 * inst.prob.phi * (s.mu_lo[i] * s.mu_lo[i] + s.mu_hi[i] * s.mu_hi[i]);
    }
    EXPECT_NEAR(lagrangian_value(inst.prob, inst.sens, s), total, 1e-14);
  }
}

TEST(PrimalGradient, ZeroAtTargetsWithBalancedDuals) {
  auto inst = make_instance(random_tree(5, 5), 5, 0.1, 0.0, 0.5);
  auto s = initial_state(inst.prob, inst.sens);
  s.mu_lo = Vector::Constant(5, 0.7);
  s.mu_hi = s.mu_lo;
  const auto g = primal_gradient(inst.prob, inst.sens, s);
  EXPECT_EQ(g.p.lpNorm<Eigen::Infinity>(), 0.0);
  EXPECT_EQ(g.q.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(PrimalGradient, CouplingTermOnChain) {
  auto inst = make_instance(chain({{0.01, 0.02}, {0.03, 0.04}}), 6, 0.1, 0.0, 0.5);
  auto s = initial_state(inst.prob, inst.sens);
  s.mu_hi << 1.0, 0.0;
  const auto g = primal_gradient(inst.prob, inst.sens, s);
  const auto& d = inst.prob.devices[1];
  EXPECT_NEAR(g.p[1] - 2.0 * d.cost_p * (s.p[1] - d.p_target), 0.01, 1e-15);
}

// Central differences of L_phi, h = 1e-6.
TEST(Gradients, MatchFiniteDifferences) {
  const double h = 1e-6;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto inst = make_instance(random_tree(5, seed), seed, 0.05, 0.4);
    std::mt19937_64 rng(seed);
    auto s = random_state(inst.prob, inst.sens, rng);
    const auto g = primal_gradient(inst.prob, inst.sens, s);
    s.v = voltages(inst.sens, s.p, s.q);
    const auto dg = dual_gradient(inst.prob, s);
    auto fd = [&](Vector IterateState::*field, Eigen::Index i) {
      auto plus = s, minus = s;
      (plus.*field)[i] += h;
      (minus.*field)[i] -= h;
      return (lagrangian_value(inst.prob, inst.sens, plus) - lagrangian_value(inst.prob, inst.sens, minus)) / (2 * h);
    };
    for (Eigen::Index i = 0; i < 5; ++i) {
      EXPECT_NEAR(g.p[i], fd(&IterateState::p, i), 1e-6 * std::max(1.0, std::abs(g.p[i])));
      EXPECT_NEAR(g.q[i], fd(&IterateState::q, i), 1e-6 * std::max(1.0, std::abs(g.q[i])));
      EXPECT_NEAR(dg.lower[i], fd(&IterateState::mu_lo, i), 1e-6 * std::max(1.0, std::abs(dg.lower[i])));
      EXPECT_NEAR(dg.upper[i], fd(&IterateState::mu_hi, i), 1e-6 * std::max(1.0, std::abs(dg.upper[i])));
    }
  }
}

TEST(DualGradient, SignsAtInteriorAndBoundary) {
  auto inst = make_instance(random_tree(4, 7), 7, 0.1);
  IterateState s = initial_state(inst.prob, inst.sens);
  s.v = Vector::Constant(4, 1.0);
  auto g = dual_gradient(inst.prob, s);
  EXPECT_TRUE((g.lower.array() < 0.0).all());
  EXPECT_TRUE((g.upper.array() < 0.0).all());
  s.v[2] = inst.prob.v_max[2];
  g = dual_gradient(inst.prob, s);
  EXPECT_EQ(g.upper[2], 0.0);
}

TEST(SaddleOperator, JacobianMatchesExplicitAssembly) {
  auto inst = make_instance(random_tree(6, 8), 8, 0.05, 0.3);
  const Matrix J = explicit_jacobian(inst.prob, inst.sens);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 10; ++trial) {
    Vector w(24);
    for (auto& x : w) x = g(rng);
    EXPECT_LE((apply_saddle_jacobian(inst.prob, inst.sens, w) - J * w).norm(), 1e-12);
    EXPECT_LE((apply_saddle_jacobian(inst.prob, inst.sens, w, true) - J.transpose() * w).norm(), 1e-12);
    // T is affine with Jacobian J.
    const auto a = random_state(inst.prob, inst.sens, rng).stacked();
    const Vector dT = saddle_operator(inst.prob, inst.sens, a + w) - saddle_operator(inst.prob, inst.sens, a);
    EXPECT_LE((dT - J * w).norm(), 1e-12);
  }
}

TEST(CertifyStepsize, SingleNodeModulus) {
  FeederModel m(1, {{0, 1, 0.01, 0.01}});
  OpfProblem prob;
  prob.devices.push_back({1.0, 1.0, 0.0, 0.0, {-1, 1, -1, 1}});
  prob.v_min = Vector::Constant(1, 0.95);
  prob.v_max = Vector::Constant(1, 1.05);
  prob.phi = 0.1;
  const auto sens = build_sensitivity(m);
  const auto cert = certify_stepsize(prob, sens);
  EXPECT_DOUBLE_EQ(cert.M, 0.1);
  // Oracle: smallest eigenvalue of the symmetric part of the explicit 4x4 Jacobian.
  const Matrix J = explicit_jacobian(prob, sens);
  const Matrix sym = 0.5 * (J + J.transpose());
  const double lambda_min = Eigen::SelfAdjointEigenSolver<Matrix>(sym).eigenvalues().minCoeff();
  EXPECT_NEAR(cert.M, lambda_min, 1e-14);
  const double sigma_max = Eigen::JacobiSVD<Matrix>(J).singularValues()[0];
  EXPECT_NEAR(cert.L, sigma_max, 1e-5 * sigma_max);
  EXPECT_GE(cert.L, sigma_max);
  EXPECT_DOUBLE_EQ(cert.step_bound, 2 * cert.M / (cert.L * cert.L));
}

TEST(CertifyStepsize, MatchesSpectralOraclesOnRandomInstances) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto inst = make_instance(random_tree(3 + seed, seed), seed, 0.02 * static_cast<double>(seed), 0.1 * static_cast<double>(seed % 3));
    const auto cert = certify_stepsize(inst.prob, inst.sens);
    const Matrix J = explicit_jacobian(inst.prob, inst.sens);
    const double sigma_max = Eigen::JacobiSVD<Matrix>(J).singularValues()[0];
    const double lambda_min =
        Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (J + J.transpose())).eigenvalues().minCoeff();
    EXPECT_GE(cert.L, sigma_max * (1 - 1e-9)) << "seed " << seed;
    EXPECT_LE(cert.L, sigma_max * (1 + 1e-5)) << "seed " << seed;
    EXPECT_LE(cert.M, lambda_min + 1e-12) << "seed " << seed;
    EXPECT_GT(cert.M, 0.0);
    EXPECT_LE(cert.M, cert.L);
    const double eps = cert.step();
    EXPECT_TRUE(cert.certifies(eps));
    EXPECT_GE(cert.contraction(eps), 0.0);
    EXPECT_LT(cert.contraction(eps), 1.0);
    EXPECT_FALSE(cert.certifies(cert.step_bound));
  }
}

TEST(SaddleOperator, StronglyMonotoneAndLipschitz) {
  std::mt19937_64 rng(2024);
  int samples = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto inst = make_instance(random_tree(2 + seed % 6, seed), seed, 0.01 + 0.02 * static_cast<double>(seed), 0.2);
    const auto cert = certify_stepsize(inst.prob, inst.sens);
    for (int k = 0; k < 1000; ++k, ++samples) {
      const Vector z = random_state(inst.prob, inst.sens, rng, 5.0).stacked();
      const Vector w = random_state(inst.prob, inst.sens, rng, 5.0).stacked();
      const Vector dT = saddle_operator(inst.prob, inst.sens, z) - saddle_operator(inst.prob, inst.sens, w);
      const Vector dz = z - w;
      ASSERT_GE(dT.dot(dz), cert.M * dz.squaredNorm() - 1e-12);
      ASSERT_LE(dT.norm(), cert.L * dz.norm() + 1e-12);
    }
  }
  EXPECT_EQ(samples, 10000);
}

TEST(SaddleOracle, InteriorInstanceHitsSeparableMinimum) {
  auto inst = make_instance(random_tree(6, 11), 11, 0.1, 0.2, 5.0);
  inst.prob.v_min.setConstant(0.5);
  inst.prob.v_max.setConstant(1.5);
  const auto z = saddle_point_oracle(inst.prob, inst.sens);
  EXPECT_EQ(z.mu_lo.lpNorm<Eigen::Infinity>(), 0.0);
  EXPECT_EQ(z.mu_hi.lpNorm<Eigen::Infinity>(), 0.0);
  // Closed form: p_i = t_i + s / c_i with s = alpha (P0 - P0_target).
  double inv = 0.0, targets = 0.0;
  for (const auto& d : inst.prob.devices) {
    inv += 1.0 / d.cost_p;
    targets += d.p_target;
  }
  const auto& pr = inst.prob;
  const double s = pr.alpha * (-pr.inelastic_load - targets - pr.p0_target) / (1.0 + pr.alpha * inv);
  for (Eigen::Index i = 0; i < 6; ++i) {
    const auto& d = pr.devices[static_cast<std::size_t>(i)];
    EXPECT_NEAR(z.p[i], d.p_target + s / d.cost_p, 1e-8);
    EXPECT_NEAR(z.q[i], d.q_target, 1e-8);
  }
}

TEST(SaddleOracle, SymmetricInstanceIsSymmetric) {
  FeederModel m(2, {{0, 1, 0.05, 0.05}, {0, 2, 0.05, 0.05}});
  m.p_nominal.setConstant(-0.6);
  m.q_nominal.setConstant(-0.3);
  OpfProblem prob;
  for (int i = 0; i < 2; ++i) prob.devices.push_back({0.5, 0.5, 0.0, 0.0, {-0.2, 0.2, -0.2, 0.2}});
  prob.v_min.setConstant(2, 0.95);
  prob.v_max.setConstant(2, 1.05);
  prob.phi = 0.05;
  prob.alpha = 0.1;
  prob.inelastic_load = m.p_nominal.sum();
  const auto sens = build_sensitivity(m);
  const auto z = saddle_point_oracle(prob, sens);
  EXPECT_NEAR(z.p[0], z.p[1], 1e-9);
  EXPECT_NEAR(z.q[0], z.q[1], 1e-9);
  EXPECT_NEAR(z.mu_lo[0], z.mu_lo[1], 1e-9);
}

TEST(SaddleOracle, UndervoltageChainActivatesLowerDuals) {
  const auto inst = testing::undervoltage_chain(0.01, 0.5);
  const auto z = saddle_point_oracle(inst.prob, inst.sens);
  EXPECT_GT(z.mu_lo.maxCoeff(), 0.0);
  // Complementarity of the regularized optimum: phi mu_lo = max(0, v_min - v).
  const Vector gap = (inst.prob.v_min - z.v).cwiseMax(0.0) - inst.prob.phi * z.mu_lo;
  EXPECT_LE(gap.lpNorm<Eigen::Infinity>(), 1e-8);
  EXPECT_LE(natural_residual(inst.prob, inst.sens, z.stacked()), 1e-8);
}

TEST(SaddleOracle, EliminationRouteAgrees) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    auto inst = make_instance(random_tree(8, seed), seed, 0.05, 0.1, 0.05, 4.0);
    const auto a = saddle_point_oracle(inst.prob, inst.sens);
    const auto b = eliminated_saddle_point(inst.prob, inst.sens);
    EXPECT_LE((a.stacked() - b.stacked()).lpNorm<Eigen::Infinity>(), 1e-7) << "seed " << seed;
    EXPECT_LE(natural_residual(inst.prob, inst.sens, b.stacked()), 1e-8) << "seed " << seed;
  }
}

TEST(PrimalDualMap, CertifiedStepContractsTowardSaddlePoint) {
  auto inst = make_instance(random_tree(10, 12), 12, 0.1, 0.1, 0.05, 4.0);
  const auto star = saddle_point_oracle(inst.prob, inst.sens, {1e-13});
  const auto cert = certify_stepsize(inst.prob, inst.sens);
  const double eps = cert.step(0.9);
  Vector z = initial_state(inst.prob, inst.sens).stacked();
  double dist = (z - star.stacked()).norm();
  for (int t = 0; t < 20000 && dist > 1e-9; ++t) {
    z = project_feasible(inst.prob, z - eps * saddle_operator(inst.prob, inst.sens, z));
    const double next = (z - star.stacked()).norm();
    ASSERT_LE(next, dist * (1 + 1e-12)) << "t = " << t;
    ASSERT_LE(next, std::sqrt(cert.contraction(eps)) * dist + 1e-11) << "t = " << t;
    dist = next;
  }
}

}  // namespace
}  // namespace hdvr
