#include <random>

#include <gtest/gtest.h>

#include "funnel/linalg.hpp"
#include "funnel/pipeline.hpp"
#include "funnel/support.hpp"
#include "oracles.hpp"

namespace funnel {
namespace {

Matrix m1(double x) { return Matrix::Constant(1, 1, x); }

SupportNodeData scalar_support(double a, double f) {
  SupportNodeData d;
  d.A_cl = m1(a);
  d.F = m1(f);
  d.E = Matrix::Zero(1, 0);
  d.C_cl = Matrix::Zero(0, 1);
  d.G = Matrix::Zero(0, 1);
  d.Q = m1(1);
  d.Q_next = m1(1);
  return d;
}

Matrix diag2(double a, double b) {
  Matrix M = Matrix::Zero(2, 2);
  M.diagonal() << a, b;
  return M;
}

TEST(AssembleS, ScalarHandAssembly) {
  const SupportMatrices S = assemble_S(scalar_support(0.5, 0.5));
  EXPECT_LT((S.S0 - Matrix::Constant(2, 2, 0.25)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(S.S1, diag2(1, 0));
  EXPECT_EQ(S.S3, diag2(0, 1));
  EXPECT_EQ(S.S2, Matrix::Zero(2, 2));
}

TEST(AssembleS, ZeroGainAndOutputLeaveOnlyTheDisturbanceTerm) {
  SupportNodeData d;
  d.A_cl = Matrix::Identity(2, 2);
  d.E = Matrix::Identity(2, 1);
  d.F = Matrix::Identity(2, 1);
  d.C_cl = Matrix::Zero(1, 2);
  d.G = m1(0.5);
  d.Q = Matrix::Identity(2, 2);
  d.Q_next = Matrix::Identity(2, 2);
  d.gamma = 2.0;
  const SupportMatrices S = assemble_S(d);
  // y = (eta[2], dp, w)
  EXPECT_EQ(S.S2.topRows(2), Matrix::Zero(2, 4));
  EXPECT_EQ(S.S2.leftCols(2), Matrix::Zero(4, 2));
  EXPECT_DOUBLE_EQ(S.S2(2, 2), 1.0);
  EXPECT_DOUBLE_EQ(S.S2(3, 3), -4.0 * 0.25);
  EXPECT_DOUBLE_EQ(S.S2(2, 3), 0.0);
}

TEST(AssembleS, GramMatrixIsPsdOnRandomNodes) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  auto rnd = [&](int r, int c) { return Matrix(Matrix::NullaryExpr(r, c, [&] { return normal(rng); })); };
  for (int i = 0; i < 50; ++i) {
    SupportNodeData d;
    d.A_cl = rnd(3, 3);
    d.E = rnd(3, 2);
    d.F = rnd(3, 2);
    d.C_cl = rnd(2, 3);
    d.G = rnd(2, 2);
    const Matrix R = rnd(3, 3), P = rnd(3, 3);
    d.Q = R * R.transpose() + 0.1 * Matrix::Identity(3, 3);
    d.Q_next = P * P.transpose() + 0.1 * Matrix::Identity(3, 3);
    d.gamma = 0.3;
    const SupportMatrices S = assemble_S(d);
    EXPECT_GE(min_eigenvalue(S.S0), -1e-10 * std::max(1.0, S.S0.norm()));
    EXPECT_GE(min_eigenvalue(S.S1), -1e-12);
    EXPECT_GE(min_eigenvalue(S.S3), 0.0);
  }
}

TEST(SupportDual, AnalyticScalarCase) {
  const SupportDual r = solve_support_dual(assemble_S(scalar_support(0.5, 0.5)));
  EXPECT_NEAR(r.beta_hat, 1.0, 1e-6);
  EXPECT_NEAR(r.lambda1, 0.5, 1e-6);
  EXPECT_NEAR(r.lambda3, 0.5, 1e-6);
  EXPECT_LE(r.residual, 1e-7);
}

TEST(SupportDual, NothingReachableGivesZero) {
  const SupportDual r = solve_support_dual(assemble_S(scalar_support(0.0, 0.0)));
  EXPECT_NEAR(r.beta_hat, 0.0, 1e-7);
}

TEST(SupportDual, DominatesSampledPrimalOnScalarCase) {
  const SupportNodeData d = scalar_support(0.5, 0.5);
  const SupportDual r = solve_support_dual(assemble_S(d));
  std::mt19937_64 rng(8);
  const double primal = oracle::support_primal_max(d, 100000, rng);
  EXPECT_LE(primal, r.beta_hat + 1e-8);
  EXPECT_GE(primal, 0.95 * r.beta_hat);
}

TEST(SupportDual, DominatesSampledPrimalOnUnicycleNodes) {
  const RunConfig cfg = RunConfig::unicycle_benchmark();
  const ModelPtr model = make_model("unicycle");
  const InitialGuess guess = initial_guess(cfg, *model);
  const Trajectory& t = guess.trajectory;
  const DiscreteLinearization lin = discretize_trajectory(*model, t.times, t.states, t.inputs);
  const Decomposition& dec = model->decomposition();
  std::mt19937_64 rng(15);
  for (int k = 0; k < lin.size(); k += 7) {
    SupportNodeData d;
    d.A_cl = lin.nodes[k].A + lin.nodes[k].B * guess.funnel.K[k];
    d.E = dec.E;
    d.F = lin.nodes[k].F;
    d.C_cl = dec.C + dec.D * guess.funnel.K[k];
    d.G = dec.G;
    d.Q = guess.funnel.Q[k];
    d.Q_next = guess.funnel.Q[k + 1];
    d.gamma = 0.05;
    const SupportDual r = solve_support_dual(assemble_S(d));
    const double primal = oracle::support_primal_max(d, 100000, rng);
    EXPECT_LE(primal, r.beta_hat + 1e-8) << "node " << k;
    EXPECT_GT(primal, 0.0);
  }
}

TEST(BetaRecursion, HandExamples) {
  const BetaSequence a = beta_recursion({0.5, 0.3}, 0.9);
  ASSERT_EQ(a.beta.size(), 3u);
  EXPECT_EQ(a.beta[0], 1.0);
  EXPECT_EQ(a.beta[1], 0.5);
  EXPECT_DOUBLE_EQ(a.beta[2], 0.45);

  const BetaSequence b = beta_recursion({1.0, 1.0, 1.0}, 1.0);
  for (double v : b.beta) EXPECT_EQ(v, 1.0);

  const BetaSequence c = beta_recursion({2.0, 0.1, 0.1}, 0.5);
  EXPECT_EQ(c.beta, (std::vector<double>{1.0, 2.0, 1.0, 0.5}));
}

TEST(BetaRecursion, SplitComputationMatchesOneShot) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(0.0, 1.5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> bh(30);
    for (double& v : bh) v = u(rng);
    const BetaSequence whole = beta_recursion(bh, 0.93);
    const int cut = 1 + trial % 28;
    const BetaSequence head =
        beta_recursion(std::vector<double>(bh.begin(), bh.begin() + cut), 0.93);
    const std::vector<double> tail = continue_beta_recursion(
        head.beta.back(), std::vector<double>(bh.begin() + cut, bh.end()), 0.93);
    std::vector<double> joined = head.beta;
    joined.insert(joined.end(), tail.begin(), tail.end());
    EXPECT_EQ(joined, whole.beta);
  }
}

TEST(BetaRecursion, BoundedHatsGiveBoundedBetas) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> bh(25);
    for (double& v : bh) v = u(rng);
    for (double b : beta_recursion(bh, 0.99).beta) EXPECT_LE(b, 1.0);
  }
}

TEST(BetaRecursion, InvalidAlphaRejected) {
  EXPECT_THROW(beta_recursion({0.5}, 0.0), ContractViolation);
  EXPECT_THROW(beta_recursion({0.5}, 1.5), ContractViolation);
  EXPECT_THROW(beta_recursion({}, 0.5), ContractViolation);
}

Funnel identity_funnel(int N) {
  return Funnel::from_gains(std::vector<Matrix>(N + 1, Matrix::Identity(2, 2)),
                            std::vector<Matrix>(N, Matrix::Ones(1, 2)));
}

TEST(SupportScaling, UnitBetasLeaveFunnelUnchanged) {
  const Funnel f = identity_funnel(3);
  const Funnel g = apply_support_scaling(f, {1, 1, 1, 1});
  for (int k = 0; k <= 3; ++k) EXPECT_EQ(g.Q[k], f.Q[k]);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(g.K[k], f.K[k]);
    EXPECT_EQ(g.Y[k], f.Y[k]);
  }
}

TEST(SupportScaling, FactorFourDoublesRadius) {
  const Funnel f = identity_funnel(1);
  const Vector eta = Vector::Constant(2, std::sqrt(2.0));  // |eta| = 2
  EXPECT_NEAR(eta.dot(inverse_spd(f.Q[0]) * eta), 4.0, 1e-14);
  const Funnel g = apply_support_scaling(f, {4.0, 4.0});
  EXPECT_NEAR(eta.dot(inverse_spd(g.Q[0]) * eta), 1.0, 1e-14);
  EXPECT_EQ(g.K[0], f.K[0]);
  EXPECT_LT((g.Y[0] - g.K[0] * g.Q[0]).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(g.beta, (std::vector<double>{1.0, 1.0}));
}

TEST(SupportScaling, NegativeBetaRejected) {
  EXPECT_THROW(apply_support_scaling(identity_funnel(1), {1.0, -0.1}), ContractViolation);
  EXPECT_THROW(apply_support_scaling(identity_funnel(1), {1.0}), ContractViolation);
}

}  // namespace
}  // namespace funnel
