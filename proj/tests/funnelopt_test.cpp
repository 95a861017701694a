#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "funnel/funnelopt.hpp"
#include "funnel/linalg.hpp"
#include "funnel/pipeline.hpp"
#include "oracles.hpp"

namespace funnel {
namespace {

Matrix m1(double x) { return Matrix::Constant(1, 1, x); }

NodeLmiData scalar_node(double a, double b, double f) {
  return {m1(a), m1(b), m1(f), Matrix::Zero(1, 0), Matrix::Zero(0, 1), Matrix::Zero(0, 1),
          Matrix::Zero(0, 1)};
}

// x+ = a x + b u + f w on N intervals with no nonlinearity.
FunnelProblem scalar_chain(int N, double a, double b, double f, double alpha) {
  FunnelProblem p;
  for (int k = 0; k < N; ++k) {
    DiscreteNode node{m1(a), m1(b), m1(f), Vector::Zero(1), Vector::Zero(1)};
    p.lin.nodes.push_back(node);
  }
  p.E = Matrix::Zero(1, 0);
  p.C = Matrix::Zero(0, 1);
  p.D = Matrix::Zero(0, 1);
  p.G = Matrix::Zero(0, 1);
  p.gamma.assign(N, 0.0);
  p.alpha = alpha;
  p.trust_weight = 0.0;
  return p;
}

NodeLmiData node_data(const FunnelProblem& p, int k) {
  const DiscreteNode& n = p.lin.nodes[k];
  return {n.A, n.B, n.F, p.E, p.C, p.D, p.G};
}

double leading_minor(const Matrix& M, int size) {
  return M.topLeftCorner(size, size).determinant();
}

TEST(NodeLmi, ScalarExampleHasHandMinors) {
  const Matrix M = node_lmi_value(scalar_node(0.5, 0.0, 0.1), m1(1), m1(1), m1(0), 0.0, 0.9,
                                  0.5, 1.0);
  Matrix expected(3, 3);
  expected << 0.4, 0, 0.5, 0, 0.5, 0.1, 0.5, 0.1, 1;
  ASSERT_EQ(M.rows(), 3);
  EXPECT_LT((M - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(leading_minor(M, 1), 0.4, 1e-15);
  EXPECT_NEAR(leading_minor(M, 2), 0.2, 1e-15);
  EXPECT_NEAR(leading_minor(M, 3), 0.071, 1e-15);
  EXPECT_GT(min_eigenvalue(M), 0.0);
}

TEST(NodeLmi, AffineInDecisionVariables) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  auto rnd = [&](int r, int c) { return Matrix(Matrix::NullaryExpr(r, c, [&] { return normal(rng); })); };
  const NodeLmiData d{rnd(3, 3), rnd(3, 2), rnd(3, 2), rnd(3, 2), rnd(2, 3), rnd(2, 2), rnd(2, 2)};
  const Matrix Q = symmetrize(rnd(3, 3)), Qn = symmetrize(rnd(3, 3)), Y = rnd(2, 3);
  const double nu = 0.7;
  auto value = [&](double s) {
    return node_lmi_value(d, s * Q, s * Qn, s * Y, s * nu, 0.9, 0.3, 0.8);
  };
  // F, G and lambda_w I are constant blocks; everything else scales
  EXPECT_LT((value(2.0) - (2.0 * value(1.0) - value(0.0))).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((value(-1.5) - (value(0.0) - 1.5 * (value(1.0) - value(0.0)))).cwiseAbs().maxCoeff(),
            1e-12);
}

TEST(NodeLmi, AssembledBlockMatchesNumericValue) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> normal;
  auto rnd = [&](int r, int c) { return Matrix(Matrix::NullaryExpr(r, c, [&] { return normal(rng); })); };
  const NodeLmiData d{rnd(3, 3), rnd(3, 2), rnd(3, 2), rnd(3, 2), rnd(2, 3), rnd(2, 2), rnd(2, 2)};
  ConeProgram p;
  NodeLmiVars v{SymMatrixVar::add(p, 3), SymMatrixVar::add(p, 3), DenseMatrixVar::add(p, 2, 3),
                p.add_variables(1)};
  Vector x(p.num_variables());
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = normal(rng);
  const AffineSymMatrix lmi = build_node_lmi(d, v, 0.95, 0.2, 1.3);
  const Matrix expected = node_lmi_value(d, v.Q.value(x), v.Q_next.value(x), v.Y.value(x),
                                         x(v.nu_p), 0.95, 0.2, 1.3);
  EXPECT_LT((lmi.evaluate(x) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(NodeLmi, SmallGammaClampedWithWarning) {
  ConeProgram p;
  NodeLmiVars v{SymMatrixVar::add(p, 1), SymMatrixVar::add(p, 1), DenseMatrixVar::add(p, 1, 1),
                p.add_variables(1)};
  const NodeLmiData d{m1(1), m1(1), m1(1), m1(1), m1(1), m1(0), m1(0)};
  std::string warning;
  build_node_lmi(d, v, 0.9, 0.5, 0.0, &warning);
  EXPECT_FALSE(warning.empty());
  warning.clear();
  build_node_lmi(d, v, 0.9, 0.5, 0.5, &warning);
  EXPECT_TRUE(warning.empty());
}

TEST(NodeLmi, ImplicationHoldsForFeasibleNodes) {
  // unicycle nodes around the straight-line guess, made feasible by the SDP
  std::mt19937_64 rng(10);
  const RunConfig cfg = RunConfig::unicycle_benchmark();
  const ModelPtr model = make_model("unicycle");
  const InitialGuess guess = initial_guess(cfg, *model);
  const Trajectory& t = guess.trajectory;
  FunnelProblem p = FunnelProblem::from_model(
      *model, discretize_trajectory(*model, t.times, t.states, t.inputs));
  p.gamma.assign(p.intervals(), 0.05);
  p.trust_weight = 0.0;
  const FunnelSolution s = solve_funnel_sdp(p, 0.3 * p.alpha);
  for (int k = 0; k < p.intervals(); ++k) {
    const oracle::StepMatrices m = oracle::closed_step(node_data(p, k), s.funnel.K[k]);
    const oracle::ImplicationResult r = oracle::lyapunov_implication(
        m, s.funnel.Q[k], s.funnel.Q[k + 1], p.gamma[k], p.alpha, 10000, rng);
    EXPECT_EQ(r.violations, 0) << "node " << k << " worst " << r.worst;
  }
}

TEST(FunnelSdp, StableScalarChainPassesImplication) {
  FunnelProblem p = scalar_chain(10, 0.5, 0.0, 0.1, 0.9);
  const FunnelSolution s = solve_funnel_sdp(p, 0.5);
  std::mt19937_64 rng(4);
  for (int k = 0; k < p.intervals(); ++k) {
    EXPECT_GE(s.funnel.Q[k](0, 0) - kPsdMargin, -1e-7);
    const oracle::ImplicationResult r = oracle::lyapunov_implication(
        oracle::closed_step(node_data(p, k), s.funnel.K[k]), s.funnel.Q[k], s.funnel.Q[k + 1],
        0.0, p.alpha, 10000, rng);
    EXPECT_EQ(r.violations, 0) << "node " << k;
  }
  // away from the free initial node the shapes settle to a constant
  EXPECT_NEAR(s.funnel.Q[9](0, 0), s.funnel.Q[10](0, 0), 1e-2 * s.funnel.Q[10](0, 0));
}

TEST(FunnelSdp, BoundarySetsRespected) {
  FunnelProblem p = scalar_chain(8, 1.1, 1.0, 0.1, 0.95);
  p.Q_initial = m1(0.04);
  p.Q_final = m1(0.09);
  const FunnelSolution s = solve_funnel_sdp(p, 0.4);
  EXPECT_GE(min_eigenvalue(s.funnel.Q.front() - p.Q_initial), -1e-7);
  EXPECT_GE(min_eigenvalue(p.Q_final - s.funnel.Q.back()), -1e-7);
}

TEST(FunnelSdp, InputEllipsoidBoundedByMu) {
  const RunConfig cfg = RunConfig::unicycle_benchmark();
  const ModelPtr model = make_model("unicycle");
  const InitialGuess guess = initial_guess(cfg, *model);
  const Trajectory& t = guess.trajectory;
  FunnelProblem p = FunnelProblem::from_model(
      *model, discretize_trajectory(*model, t.times, t.states, t.inputs));
  p.gamma.assign(p.intervals(), 0.05);
  p.reference = guess.funnel;
  // zero speed on the guess leaves the cross-track position uncontrollable, so
  // no final set could be reached here
  const FunnelSolution s = solve_funnel_sdp(p, 0.1 * p.alpha);
  std::mt19937_64 rng(12);
  for (int k = 0; k < p.intervals(); ++k) {
    const Matrix& Q = s.funnel.Q[k];
    const Matrix& K = s.funnel.K[k];
    EXPECT_LT((K * Q - s.funnel.Y[k]).cwiseAbs().maxCoeff(), 1e-8);
    const Matrix KQK = K * Q * K.transpose();
    EXPECT_LE(max_eigenvalue(KQK - s.mu[k] * Matrix::Identity(2, 2)), 1e-7) << "node " << k;
    // eta in E_Q maps into E_{K Q K'}
    const Matrix root = sqrtm_psd(Q);
    const Matrix pinv = pseudo_inverse(KQK);
    for (int i = 0; i < 1000; ++i) {
      const Vector xi = K * (root * sample_unit_sphere(rng, 3));
      EXPECT_LE(xi.dot(pinv * xi), 1.0 + 1e-9);
    }
  }
}

TEST(FunnelSdp, ShapesAboveFloorAndGainsConsistent) {
  FunnelProblem p = scalar_chain(5, 1.2, 1.0, 0.2, 0.9);
  const FunnelSolution s = solve_funnel_sdp(p, 0.3);
  s.funnel.check();
  for (int k = 0; k <= p.intervals(); ++k) {
    EXPECT_GT(min_eigenvalue(s.funnel.Q[k]), 0.0);
    EXPECT_GE(min_eigenvalue(s.funnel.Q[k]) - kPsdMargin, -1e-7);
  }
  for (int k = 0; k < p.intervals(); ++k) {
    EXPECT_NEAR(s.funnel.K[k](0, 0) * s.funnel.Q[k](0, 0), s.funnel.Y[k](0, 0), 1e-8);
  }
}

TEST(GridSearch, PicksSmallestObjectiveAmongCandidates) {
  const FunnelProblem p = scalar_chain(6, 0.8, 1.0, 0.1, 0.9);
  const std::vector<double> grid{0.3, 0.5, 0.7};
  const FunnelSolution best = lambda_w_grid_search(p, grid);
  ASSERT_EQ(best.candidate_objectives.size(), grid.size());
  double oracle_best = std::numeric_limits<double>::infinity();
  double oracle_lw = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const FunnelSolution one = solve_funnel_sdp(p, grid[i]);
    EXPECT_NEAR(best.candidate_objectives[i], one.objective, 1e-12);
    if (one.objective < oracle_best) {
      oracle_best = one.objective;
      oracle_lw = grid[i];
    }
  }
  EXPECT_EQ(best.lambda_w, oracle_lw);
  EXPECT_NEAR(best.objective, oracle_best, 1e-12);
}

TEST(GridSearch, SingleCandidateEqualsDirectSolve) {
  const FunnelProblem p = scalar_chain(4, 0.8, 1.0, 0.1, 0.9);
  const FunnelSolution a = lambda_w_grid_search(p, {0.45});
  const FunnelSolution b = solve_funnel_sdp(p, 0.45);
  EXPECT_EQ(a.objective, b.objective);
  for (int k = 0; k <= 4; ++k) EXPECT_EQ(a.funnel.Q[k], b.funnel.Q[k]);
}

TEST(GridSearch, EmptyOrOutOfRangeGridRejected) {
  const FunnelProblem p = scalar_chain(3, 0.8, 1.0, 0.1, 0.9);
  EXPECT_THROW(lambda_w_grid_search(p, {}), ContractViolation);
  EXPECT_THROW(lambda_w_grid_search(p, {0.95}), ContractViolation);
}

TEST(GridSearch, AllInfeasibleIsAnError) {
  // boundary sets that no contraction can honour
  FunnelProblem p = scalar_chain(3, 2.0, 0.0, 1.0, 0.9);
  p.Q_initial = m1(1.0);
  p.Q_final = m1(0.01);
  EXPECT_THROW(lambda_w_grid_search(p, {0.3, 0.6}), SolveError);
}

TEST(Funnel, FromGainsFillsYAndBeta) {
  const Funnel f = Funnel::from_gains({m1(2.0), m1(3.0)}, {m1(-0.5)});
  EXPECT_EQ(f.Y[0](0, 0), -1.0);
  EXPECT_EQ(f.beta, (std::vector<double>{1.0, 1.0}));
  EXPECT_NEAR(gain_from(f.Y[0], f.Q[0])(0, 0), -0.5, 1e-15);
}

}  // namespace
}  // namespace funnel
