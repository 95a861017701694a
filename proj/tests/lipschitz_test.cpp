#include <cmath>
#include <random>

#include <Eigen/LU>
#include <Eigen/SVD>
#include <gtest/gtest.h>

#include "funnel/lipschitz.hpp"
#include "funnel/linalg.hpp"
#include "funnel/pipeline.hpp"

namespace funnel {
namespace {

Vector scalar(double x) { return Vector::Constant(1, x); }

TEST(SampleFunnel, UnitShapeGivesUnitNorm) {
  for (const FunnelSample& s : sample_funnel(Matrix::Identity(2, 2), 2, 200, 3)) {
    EXPECT_NEAR(s.eta.norm(), 1.0, 1e-14);
    EXPECT_LE(s.w.norm(), 1.0);
  }
}

TEST(SampleFunnel, SamplesLieOnEllipsoidSurface) {
  Matrix Q = Matrix::Zero(2, 2);
  Q.diagonal() << 4.0, 1.0;
  const Matrix Qi = Q.inverse();
  for (const FunnelSample& s : sample_funnel(Q, 2, 500, 9)) {
    EXPECT_NEAR(s.eta.dot(Qi * s.eta), 1.0, 1e-10);
  }
}

TEST(SampleFunnel, FixedSeedIsReproducible) {
  const Matrix Q = Matrix::Identity(3, 3) * 0.3;
  const auto a = sample_funnel(Q, 2, 50, 42);
  const auto b = sample_funnel(Q, 2, 50, 42);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].eta, b[i].eta);
    EXPECT_EQ(a[i].w, b[i].w);
  }
}

TEST(SampleFunnel, BallSamplesFillTheBall) {
  std::mt19937_64 rng(1);
  int inner = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) inner += sample_unit_ball(rng, 2).norm() < std::sqrt(0.5);
  // half of the disc area lies inside radius 1/sqrt(2)
  EXPECT_NEAR(static_cast<double>(inner) / n, 0.5, 0.02);
}

TEST(DeltaDirect, SineAtOne) {
  const PMap p = [](const Vector& q) { return Vector(q.array().sin()); };
  const auto d = delta_direct(p, scalar(0.0), scalar(1.0));
  ASSERT_TRUE(d.has_value());
  EXPECT_NEAR(*d, std::sin(1.0), 1e-15);
}

TEST(DeltaDirect, AffineMapBoundedByOperatorNorm) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  Matrix M(3, 2);
  for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] = normal(rng);
  const Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullV);
  const double norm = svd.singularValues()(0);
  const PMap p = [M](const Vector& q) -> Vector { return M * q; };
  const Vector q_bar = Vector::Random(2);
  for (int i = 0; i < 1000; ++i) {
    const Vector q = q_bar + sample_unit_ball(rng, 2);
    const auto d = delta_direct(p, q_bar, q);
    if (d) EXPECT_LE(*d, norm * (1 + 1e-12));
  }
  const auto top = delta_direct(p, q_bar, q_bar + 0.3 * svd.matrixV().col(0));
  ASSERT_TRUE(top.has_value());
  EXPECT_NEAR(*top, norm, 1e-12);
}

TEST(DeltaDirect, CoincidentPointDiscarded) {
  const PMap p = [](const Vector& q) { return q; };
  EXPECT_FALSE(delta_direct(p, scalar(2.0), scalar(2.0)).has_value());
}

NodeClosedLoop scalar_loop() {
  NodeClosedLoop cl;
  cl.A_cl = Matrix::Zero(1, 1);
  cl.C_cl = Matrix::Ones(1, 1);
  cl.F = Matrix::Zero(1, 1);
  cl.G = Matrix::Zero(1, 1);
  cl.E = Matrix::Ones(1, 1);
  cl.E_pinv = Matrix::Ones(1, 1);
  return cl;
}

TEST(DeltaIndirect, ExactLinearStepGivesZero) {
  NodeClosedLoop cl = scalar_loop();
  cl.A_cl(0, 0) = 0.7;
  const auto d = delta_indirect(cl, scalar(0.5), scalar(0.0), scalar(0.35));
  ASSERT_TRUE(d.has_value());
  EXPECT_NEAR(*d, 0.0, 1e-15);
}

TEST(DeltaIndirect, ScalarMinimumNorm) {
  // residual r = 0.2, v = 0.5
  const auto d = delta_indirect(scalar_loop(), scalar(0.5), scalar(0.0), scalar(0.2));
  ASSERT_TRUE(d.has_value());
  EXPECT_NEAR(*d, 0.4, 1e-15);
}

TEST(DeltaIndirect, DegenerateDirectionDiscarded) {
  EXPECT_FALSE(delta_indirect(scalar_loop(), scalar(0.0), scalar(0.0), scalar(0.0)).has_value());
}

TEST(DeltaIndirect, ResidualOutsideRangeRejected) {
  NodeClosedLoop cl;
  cl.A_cl = Matrix::Zero(2, 2);
  cl.C_cl = Matrix::Identity(1, 2);
  cl.F = Matrix::Zero(2, 1);
  cl.G = Matrix::Zero(1, 1);
  cl.E = (Matrix(2, 1) << 1, 0).finished();
  cl.E_pinv = pseudo_inverse(cl.E);
  EXPECT_THROW(delta_indirect(cl, Vector::Ones(2), scalar(0.0), Vector::Unit(2, 1)),
               NumericalError);
}

TEST(EstimateGamma, MaximumAndSafetyFactor) {
  EXPECT_DOUBLE_EQ(estimate_gamma({{0.1, 0.5, 0.3}}, 1.0).gamma[0], 0.5);
  EXPECT_NEAR(estimate_gamma({{0.1, 0.5, 0.3}}, 1.1).gamma[0], 0.55, 1e-15);
}

TEST(EstimateGamma, EmptyNodeRejected) {
  EXPECT_THROW(estimate_gamma({{0.2}, {}}, 1.0), NumericalError);
}

TEST(EstimateGamma, SquareOnIntervalApproachesAnalyticConstant) {
  // phi(q) = q^2 around qbar = 1 on [0, 2]: sup |q + qbar| = 3
  const PMap p = [](const Vector& q) { return Vector(q.array().square()); };
  auto estimate = [&](int count) {
    std::mt19937_64 rng(13);
    std::vector<double> ratios;
    for (int s = 0; s < count; ++s) {
      if (auto d = delta_direct(p, scalar(1.0), scalar(1.0) + sample_unit_ball(rng, 1))) {
        ratios.push_back(*d);
      }
    }
    return estimate_gamma({ratios}, 1.0).gamma[0];
  };
  const double g10 = estimate(10), g1000 = estimate(1000);
  EXPECT_LE(g1000, 3.0);
  EXPECT_GE(g1000, 0.95 * 3.0);
  EXPECT_LE(g10, g1000);
}

struct UnicycleNodes {
  RunConfig cfg = RunConfig::unicycle_benchmark();
  ModelPtr model = make_model("unicycle");
  InitialGuess guess;
  DiscretizationOptions disc;
  DiscreteLinearization lin;

  explicit UnicycleNodes(DiscretizationMethod method) {
    guess = initial_guess(cfg, *model);
    disc.method = method;
    const Trajectory& t = guess.trajectory;
    lin = discretize_trajectory(*model, t.times, t.states, t.inputs, disc);
  }

  LipschitzEstimate estimate(LipschitzMethod method, int samples, double kappa = 1.0) const {
    LipschitzOptions o;
    o.method = method;
    o.samples = samples;
    o.safety_factor = kappa;
    o.seed = 77;
    const Trajectory& t = guess.trajectory;
    return estimate_lipschitz(*model, t.times, t.states, t.inputs, lin, guess.funnel.Q,
                              guess.funnel.K, o, disc);
  }
};

TEST(EstimateLipschitz, DirectAndIndirectAgreeUnderEulerSteps) {
  const UnicycleNodes u(DiscretizationMethod::kEuler);
  const LipschitzEstimate ind = u.estimate(LipschitzMethod::kIndirect, 100);
  const LipschitzEstimate dir = u.estimate(LipschitzMethod::kDirect, 100);
  ASSERT_EQ(ind.gamma.size(), dir.gamma.size());
  for (std::size_t k = 0; k < ind.gamma.size(); ++k) {
    EXPECT_GT(dir.gamma[k], 0.0);
    EXPECT_LE(std::abs(ind.gamma[k] - dir.gamma[k]), 0.1 * dir.gamma[k]) << "node " << k;
  }
}

TEST(EstimateLipschitz, NestedSampleSetsNeverDecrease) {
  const UnicycleNodes u(DiscretizationMethod::kRk4Zoh);
  const LipschitzEstimate a = u.estimate(LipschitzMethod::kIndirect, 10);
  const LipschitzEstimate b = u.estimate(LipschitzMethod::kIndirect, 40);
  const LipschitzEstimate c = u.estimate(LipschitzMethod::kIndirect, 160);
  for (std::size_t k = 0; k < a.gamma.size(); ++k) {
    EXPECT_LE(a.gamma[k], b.gamma[k]);
    EXPECT_LE(b.gamma[k], c.gamma[k]);
  }
}

TEST(EstimateLipschitz, SafetyFactorScalesAndRunsRepeat) {
  const UnicycleNodes u(DiscretizationMethod::kRk4Zoh);
  const LipschitzEstimate a = u.estimate(LipschitzMethod::kIndirect, 30, 1.0);
  const LipschitzEstimate b = u.estimate(LipschitzMethod::kIndirect, 30, 1.1);
  const LipschitzEstimate c = u.estimate(LipschitzMethod::kIndirect, 30, 1.1);
  for (std::size_t k = 0; k < a.gamma.size(); ++k) {
    EXPECT_NEAR(b.gamma[k], 1.1 * a.gamma[k], 1e-15);
    EXPECT_EQ(b.gamma[k], c.gamma[k]);
    EXPECT_GE(a.gamma[k], 0.0);
  }
}

TEST(EstimateLipschitz, LinearModelHasNothingToEstimate) {
  // with n_p = 0 every indirect sample has an empty v and is discarded
  const LinearModel m(Matrix::Identity(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1));
  const std::vector<double> t{0.0, 0.1};
  const std::vector<Vector> x{scalar(0), scalar(0)}, u{scalar(0)};
  const DiscreteLinearization lin = discretize_trajectory(m, t, x, u);
  LipschitzOptions o;
  o.samples = 5;
  EXPECT_THROW(estimate_lipschitz(m, t, x, u, lin, {Matrix::Ones(1, 1)}, {Matrix::Zero(1, 1)}, o),
               NumericalError);
}

}  // namespace
}  // namespace funnel
