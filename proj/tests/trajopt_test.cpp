#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "funnel/discretize.hpp"
#include "funnel/linalg.hpp"
#include "funnel/lipschitz.hpp"
#include "funnel/pipeline.hpp"
#include "funnel/trajopt.hpp"

namespace funnel {
namespace {

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

Matrix random_spd(std::mt19937_64& rng, int n, double scale) {
  std::normal_distribution<double> normal;
  Matrix M(n, n);
  for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] = normal(rng);
  return scale * (M * M.transpose() + 0.1 * Matrix::Identity(n, n));
}

TEST(Linearize, AffineConstraintIsItsOwnExpansion) {
  const ScalarConstraint h = affine_constraint("x1", vec({1, 0}), 4.0);
  const HalfSpace hs = linearize(h, vec({0, 0}));
  EXPECT_EQ(hs.a, vec({1, 0}));
  EXPECT_DOUBLE_EQ(hs.b, 4.0);
}

TEST(Linearize, AffineConstraintIdempotentAnywhere) {
  const ScalarConstraint h = affine_constraint("mix", vec({0.3, -2.0, 1.5}), -0.7);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  for (int i = 0; i < 20; ++i) {
    const Vector p = vec({normal(rng), normal(rng), normal(rng)}) * 10.0;
    const HalfSpace hs = linearize(h, p);
    EXPECT_LT((hs.a - vec({0.3, -2.0, 1.5})).norm(), 1e-15);
    EXPECT_NEAR(hs.b, -0.7, 1e-12);
  }
}

TEST(Linearize, EllipseObstacleHandGradient) {
  EllipseObstacle obs{vec({1, 2}), vec({1.5, 3.0})};
  const ScalarConstraint h = obstacle_constraint(obs, 3);
  const Vector P = vec({2 / 1.5, 2 / 3.0});
  // point with |P (r - c)| = 2 along the first axis
  const Vector r = vec({1 + 2 / P(0), 2, 0.3});
  const HalfSpace hs = linearize(h, r);
  Vector d = P.cwiseProduct(r.head(2) - obs.center);
  ASSERT_NEAR(d.norm(), 2.0, 1e-15);
  const Vector a_pos = -P.cwiseProduct(d) / 2.0;
  EXPECT_LT((hs.a.head(2) - a_pos).norm(), 1e-14);
  EXPECT_EQ(hs.a(2), 0.0);
  EXPECT_NEAR(hs.b, hs.a.dot(r) + 1.0, 1e-14);
}

TEST(Linearize, ConstraintGradientsMatchFiniteDifferences) {
  const ConstraintSet cs = make_constraints(RunConfig::unicycle_benchmark(), 3);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> pos(-1.0, 6.0), ang(-3.0, 3.0), inp(-5.0, 5.0);
  for (int i = 0; i < 100; ++i) {
    const Vector x = vec({pos(rng), pos(rng), ang(rng)});
    for (const ScalarConstraint& c : cs.state) {
      const Vector g = c.gradient(x);
      for (int j = 0; j < 3; ++j) {
        Vector e = Vector::Zero(3);
        e(j) = 1e-6;
        EXPECT_NEAR(g(j), (c.value(x + e) - c.value(x - e)) / 2e-6, 1e-5) << c.name;
      }
    }
    const Vector u = vec({inp(rng), inp(rng)});
    for (const ScalarConstraint& c : cs.input) {
      const Vector g = c.gradient(u);
      for (int j = 0; j < 2; ++j) {
        Vector e = Vector::Zero(2);
        e(j) = 1e-6;
        EXPECT_NEAR(g(j), (c.value(u + e) - c.value(u - e)) / 2e-6, 1e-5) << c.name;
      }
    }
  }
}

TEST(Linearize, NonFiniteGradientNamesConstraint) {
  ConstraintSet cs;
  cs.state.push_back(affine_constraint("fine", vec({1, 0}), 1.0));
  cs.state.push_back(ScalarConstraint{
      "broken", [](const Vector&) { return 0.0; },
      [](const Vector&) { return vec({std::nan(""), 0.0}); }});
  Trajectory ref;
  ref.times = {0.0, 1.0};
  ref.states = {vec({0, 0}), vec({1, 1})};
  ref.inputs = {vec({0})};
  try {
    linearize_constraints(cs, ref);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("broken"), std::string::npos);
  }
}

TEST(Tighten, IsotropicShapeShrinksByRadius) {
  const HalfSpace h{vec({0.6, 0.8}), 4.0};
  EXPECT_NEAR(tighten(h, 0.16 * Matrix::Identity(2, 2)), 3.6, 1e-14);
}

TEST(Tighten, ZeroShapeLeavesBound) {
  const HalfSpace h{vec({0.6, 0.8}), 4.0};
  EXPECT_EQ(tighten(h, Matrix::Zero(2, 2)), 4.0);
  EXPECT_EQ(tighten(h, Matrix::Identity(2, 2), Matrix::Zero(2, 2)), 4.0);
}

TEST(Tighten, IndefiniteShapeRejected) {
  const HalfSpace h{vec({1, 0}), 1.0};
  Matrix Q(2, 2);
  Q << 1, 0, 0, -1e-3;
  EXPECT_THROW(tighten(h, Q), ContractViolation);
}

TEST(Tighten, MonteCarloSupportFunction) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal;
  int violations = 0, checked = 0;
  for (int c = 0; c < 10; ++c) {
    const Matrix Q = random_spd(rng, 3, 0.2);
    const Matrix K = Matrix::NullaryExpr(2, 3, [&] { return normal(rng); });
    const HalfSpace hs{vec({normal(rng), normal(rng), normal(rng)}), normal(rng)};
    const HalfSpace hu{vec({normal(rng), normal(rng)}), normal(rng)};
    const double bs = tighten(hs, Q), bu = tighten(hu, Q, K);
    // nominal points sitting exactly on the tightened boundary
    const Vector xbar = hs.a * (bs / hs.a.squaredNorm());
    const Vector ubar = hu.a * (bu / hu.a.squaredNorm());
    const Matrix root = sqrtm_psd(Q);
    for (int s = 0; s < 1000; ++s) {
      const Vector eta = root * (s % 2 ? sample_unit_sphere(rng, 3) : sample_unit_ball(rng, 3));
      violations += hs.a.dot(xbar + eta) > hs.b + 1e-12;
      violations += hu.a.dot(ubar + K * eta) > hu.b + 1e-12;
      checked += 2;
    }
  }
  EXPECT_EQ(violations, 0) << "of " << checked;
}

TEST(Tighten, MonotoneInShape) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  for (int i = 0; i < 50; ++i) {
    const Matrix Q = random_spd(rng, 3, 0.5);
    const Matrix bigger = Q + random_spd(rng, 3, 0.1);
    const HalfSpace h{vec({normal(rng), normal(rng), normal(rng)}), normal(rng)};
    EXPECT_LE(tighten(h, bigger), tighten(h, Q));
  }
}

// Double integrator x+ = A x + B u on a fixed grid.
struct DoubleIntegrator {
  int N = 20;
  double h = 0.1;
  LinearModel model{(Matrix(2, 2) << 0, 1, 0, 0).finished(), (Matrix(2, 1) << 0, 1).finished(),
                    Matrix::Zero(2, 1)};
  ConstraintSet constraints;
  Trajectory reference;
  DiscreteLinearization lin;

  DoubleIntegrator() {
    constraints.x_initial = vec({0, 0});
    constraints.x_final = vec({1, 0});
    reference.times = uniform_grid(N, N * h);
    for (int k = 0; k <= N; ++k) {
      const double s = static_cast<double>(k) / N;
      reference.states.push_back(vec({s, 0.3 * std::sin(3.0 * s)}));
    }
    for (int k = 0; k < N; ++k) reference.inputs.push_back(vec({0.5 * std::cos(2.0 * k)}));
    lin = discretize_trajectory(model, reference.times, reference.states, reference.inputs);
  }
};

// Dense equality-constrained QP: min sum_k r u_k^2 + w (|x_k - xr_k|^2 +
// |u_k - ur_k|^2) over k < N subject to the dynamics and both boundary
// states, solved through its KKT system.
Trajectory dense_qp(const DoubleIntegrator& di, double input_weight, double trust_weight,
                    const Trajectory& ref) {
  const int N = di.N, nx = 2, nu = 1;
  const int nz = (N + 1) * nx + N * nu;
  const int neq = N * nx + 2 * nx;
  auto xi = [&](int k) { return k * nx; };
  auto ui = [&](int k) { return (N + 1) * nx + k * nu; };
  Matrix H = Matrix::Zero(nz, nz);
  Vector g = Vector::Zero(nz);
  for (int k = 0; k < N; ++k) {
    H.block(xi(k), xi(k), nx, nx) += 2 * trust_weight * Matrix::Identity(nx, nx);
    g.segment(xi(k), nx) -= 2 * trust_weight * ref.states[k];
    H(ui(k), ui(k)) += 2 * (input_weight + trust_weight);
    g(ui(k)) -= 2 * trust_weight * ref.inputs[k](0);
  }
  Matrix Aeq = Matrix::Zero(neq, nz);
  Vector beq = Vector::Zero(neq);
  for (int k = 0; k < N; ++k) {
    const DiscreteNode& d = di.lin.nodes[k];
    Aeq.block(k * nx, xi(k + 1), nx, nx) = Matrix::Identity(nx, nx);
    Aeq.block(k * nx, xi(k), nx, nx) = -d.A;
    Aeq.block(k * nx, ui(k), nx, nu) = -d.B;
    beq.segment(k * nx, nx) = d.z;
  }
  Aeq.block(N * nx, xi(0), nx, nx) = Matrix::Identity(nx, nx);
  beq.segment(N * nx, nx) = di.constraints.x_initial;
  Aeq.block(N * nx + nx, xi(N), nx, nx) = Matrix::Identity(nx, nx);
  beq.segment(N * nx + nx, nx) = di.constraints.x_final;

  Matrix KKT = Matrix::Zero(nz + neq, nz + neq);
  KKT.topLeftCorner(nz, nz) = H;
  KKT.topRightCorner(nz, neq) = Aeq.transpose();
  KKT.bottomLeftCorner(neq, nz) = Aeq;
  Vector rhs(nz + neq);
  rhs << -g, beq;
  const Vector sol = KKT.fullPivLu().solve(rhs);

  Trajectory t;
  t.times = ref.times;
  for (int k = 0; k <= N; ++k) t.states.push_back(sol.segment(xi(k), nx));
  for (int k = 0; k < N; ++k) t.inputs.push_back(sol.segment(ui(k), nu));
  return t;
}

double max_difference(const Trajectory& a, const Trajectory& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.states.size(); ++k)
    m = std::max(m, (a.states[k] - b.states[k]).lpNorm<Eigen::Infinity>());
  for (std::size_t k = 0; k < a.inputs.size(); ++k)
    m = std::max(m, (a.inputs[k] - b.inputs[k]).lpNorm<Eigen::Infinity>());
  return m;
}

// Solution error of a quadratic objective goes like the square root of the
// duality gap, so the oracle comparisons ask for a much smaller gap.
SolverSettings tight() {
  SolverSettings s;
  s.absolute_gap_tol = 1e-14;
  s.relative_gap_tol = 1e-14;
  return s;
}

TrajWeights di_weights() {
  TrajWeights w;
  w.state_cost = Matrix::Zero(2, 2);
  w.input_cost = Matrix::Identity(1, 1);
  return w;
}

TEST(TrajSocp, DoubleIntegratorMatchesDenseQp) {
  const DoubleIntegrator di;
  const TrajWeights w = di_weights();
  const TrajSolution sol = solve_traj_socp(di.reference, di.lin, {}, di.constraints, w, tight());
  const Trajectory oracle = dense_qp(di, 1.0, w.trust_region, di.reference);
  EXPECT_LT(max_difference(sol.trajectory, oracle), 1e-6);
  EXPECT_LT(sol.virtual_control_norm, 1e-6);
}

TEST(TrajSocp, OptimalReferenceIsFixedPoint) {
  const DoubleIntegrator di;
  const TrajWeights w = di_weights();
  DoubleIntegrator at_opt;
  at_opt.reference = dense_qp(di, 1.0, 0.0, di.reference);
  at_opt.lin = discretize_trajectory(at_opt.model, at_opt.reference.times,
                                     at_opt.reference.states, at_opt.reference.inputs);
  const TrajSolution sol =
      solve_traj_socp(at_opt.reference, at_opt.lin, {}, at_opt.constraints, w, tight());
  EXPECT_LT(sol.trust_region_cost, 1e-10);
  EXPECT_LT(sol.virtual_control_norm, 1e-7);
  EXPECT_LT(max_difference(sol.trajectory, at_opt.reference), 1e-6);
}

TEST(TrajSocp, ZeroFunnelEqualsPlainSubproblem) {
  DoubleIntegrator di;
  di.constraints.state.push_back(affine_constraint("speed", vec({0, 1}), 0.12));
  di.constraints.input.push_back(affine_constraint("push", vec({1}), 0.4));
  const TrajWeights w = di_weights();
  const TrajSolution plain = solve_traj_socp(di.reference, di.lin, {}, di.constraints, w);
  FunnelShape zero;
  zero.Q.assign(di.N + 1, Matrix::Zero(2, 2));
  zero.K.assign(di.N, Matrix::Zero(1, 2));
  const TrajSolution tightened = solve_traj_socp(di.reference, di.lin, zero, di.constraints, w);
  EXPECT_LT(max_difference(plain.trajectory, tightened.trajectory), 1e-9);
  for (int k = 0; k <= di.N; ++k) EXPECT_LE(plain.trajectory.states[k](1), 0.12 + 1e-7);
}

TEST(TrajSocp, UnicycleFirstIterationHonoursTightenedObstacles) {
  const RunConfig cfg = RunConfig::unicycle_benchmark();
  const ModelPtr model = make_model(cfg.model);
  const InitialGuess guess = initial_guess(cfg, *model);
  const ConstraintSet cs = make_constraints(cfg, 3);
  const Trajectory& ref = guess.trajectory;
  const DiscreteLinearization lin =
      discretize_trajectory(*model, ref.times, ref.states, ref.inputs, cfg.discretization);
  const FunnelShape shape{guess.funnel.Q, guess.funnel.K};
  const TrajSolution sol = solve_traj_socp(ref, lin, shape, cs, make_weights(cfg), cfg.solver);
  const LinearizedConstraints lc = linearize_constraints(cs, ref);
  for (int k = 0; k <= ref.intervals(); ++k) {
    for (const HalfSpace& h : lc.state[k]) {
      EXPECT_LE(h.a.dot(sol.trajectory.states[k]), tighten(h, guess.funnel.Q[k]) + 1e-7)
          << "node " << k;
    }
  }
  EXPECT_LT((sol.trajectory.states.front() - cs.x_initial).norm(), 1e-8);
  EXPECT_LT((sol.trajectory.states.back() - cs.x_final).norm(), 1e-8);
}

TEST(TrajWeights, NonPositiveWeightsRejected) {
  TrajWeights w = di_weights();
  w.virtual_control = 0.0;
  EXPECT_THROW(w.check(2, 1), ContractViolation);
  w = di_weights();
  w.trust_region = -1.0;
  EXPECT_THROW(w.check(2, 1), ContractViolation);
}

}  // namespace
}  // namespace funnel
