#include "funnel/trajopt.hpp"

#include <cmath>

#include "funnel/linalg.hpp"

namespace funnel {

void Trajectory::check() const {
  require(!inputs.empty(), "trajectory needs at least one interval");
  require(states.size() == inputs.size() + 1, "trajectory needs N+1 states for N inputs");
  require(times.size() == states.size(), "trajectory time grid length mismatch");
  for (std::size_t k = 1; k < times.size(); ++k) {
    require(times[k] > times[k - 1], "trajectory time grid must be increasing");
  }
}

std::vector<double> uniform_grid(int intervals, double final_time) {
  require(intervals >= 1, "uniform_grid: need at least one interval");
  require(final_time > 0.0, "uniform_grid: final time must be positive");
  std::vector<double> t(intervals + 1);
  for (int k = 0; k <= intervals; ++k) t[k] = final_time * k / intervals;
  return t;
}

ScalarConstraint affine_constraint(std::string name, Vector a, double b) {
  ScalarConstraint c;
  c.name = std::move(name);
  c.value = [a, b](const Vector& v) { return a.dot(v) - b; };
  c.gradient = [a](const Vector&) { return a; };
  return c;
}

ScalarConstraint obstacle_constraint(const EllipseObstacle& obstacle, int state_dim) {
  require(obstacle.center.size() == 2 && obstacle.diameters.size() == 2,
          "obstacle needs a 2-D center and two diameters");
  require(obstacle.diameters.minCoeff() > 0.0, "obstacle diameters must be positive");
  require(obstacle.coord_x >= 0 && obstacle.coord_x < state_dim && obstacle.coord_y >= 0 &&
              obstacle.coord_y < state_dim && obstacle.coord_x != obstacle.coord_y,
          "obstacle coordinates out of range");
  const Vector p = (2.0 * obstacle.diameters.cwiseInverse()).eval();
  const int ix = obstacle.coord_x, iy = obstacle.coord_y;
  const Vector c = obstacle.center;

  ScalarConstraint out;
  out.name = "obstacle";
  out.value = [=](const Vector& x) {
    const double ex = p(0) * (x(ix) - c(0)), ey = p(1) * (x(iy) - c(1));
    return 1.0 - std::hypot(ex, ey);
  };
  out.gradient = [=](const Vector& x) {
    const double ex = p(0) * (x(ix) - c(0)), ey = p(1) * (x(iy) - c(1));
    const double norm = std::max(std::hypot(ex, ey), 1e-6);
    Vector g = Vector::Zero(state_dim);
    g(ix) = -p(0) * ex / norm;
    g(iy) = -p(1) * ey / norm;
    return g;
  };
  return out;
}

std::vector<ScalarConstraint> input_box_constraints(const Vector& lower, const Vector& upper) {
  require(lower.size() == upper.size(), "input bounds size mismatch");
  std::vector<ScalarConstraint> out;
  const auto n = lower.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    require(lower(i) < upper(i), "input lower bound must be below upper bound");
    Vector e = Vector::Zero(n);
    e(i) = 1.0;
    out.push_back(affine_constraint("u" + std::to_string(i) + "_upper", e, upper(i)));
    out.push_back(affine_constraint("u" + std::to_string(i) + "_lower", -e, -lower(i)));
  }
  return out;
}

HalfSpace linearize(const ScalarConstraint& constraint, const Vector& point) {
  const Vector a = constraint.gradient(point);
  const double h = constraint.value(point);
  if (!a.allFinite() || !std::isfinite(h)) {
    throw NumericalError("constraint '" + constraint.name + "' is not finite at the reference");
  }
  return {a, a.dot(point) - h};
}

LinearizedConstraints linearize_constraints(const ConstraintSet& constraints,
                                            const Trajectory& reference) {
  LinearizedConstraints out;
  out.state.resize(reference.states.size());
  out.input.resize(reference.inputs.size());
  for (std::size_t k = 0; k < reference.states.size(); ++k) {
    for (std::size_t i = 0; i < constraints.state.size(); ++i) {
      try {
        out.state[k].push_back(linearize(constraints.state[i], reference.states[k]));
      } catch (const NumericalError& e) {
        throw NumericalError("state constraint " + std::to_string(i) + " at node " +
                             std::to_string(k) + ": " + e.what());
      }
    }
  }
  for (std::size_t k = 0; k < reference.inputs.size(); ++k) {
    for (std::size_t j = 0; j < constraints.input.size(); ++j) {
      try {
        out.input[k].push_back(linearize(constraints.input[j], reference.inputs[k]));
      } catch (const NumericalError& e) {
        throw NumericalError("input constraint " + std::to_string(j) + " at node " +
                             std::to_string(k) + ": " + e.what());
      }
    }
  }
  return out;
}

double tighten(const HalfSpace& h, const Matrix& Q) {
  require(Q.rows() == h.a.size() && Q.cols() == h.a.size(), "tighten: shape size mismatch");
  return h.b - (sqrtm_psd(Q) * h.a).norm();
}

double tighten(const HalfSpace& h, const Matrix& Q, const Matrix& K) {
  require(K.cols() == Q.rows() && K.rows() == h.a.size(), "tighten: gain size mismatch");
  return h.b - (sqrtm_psd(symmetrize(K * Q * K.transpose())) * h.a).norm();
}

void TrajWeights::check(int state_dim, int input_dim) const {
  require(virtual_control > 0.0, "virtual-control weight must be positive");
  require(trust_region > 0.0, "trust-region weight must be positive");
  require(state_cost.rows() == state_dim && state_cost.cols() == state_dim,
          "state cost must be n_x by n_x");
  require(input_cost.rows() == input_dim && input_cost.cols() == input_dim,
          "input cost must be n_u by n_u");
  require(min_eigenvalue(state_cost) >= -1e-12 && min_eigenvalue(input_cost) >= -1e-12,
          "trajectory cost weights must be positive semidefinite");
}

namespace {

struct Layout {
  int nx, nu, N;
  int x0, u0, v0, s0, t0;
  int x(int k, int i) const { return x0 + k * nx + i; }
  int u(int k, int i) const { return u0 + k * nu + i; }
  int v(int k, int i) const { return v0 + k * nx + i; }
  int s(int k, int i) const { return s0 + k * nx + i; }
  int t(int k) const { return t0 + k; }
};

Layout make_layout(ConeProgram& p, int nx, int nu, int N) {
  Layout L{nx, nu, N, 0, 0, 0, 0, 0};
  L.x0 = p.add_variables((N + 1) * nx);
  L.u0 = p.add_variables(N * nu);
  L.v0 = p.add_variables(N * nx);
  L.s0 = p.add_variables(N * nx);
  L.t0 = p.add_variables(N);
  return L;
}

void check_inputs(const Trajectory& reference, const DiscreteLinearization& lin,
                  const FunnelShape& funnel, const ConstraintSet& constraints,
                  const TrajWeights& weights) {
  reference.check();
  const int N = reference.intervals();
  const auto nx = static_cast<int>(reference.states[0].size());
  const auto nu = static_cast<int>(reference.inputs[0].size());
  require(lin.size() == N, "linearization and reference disagree on N");
  require(funnel.Q.empty() || static_cast<int>(funnel.Q.size()) == N + 1,
          "funnel needs N+1 shape matrices");
  require(funnel.K.empty() || static_cast<int>(funnel.K.size()) == N, "funnel needs N gains");
  require(constraints.x_initial.size() == nx && constraints.x_final.size() == nx,
          "boundary states have the wrong size");
  weights.check(nx, nu);
}

}  // namespace

ConeProgram build_traj_socp(const Trajectory& reference, const DiscreteLinearization& lin,
                            const FunnelShape& funnel, const ConstraintSet& constraints,
                            const TrajWeights& weights) {
  check_inputs(reference, lin, funnel, constraints, weights);
  const int N = reference.intervals();
  const auto nx = static_cast<int>(reference.states[0].size());
  const auto nu = static_cast<int>(reference.inputs[0].size());

  ConeProgram p;
  const Layout L = make_layout(p, nx, nu, N);

  // x_{k+1} = A x_k + B u_k + z_k + v_k
  for (int k = 0; k < N; ++k) {
    const DiscreteNode& d = lin.nodes[k];
    for (int i = 0; i < nx; ++i) {
      AffineExpr e = AffineExpr::var(L.x(k + 1, i), -1.0);
      e.constant = d.z(i);
      for (int j = 0; j < nx; ++j) {
        if (d.A(i, j) != 0.0) e.add(L.x(k, j), d.A(i, j));
      }
      for (int j = 0; j < nu; ++j) {
        if (d.B(i, j) != 0.0) e.add(L.u(k, j), d.B(i, j));
      }
      e.add(L.v(k, i), 1.0);
      p.add_equality(e);
    }
  }
  for (int i = 0; i < nx; ++i) {
    p.add_equality(AffineExpr::var(L.x(0, i)) - constraints.x_initial(i));
    p.add_equality(AffineExpr::var(L.x(N, i)) - constraints.x_final(i));
  }

  // |v|_1 epigraph
  for (int k = 0; k < N; ++k) {
    for (int i = 0; i < nx; ++i) {
      p.add_nonneg(AffineExpr::var(L.s(k, i)) - AffineExpr::var(L.v(k, i)));
      p.add_nonneg(AffineExpr::var(L.s(k, i)) + AffineExpr::var(L.v(k, i)));
      p.add_objective(L.s(k, i), weights.virtual_control);
    }
  }

  // tightened state constraints on every node, input constraints on 0..N-1
  const LinearizedConstraints lc = linearize_constraints(constraints, reference);
  for (int k = 0; k <= N; ++k) {
    for (const HalfSpace& h : lc.state[k]) {
      const double b = funnel.Q.empty() ? h.b : tighten(h, funnel.Q[k]);
      AffineExpr e(b);
      for (int i = 0; i < nx; ++i) {
        if (h.a(i) != 0.0) e.add(L.x(k, i), -h.a(i));
      }
      p.add_nonneg(e);
    }
  }
  for (int k = 0; k < N; ++k) {
    for (const HalfSpace& h : lc.input[k]) {
      const double b =
          funnel.Q.empty() || funnel.K.empty() ? h.b : tighten(h, funnel.Q[k], funnel.K[k]);
      AffineExpr e(b);
      for (int i = 0; i < nu; ++i) {
        if (h.a(i) != 0.0) e.add(L.u(k, i), -h.a(i));
      }
      p.add_nonneg(e);
    }
  }

  // t_k >= |Lx x|^2 + |Lu u|^2 + w_tr (|x - xhat|^2 + |u - uhat|^2), written as
  // |(2 r, t - 1)| <= t + 1 with r the stacked residual.
  const Matrix Lx = sqrtm_psd(weights.state_cost);
  const Matrix Lu = sqrtm_psd(weights.input_cost);
  const double rt = std::sqrt(weights.trust_region);
  for (int k = 0; k < N; ++k) {
    std::vector<AffineExpr> cone;
    cone.push_back(AffineExpr::var(L.t(k)) + 1.0);
    cone.push_back(AffineExpr::var(L.t(k)) - 1.0);
    auto add_rows = [&](const Matrix& M, int nv, auto index) {
      for (int r = 0; r < M.rows(); ++r) {
        AffineExpr e;
        for (int j = 0; j < nv; ++j) {
          if (M(r, j) != 0.0) e.add(index(j), 2.0 * M(r, j));
        }
        if (!e.terms.empty()) cone.push_back(e);
      }
    };
    add_rows(Lx, nx, [&](int j) { return L.x(k, j); });
    add_rows(Lu, nu, [&](int j) { return L.u(k, j); });
    for (int i = 0; i < nx; ++i) {
      cone.push_back(2.0 * rt * (AffineExpr::var(L.x(k, i)) - reference.states[k](i)));
    }
    for (int i = 0; i < nu; ++i) {
      cone.push_back(2.0 * rt * (AffineExpr::var(L.u(k, i)) - reference.inputs[k](i)));
    }
    p.add_second_order(cone);
    p.add_objective(L.t(k), 1.0);
  }
  return p;
}

TrajSolution solve_traj_socp(const Trajectory& reference, const DiscreteLinearization& lin,
                             const FunnelShape& funnel, const ConstraintSet& constraints,
                             const TrajWeights& weights, const SolverSettings& settings) {
  const ConeProgram p = build_traj_socp(reference, lin, funnel, constraints, weights);
  const SolveResult r = solve(p, settings);
  if (r.status != SolveStatus::kOptimal) {
    throw SolveError("trajectory SOCP returned " + to_string(r.status) + " after " +
                     std::to_string(r.iterations) + " iterations (primal residual " +
                     std::to_string(r.primal_residual) + ", gap " + std::to_string(r.gap) + ")");
  }

  const int N = reference.intervals();
  const auto nx = static_cast<int>(reference.states[0].size());
  const auto nu = static_cast<int>(reference.inputs[0].size());
  const int x0 = 0, u0 = (N + 1) * nx, v0 = u0 + N * nu;

  TrajSolution out;
  out.trajectory.times = reference.times;
  for (int k = 0; k <= N; ++k) out.trajectory.states.push_back(r.x.segment(x0 + k * nx, nx));
  for (int k = 0; k < N; ++k) {
    out.trajectory.inputs.push_back(r.x.segment(u0 + k * nu, nu));
    out.virtual_control.push_back(r.x.segment(v0 + k * nx, nx));
  }
  for (int k = 0; k < N; ++k) {
    const Vector& x = out.trajectory.states[k];
    const Vector& u = out.trajectory.inputs[k];
    out.trajectory_cost += x.dot(weights.state_cost * x) + u.dot(weights.input_cost * u);
    out.virtual_control_norm += out.virtual_control[k].lpNorm<1>();
    out.trust_region_cost += weights.trust_region * ((x - reference.states[k]).squaredNorm() +
                                                     (u - reference.inputs[k]).squaredNorm());
  }
  out.objective = r.objective;
  out.solver_iterations = r.iterations;
  return out;
}

}  // namespace funnel
