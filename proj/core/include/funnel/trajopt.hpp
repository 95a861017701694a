#pragma once

#include <functional>
#include <string>
#include <vector>

#include "funnel/common.hpp"
#include "funnel/conic.hpp"
#include "funnel/discretize.hpp"

namespace funnel {

/// Nominal trajectory: N+1 states and N inputs on a time grid of N+1 points.
struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> inputs;

  int intervals() const { return static_cast<int>(inputs.size()); }
  void check() const;
};

/// Evenly spaced grid of N+1 points over [0, final_time].
std::vector<double> uniform_grid(int intervals, double final_time);

/// Differentiable scalar constraint h(v) <= 0 on a state or an input vector.
struct ScalarConstraint {
  std::string name;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
};

/// h(v) = a'v - b
ScalarConstraint affine_constraint(std::string name, Vector a, double b);

/// Keep-out ellipse on a pair of coordinates: h(x) = 1 - |P (r - c)| with
/// r = (x[coords[0]], x[coords[1]]) and P = diag(2/d1, 2/d2).
struct EllipseObstacle {
  Vector center;     ///< 2-vector
  Vector diameters;  ///< principal diameters along the two coordinates
  int coord_x = 0;
  int coord_y = 1;
};

ScalarConstraint obstacle_constraint(const EllipseObstacle& obstacle, int state_dim);

/// |u_i| bounds as 2 n_u affine half-spaces.
std::vector<ScalarConstraint> input_box_constraints(const Vector& lower, const Vector& upper);

struct ConstraintSet {
  std::vector<ScalarConstraint> state;
  std::vector<ScalarConstraint> input;
  Vector x_initial, x_final;
  Matrix Q_initial, Q_final;
};

/// a'v <= b
struct HalfSpace {
  Vector a;
  double b = 0.0;
};

/// First-order expansion of h around `point`: a = grad h, b = a'point - h(point).
HalfSpace linearize(const ScalarConstraint& constraint, const Vector& point);

/// Per node half-spaces of every constraint. States carry N+1 nodes; inputs N.
struct LinearizedConstraints {
  std::vector<std::vector<HalfSpace>> state;  ///< [node][constraint]
  std::vector<std::vector<HalfSpace>> input;
};

LinearizedConstraints linearize_constraints(const ConstraintSet& constraints,
                                            const Trajectory& reference);

/// b - |Q^{1/2} a|, the half-space shrunk so the ellipsoid {eta' Q^-1 eta <= 1}
/// around any point satisfying it still fits.
double tighten(const HalfSpace& h, const Matrix& Q);
/// b - |(K Q K')^{1/2} a| for input constraints.
double tighten(const HalfSpace& h, const Matrix& Q, const Matrix& K);

struct TrajWeights {
  double virtual_control = 1e3;
  double trust_region = 0.5;
  /// J_t(x, u) = x' state_cost x + u' input_cost u at nodes 0..N-1.
  Matrix state_cost;
  Matrix input_cost;

  void check(int state_dim, int input_dim) const;
};

/// Funnel parameters the trajectory step tightens against. Empty vectors mean
/// no funnel (plain SCP subproblem).
struct FunnelShape {
  std::vector<Matrix> Q;  ///< N+1
  std::vector<Matrix> K;  ///< N
};

struct TrajSolution {
  Trajectory trajectory;
  std::vector<Vector> virtual_control;
  double trajectory_cost = 0.0;       ///< sum of J_t
  double virtual_control_norm = 0.0;  ///< sum of |v_k|_1
  double trust_region_cost = 0.0;     ///< w_tr * sum of squared deviations
  double objective = 0.0;
  int solver_iterations = 0;
};

/// Assembles the trajectory-update SOCP without solving it. Exposed for
/// debugging dumps and benchmarks.
ConeProgram build_traj_socp(const Trajectory& reference, const DiscreteLinearization& lin,
                            const FunnelShape& funnel, const ConstraintSet& constraints,
                            const TrajWeights& weights);

/// Builds and solves the trajectory SOCP. Throws SolveError if the solver
/// does not report an optimal point.
TrajSolution solve_traj_socp(const Trajectory& reference, const DiscreteLinearization& lin,
                             const FunnelShape& funnel, const ConstraintSet& constraints,
                             const TrajWeights& weights, const SolverSettings& settings = {});

}  // namespace funnel
