#pragma once

#include <string>
#include <vector>

#include "funnel/common.hpp"
#include "funnel/conic.hpp"
#include "funnel/discretize.hpp"
#include "funnel/model.hpp"

namespace funnel {

/// Lower bound imposed on every shape matrix: Q_k >= kPsdMargin I.
inline constexpr double kPsdMargin = 1e-9;
/// Lipschitz constants below this are clamped when a nonlinearity is present.
inline constexpr double kGammaFloor = 1e-6;

/// Ellipsoids E_{Q_k} = {eta' Q_k^-1 eta <= 1} with gains K_k and Y_k = K_k Q_k.
/// The certified set of node k is E_{beta_k Q_k}.
struct Funnel {
  std::vector<Matrix> Q;     ///< N+1
  std::vector<Matrix> Y;     ///< N
  std::vector<Matrix> K;     ///< N
  std::vector<double> beta;  ///< N+1

  int intervals() const { return static_cast<int>(K.size()); }
  Matrix certified_shape(int k) const { return beta[k] * Q[k]; }
  void check() const;

  /// Builds Y = K Q and beta = 1.
  static Funnel from_gains(std::vector<Matrix> Q, std::vector<Matrix> K);
};

/// K = Y Q^-1 through a Cholesky solve.
Matrix gain_from(const Matrix& Y, const Matrix& Q);

/// Decision-variable handles of one node LMI. A symmetric variable stores its
/// lower triangle column by column; a dense one stores row-major.
struct SymMatrixVar {
  int first = 0;
  int side = 0;
  int index(int i, int j) const;
  static SymMatrixVar add(ConeProgram& p, int side);
  Matrix value(const Vector& x) const;
};

struct DenseMatrixVar {
  int first = 0;
  int rows = 0;
  int cols = 0;
  int index(int i, int j) const { return first + i * cols + j; }
  static DenseMatrixVar add(ConeProgram& p, int rows, int cols);
  Matrix value(const Vector& x) const;
};

/// Matrices of one node in the converted discrete model.
struct NodeLmiData {
  Matrix A, B, F;  ///< per node
  Matrix E, C, D, G;
};

struct NodeLmiVars {
  SymMatrixVar Q, Q_next;
  DenseMatrixVar Y;
  int nu_p = -1;  ///< unused when the model has no nonlinearity
};

/// Block matrix of the invariance LMI over (eta, dp, w, eta_next, dq). The dp
/// and dq blocks are dropped when the model has no nonlinearity. gamma below
/// kGammaFloor is clamped and reported through `warning`.
AffineSymMatrix build_node_lmi(const NodeLmiData& data, const NodeLmiVars& vars, double alpha,
                               double lambda_w, double gamma, std::string* warning = nullptr);

/// Numeric value of the LMI block at given decision values.
Matrix node_lmi_value(const NodeLmiData& data, const Matrix& Q, const Matrix& Q_next,
                      const Matrix& Y, double nu_p, double alpha, double lambda_w, double gamma);

struct FunnelProblem {
  DiscreteLinearization lin;
  Matrix E, C, D, G;
  std::vector<double> gamma;  ///< N
  Funnel reference;           ///< trust-region center (Q N+1, Y N)
  Matrix Q_initial;           ///< empty for no initial-set constraint
  Matrix Q_final;             ///< empty for no final-set constraint
  double alpha = 0.99;
  double trust_weight = 0.05;

  static FunnelProblem from_model(const SystemModel& model, DiscreteLinearization lin);
  int intervals() const { return lin.size(); }
  int state_dim() const;
};

struct FunnelSolution {
  Funnel funnel;
  std::vector<double> nu;    ///< N+1
  std::vector<double> mu;    ///< N
  std::vector<double> nu_p;  ///< N, empty without a nonlinearity
  double objective = 0.0;
  double lambda_w = 0.0;
  int solver_iterations = 0;
  std::vector<std::string> warnings;
  /// Objective per lambda_w candidate (NaN when infeasible); grid search only.
  std::vector<double> candidate_objectives;
};

ConeProgram build_funnel_sdp(const FunnelProblem& problem, double lambda_w,
                             std::vector<std::string>* warnings = nullptr);

/// Solves the funnel SDP for a fixed lambda_w shared across nodes. Throws
/// SolveError when the solver does not reach an optimum.
FunnelSolution solve_funnel_sdp(const FunnelProblem& problem, double lambda_w,
                                const SolverSettings& settings = {});

/// Solves once per candidate and keeps the feasible one with the smallest
/// objective (earliest on ties). Throws SolveError when none is feasible.
FunnelSolution lambda_w_grid_search(const FunnelProblem& problem,
                                    const std::vector<double>& candidates,
                                    const SolverSettings& settings = {});

}  // namespace funnel
