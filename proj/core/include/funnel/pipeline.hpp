#pragma once

#include <functional>
#include <string>
#include <vector>

#include "funnel/common.hpp"
#include "funnel/conic.hpp"
#include "funnel/discretize.hpp"
#include "funnel/funnelopt.hpp"
#include "funnel/lipschitz.hpp"
#include "funnel/model.hpp"
#include "funnel/support.hpp"
#include "funnel/trajopt.hpp"

namespace funnel {

enum class RunMode { kJoint, kScpOnly };

std::string to_string(RunMode mode);
RunMode parse_run_mode(const std::string& text);

struct RunConfig {
  std::string model = "unicycle";
  int intervals = 30;
  double final_time = 3.0;
  RunMode mode = RunMode::kJoint;

  Vector x_initial, x_final;
  Matrix Q_initial, Q_final;
  std::vector<EllipseObstacle> obstacles;
  Vector input_lower, input_upper;

  Matrix state_cost, input_cost;
  double virtual_control_weight = 1e3;
  double trust_region_weight = 0.5;
  double funnel_trust_weight = 0.05;

  double alpha = 0.99;
  /// lambda_w candidates as fractions of alpha
  std::vector<double> lambda_w_fractions{0.1, 0.3, 0.5, 0.7, 0.9};
  Vector initial_diameters;
  double lqr_state_weight = 1.0;
  double lqr_input_weight = 1.0;

  LipschitzOptions lipschitz;
  DiscretizationOptions discretization;
  SolverSettings solver;

  double trajectory_tol = 1e-3;
  double funnel_tol = 1e-4;
  int max_iterations = 30;

  /// Throws ContractViolation naming the offending field (section.key).
  void validate(int state_dim, int input_dim) const;

  /// The unicycle obstacle course with all defaults filled in.
  static RunConfig unicycle_benchmark();
};

ConstraintSet make_constraints(const RunConfig& config, int state_dim);
TrajWeights make_weights(const RunConfig& config);

struct LqrResult {
  std::vector<Matrix> K;  ///< N gains, u = K x
  std::vector<Matrix> P;  ///< N+1 cost-to-go matrices
};

/// Finite-horizon backward Riccati recursion with terminal cost P_N. Throws
/// NumericalError when the recursion stops being finite.
LqrResult lqr_backward(const DiscreteLinearization& lin, const Matrix& state_weight,
                       const Matrix& input_weight, const Matrix& terminal);

/// Straight-line states, zero inputs, Riccati gains around that guess and
/// Q_k = diag(d^2 / 4).
struct InitialGuess {
  Trajectory trajectory;
  Funnel funnel;
};
InitialGuess initial_guess(const RunConfig& config, const SystemModel& model);

double trajectory_delta(const Trajectory& current, const Trajectory& reference);
double funnel_delta(const Funnel& current, const Funnel& reference);

struct IterationRecord {
  int iteration = 0;
  double delta_T = 0.0;
  double delta_F = 0.0;
  double trajectory_cost = 0.0;
  double funnel_objective = 0.0;
  double virtual_control_norm = 0.0;
  double lambda_w = 0.0;
  double max_gamma = 0.0;
  double max_beta_hat = 0.0;
  int trajectory_solver_iterations = 0;
  /// Wall-clock seconds; not part of any export.
  double seconds_trajectory = 0.0, seconds_lipschitz = 0.0, seconds_funnel = 0.0,
         seconds_support = 0.0;
  std::vector<std::string> warnings;
};

struct RunResult {
  Trajectory trajectory;
  std::vector<Vector> virtual_control;
  /// Funnel from the last SDP with its beta sequence; empty in scp-only mode.
  Funnel funnel;
  BetaSequence betas;
  std::vector<SupportDual> duals;
  std::vector<double> gamma;
  double lambda_w = 0.0;
  std::vector<IterationRecord> history;
  bool converged = false;
};

/// A step of the loop failed; carries the records completed so far.
class PipelineError : public SolveError {
 public:
  PipelineError(const std::string& message, std::vector<IterationRecord> history)
      : SolveError(message), history_(std::move(history)) {}
  const std::vector<IterationRecord>& history() const { return history_; }

 private:
  std::vector<IterationRecord> history_;
};

using IterationCallback = std::function<void(const IterationRecord&)>;

RunResult run(const RunConfig& config, const IterationCallback& on_iteration = {});
RunResult run(const RunConfig& config, const SystemModel& model,
              const IterationCallback& on_iteration = {});

/// Rebuilds the funnel problem around a finished run; used by checks that
/// need the per-node matrices the last SDP saw.
FunnelProblem funnel_problem_for(const RunConfig& config, const SystemModel& model,
                                 const RunResult& result);

}  // namespace funnel
