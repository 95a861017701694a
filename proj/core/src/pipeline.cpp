#include "funnel/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>

#include "funnel/linalg.hpp"

namespace funnel {

std::string to_string(RunMode mode) { return mode == RunMode::kJoint ? "joint" : "scp-only"; }

RunMode parse_run_mode(const std::string& text) {
  if (text == "joint") return RunMode::kJoint;
  if (text == "scp-only") return RunMode::kScpOnly;
  throw ContractViolation("unknown mode '" + text + "' (expected joint or scp-only)");
}

namespace {
void field(bool ok, const std::string& name, const std::string& what) {
  if (!ok) throw ContractViolation(name + ": " + what);
}
}  // namespace

void RunConfig::validate(int nx, int nu) const {
  field(intervals >= 1, "problem.nodes", "must be at least 1");
  field(final_time > 0.0, "problem.final_time", "must be positive");
  field(x_initial.size() == nx, "boundary.initial_state", "needs " + std::to_string(nx) + " entries");
  field(x_final.size() == nx, "boundary.final_state", "needs " + std::to_string(nx) + " entries");
  field(Q_initial.rows() == nx && Q_initial.cols() == nx && min_eigenvalue(Q_initial) > 0.0,
        "boundary.initial_radii", "must give a positive definite initial set");
  field(Q_final.rows() == nx && Q_final.cols() == nx && min_eigenvalue(Q_final) > 0.0,
        "boundary.final_radii", "must give a positive definite final set");
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    const auto& o = obstacles[i];
    const std::string name = "obstacle" + std::to_string(i + 1);
    field(o.center.size() == 2, name + ".center", "needs 2 entries");
    field(o.diameters.size() == 2 && o.diameters.minCoeff() > 0.0, name + ".diameters",
          "needs 2 positive entries");
    field(o.coord_x >= 0 && o.coord_x < nx && o.coord_y >= 0 && o.coord_y < nx &&
              o.coord_x != o.coord_y,
          name + ".coordinates", "must name two distinct state indices");
  }
  field(input_lower.size() == nu, "inputs.lower", "needs " + std::to_string(nu) + " entries");
  field(input_upper.size() == nu, "inputs.upper", "needs " + std::to_string(nu) + " entries");
  field((input_upper - input_lower).minCoeff() > 0.0, "inputs.upper", "must exceed inputs.lower");
  field(state_cost.rows() == nx && state_cost.cols() == nx && min_eigenvalue(state_cost) >= 0.0,
        "cost.state_weights", "must be nonnegative with " + std::to_string(nx) + " entries");
  field(input_cost.rows() == nu && input_cost.cols() == nu && min_eigenvalue(input_cost) >= 0.0,
        "cost.input_weights", "must be nonnegative with " + std::to_string(nu) + " entries");
  field(virtual_control_weight > 0.0, "weights.virtual_control", "must be positive");
  field(trust_region_weight > 0.0, "weights.trust_region", "must be positive");
  field(funnel_trust_weight >= 0.0, "weights.funnel_trust_region", "must be nonnegative");
  field(alpha > 0.0 && alpha <= 1.0, "funnel.alpha", "must lie in (0, 1]");
  field(!lambda_w_fractions.empty(), "funnel.lambda_w_grid", "must not be empty");
  for (double f : lambda_w_fractions) {
    field(f > 0.0 && f < 1.0, "funnel.lambda_w_grid", "entries must lie in (0, 1)");
  }
  field(initial_diameters.size() == nx && initial_diameters.minCoeff() > 0.0,
        "funnel.initial_diameters", "needs " + std::to_string(nx) + " positive entries");
  field(lqr_state_weight > 0.0, "funnel.lqr_state_weight", "must be positive");
  field(lqr_input_weight > 0.0, "funnel.lqr_input_weight", "must be positive");
  field(lipschitz.samples >= 1, "lipschitz.samples", "must be at least 1");
  field(lipschitz.safety_factor > 0.0, "lipschitz.safety_factor", "must be positive");
  field(discretization.substeps >= 1, "discretization.substeps", "must be at least 1");
  field(trajectory_tol > 0.0, "stopping.trajectory_tol", "must be positive");
  field(funnel_tol > 0.0, "stopping.funnel_tol", "must be positive");
  field(max_iterations >= 1, "stopping.max_iterations", "must be at least 1");
}

RunConfig RunConfig::unicycle_benchmark() {
  const double heading = 20.0 * std::numbers::pi / 180.0;
  RunConfig c;
  c.model = "unicycle";
  c.intervals = 30;
  c.final_time = 3.0;
  c.x_initial = Vector::Zero(3);
  c.x_final = (Vector(3) << 5.0, 5.0, 0.0).finished();
  c.Q_initial = Vector((Vector(3) << 0.4 * 0.4, 0.4 * 0.4, heading * heading).finished()).asDiagonal();
  c.Q_final = Vector((Vector(3) << 0.5 * 0.5, 0.5 * 0.5, heading * heading).finished()).asDiagonal();
  EllipseObstacle o1{(Vector(2) << 1.0, 2.0).finished(), (Vector(2) << 1.5, 3.0).finished()};
  EllipseObstacle o2{(Vector(2) << 4.0, 3.0).finished(), (Vector(2) << 1.5, 3.0).finished()};
  c.obstacles = {o1, o2};
  c.input_lower = (Vector(2) << -4.0, -2.5).finished();
  c.input_upper = (Vector(2) << 4.0, 2.5).finished();
  c.state_cost = Matrix::Zero(3, 3);
  c.input_cost = Matrix::Identity(2, 2);
  c.initial_diameters = (Vector(3) << 0.8, 0.8, 2.0 * heading).finished();
  return c;
}

ConstraintSet make_constraints(const RunConfig& config, int state_dim) {
  ConstraintSet cs;
  for (std::size_t i = 0; i < config.obstacles.size(); ++i) {
    ScalarConstraint c = obstacle_constraint(config.obstacles[i], state_dim);
    c.name = "obstacle" + std::to_string(i + 1);
    cs.state.push_back(std::move(c));
  }
  cs.input = input_box_constraints(config.input_lower, config.input_upper);
  cs.x_initial = config.x_initial;
  cs.x_final = config.x_final;
  cs.Q_initial = config.Q_initial;
  cs.Q_final = config.Q_final;
  return cs;
}

TrajWeights make_weights(const RunConfig& config) {
  TrajWeights w;
  w.virtual_control = config.virtual_control_weight;
  w.trust_region = config.trust_region_weight;
  w.state_cost = config.state_cost;
  w.input_cost = config.input_cost;
  return w;
}

LqrResult lqr_backward(const DiscreteLinearization& lin, const Matrix& Qw, const Matrix& Rw,
                       const Matrix& terminal) {
  const int N = lin.size();
  require(N >= 1, "lqr_backward: empty linearization");
  LqrResult out;
  out.K.resize(N);
  out.P.resize(N + 1);
  out.P[N] = terminal;
  for (int k = N - 1; k >= 0; --k) {
    const Matrix& A = lin.nodes[k].A;
    const Matrix& B = lin.nodes[k].B;
    const Matrix& P = out.P[k + 1];
    const Matrix S = symmetrize(Rw + B.transpose() * P * B);
    Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("Riccati recursion lost definiteness at node " + std::to_string(k));
    }
    out.K[k] = -llt.solve(B.transpose() * P * A);
    out.P[k] = symmetrize(Qw + A.transpose() * P * (A + B * out.K[k]));
    if (!out.P[k].allFinite() || !out.K[k].allFinite()) {
      throw NumericalError("Riccati recursion diverged at node " + std::to_string(k));
    }
  }
  return out;
}

InitialGuess initial_guess(const RunConfig& config, const SystemModel& model) {
  const int nx = model.state_dim(), nu = model.input_dim();
  config.validate(nx, nu);
  const int N = config.intervals;
  InitialGuess g;
  g.trajectory.times = uniform_grid(N, config.final_time);
  for (int k = 0; k <= N; ++k) {
    const double s = static_cast<double>(k) / N;
    g.trajectory.states.push_back(k == N ? config.x_final
                                         : Vector(config.x_initial + s * (config.x_final - config.x_initial)));
  }
  g.trajectory.inputs.assign(N, Vector::Zero(nu));

  const DiscreteLinearization lin =
      discretize_trajectory(model, g.trajectory.times, g.trajectory.states, g.trajectory.inputs,
                            config.discretization);
  const Matrix Qw = config.lqr_state_weight * Matrix::Identity(nx, nx);
  const Matrix Rw = config.lqr_input_weight * Matrix::Identity(nu, nu);
  LqrResult lqr;
  try {
    lqr = lqr_backward(lin, Qw, Rw, Qw);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("initialization failed: ") + e.what());
  }
  const Matrix Q0 = Vector(config.initial_diameters.array().square() / 4.0).asDiagonal();
  g.funnel = Funnel::from_gains(std::vector<Matrix>(N + 1, Q0), lqr.K);
  return g;
}

double trajectory_delta(const Trajectory& cur, const Trajectory& ref) {
  require(cur.states.size() == ref.states.size() && cur.inputs.size() == ref.inputs.size(),
          "trajectory_delta: node count mismatch");
  double d = 0.0;
  for (std::size_t k = 0; k < cur.states.size(); ++k) d += (cur.states[k] - ref.states[k]).squaredNorm();
  for (std::size_t k = 0; k < cur.inputs.size(); ++k) d += (cur.inputs[k] - ref.inputs[k]).squaredNorm();
  return d;
}

double funnel_delta(const Funnel& cur, const Funnel& ref) {
  require(cur.Q.size() == ref.Q.size() && cur.Y.size() == ref.Y.size(),
          "funnel_delta: node count mismatch");
  double d = 0.0;
  for (std::size_t k = 0; k < cur.Q.size(); ++k) d += (cur.Q[k] - ref.Q[k]).squaredNorm();
  for (std::size_t k = 0; k < cur.Y.size(); ++k) d += (cur.Y[k] - ref.Y[k]).squaredNorm();
  return d;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<double> lambda_w_candidates(const RunConfig& config) {
  std::vector<double> out;
  for (double f : config.lambda_w_fractions) out.push_back(f * config.alpha);
  return out;
}

FunnelProblem make_funnel_problem(const RunConfig& config, const SystemModel& model,
                                  DiscreteLinearization lin, std::vector<double> gamma,
                                  const Funnel& reference) {
  FunnelProblem p = FunnelProblem::from_model(model, std::move(lin));
  p.gamma = std::move(gamma);
  p.reference = reference;
  p.Q_initial = config.Q_initial;
  p.Q_final = config.Q_final;
  p.alpha = config.alpha;
  p.trust_weight = config.funnel_trust_weight;
  return p;
}

}  // namespace

RunResult run(const RunConfig& config, const IterationCallback& on_iteration) {
  const ModelPtr model = make_model(config.model);
  return run(config, *model, on_iteration);
}

RunResult run(const RunConfig& config, const SystemModel& model,
              const IterationCallback& on_iteration) {
  const InitialGuess guess = initial_guess(config, model);
  const ConstraintSet constraints = make_constraints(config, model.state_dim());
  const TrajWeights weights = make_weights(config);
  const bool joint = config.mode == RunMode::kJoint;

  Trajectory ref_traj = guess.trajectory;
  Funnel ref_funnel = guess.funnel;   // scaled funnel the next step tightens against
  Funnel prev_sdp = guess.funnel;     // unscaled SDP output of the previous iteration
  RunResult result;

  for (int it = 1; it <= config.max_iterations; ++it) {
    IterationRecord rec;
    rec.iteration = it;
    try {
      auto t0 = Clock::now();
      const DiscreteLinearization lin_ref = discretize_trajectory(
          model, ref_traj.times, ref_traj.states, ref_traj.inputs, config.discretization);
      FunnelShape shape;
      if (joint) shape = {ref_funnel.Q, ref_funnel.K};
      TrajSolution ts = solve_traj_socp(ref_traj, lin_ref, shape, constraints, weights, config.solver);
      rec.seconds_trajectory = seconds_since(t0);
      rec.trajectory_cost = ts.trajectory_cost;
      rec.virtual_control_norm = ts.virtual_control_norm;
      rec.trajectory_solver_iterations = ts.solver_iterations;
      rec.delta_T = trajectory_delta(ts.trajectory, ref_traj);
      result.trajectory = ts.trajectory;
      result.virtual_control = ts.virtual_control;

      Funnel scaled;
      if (joint) {
        t0 = Clock::now();
        DiscreteLinearization lin =
            discretize_trajectory(model, ts.trajectory.times, ts.trajectory.states,
                                  ts.trajectory.inputs, config.discretization);
        LipschitzEstimate le = estimate_lipschitz(model, ts.trajectory.times, ts.trajectory.states,
                                                  ts.trajectory.inputs, lin, ref_funnel.Q,
                                                  ref_funnel.K, config.lipschitz,
                                                  config.discretization);
        rec.seconds_lipschitz = seconds_since(t0);
        for (double g : le.gamma) rec.max_gamma = std::max(rec.max_gamma, g);

        t0 = Clock::now();
        const FunnelProblem problem =
            make_funnel_problem(config, model, std::move(lin), le.gamma, ref_funnel);
        FunnelSolution fs = lambda_w_grid_search(problem, lambda_w_candidates(config), config.solver);
        rec.seconds_funnel = seconds_since(t0);
        rec.funnel_objective = fs.objective;
        rec.lambda_w = fs.lambda_w;
        rec.warnings = fs.warnings;

        t0 = Clock::now();
        std::vector<SupportDual> duals = support_duals(problem, fs.funnel, config.solver);
        std::vector<double> beta_hat;
        for (const SupportDual& d : duals) {
          beta_hat.push_back(d.beta_hat);
          rec.max_beta_hat = std::max(rec.max_beta_hat, d.beta_hat);
        }
        BetaSequence betas = beta_recursion(beta_hat, config.alpha);
        rec.seconds_support = seconds_since(t0);

        fs.funnel.beta = betas.beta;
        rec.delta_F = funnel_delta(fs.funnel, prev_sdp);
        scaled = apply_support_scaling(fs.funnel, betas.beta);

        result.funnel = fs.funnel;
        result.betas = std::move(betas);
        result.duals = std::move(duals);
        result.gamma = le.gamma;
        result.lambda_w = fs.lambda_w;
        prev_sdp = fs.funnel;
      }

      result.history.push_back(rec);
      if (on_iteration) on_iteration(rec);
      if (rec.delta_T < config.trajectory_tol && rec.delta_F < config.funnel_tol) {
        result.converged = true;
        break;
      }
      ref_traj = ts.trajectory;
      if (joint) ref_funnel = std::move(scaled);
    } catch (const Error& e) {
      throw PipelineError("iteration " + std::to_string(it) + ": " + e.what(), result.history);
    }
  }
  return result;
}

FunnelProblem funnel_problem_for(const RunConfig& config, const SystemModel& model,
                                 const RunResult& result) {
  DiscreteLinearization lin =
      discretize_trajectory(model, result.trajectory.times, result.trajectory.states,
                            result.trajectory.inputs, config.discretization);
  return make_funnel_problem(config, model, std::move(lin), result.gamma, result.funnel);
}

}  // namespace funnel
