#include "funnel/discretize.hpp"

namespace funnel {
namespace {

struct Sensitivity {
  Vector x;
  Matrix Sx, Su, Sw;
};

Sensitivity derivative(const SystemModel& model, double t, const Sensitivity& s,
                       const Vector& u, const Vector& w) {
  const Jacobians J = model.rhs_jacobians(t, s.x, u, w);
  return {model.rhs(t, s.x, u, w), J.A * s.Sx, J.A * s.Su + J.B, J.A * s.Sw + J.F};
}

Sensitivity axpy(const Sensitivity& s, double a, const Sensitivity& d) {
  return {s.x + a * d.x, s.Sx + a * d.Sx, s.Su + a * d.Su, s.Sw + a * d.Sw};
}

void check_step(double h, const DiscretizationOptions& options) {
  require(h > 0.0, "discretization step must be positive");
  require(options.substeps >= 1, "discretization needs at least one substep");
}

bool all_finite(const DiscreteNode& node) {
  return node.A.allFinite() && node.B.allFinite() && node.F.allFinite() &&
         node.next_state.allFinite();
}

}  // namespace

Vector propagate(const SystemModel& model, double t, const Vector& x, const Vector& u,
                 const Vector& w, double h, const DiscretizationOptions& options) {
  check_step(h, options);
  if (options.method == DiscretizationMethod::kEuler) {
    return x + h * eval_dynamics(model, t, x, u, w);
  }
  eval_dynamics(model, t, x, u, w);  // dimension check only
  const double dt = h / options.substeps;
  Vector state = x;
  double time = t;
  for (int i = 0; i < options.substeps; ++i) {
    const Vector k1 = model.rhs(time, state, u, w);
    const Vector k2 = model.rhs(time + 0.5 * dt, state + 0.5 * dt * k1, u, w);
    const Vector k3 = model.rhs(time + 0.5 * dt, state + 0.5 * dt * k2, u, w);
    const Vector k4 = model.rhs(time + dt, state + dt * k3, u, w);
    state += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    time += dt;
  }
  if (!state.allFinite()) throw NumericalError("propagation produced non-finite state");
  return state;
}

DiscreteNode discretize_zoh(const SystemModel& model, double t, const Vector& x,
                            const Vector& u, double h, const DiscretizationOptions& options) {
  check_step(h, options);
  const int nx = model.state_dim();
  const Vector w = Vector::Zero(model.disturbance_dim());
  const Jacobians J0 = jacobians(model, t, x, u, w);

  DiscreteNode node;
  if (options.method == DiscretizationMethod::kEuler) {
    node.A = Matrix::Identity(nx, nx) + h * J0.A;
    node.B = h * J0.B;
    node.F = h * J0.F;
    node.next_state = x + h * model.rhs(t, x, u, w);
  } else {
    Sensitivity s{x, Matrix::Identity(nx, nx), Matrix::Zero(nx, model.input_dim()),
                  Matrix::Zero(nx, model.disturbance_dim())};
    const double dt = h / options.substeps;
    double time = t;
    for (int i = 0; i < options.substeps; ++i) {
      const Sensitivity k1 = derivative(model, time, s, u, w);
      const Sensitivity k2 = derivative(model, time + 0.5 * dt, axpy(s, 0.5 * dt, k1), u, w);
      const Sensitivity k3 = derivative(model, time + 0.5 * dt, axpy(s, 0.5 * dt, k2), u, w);
      const Sensitivity k4 = derivative(model, time + dt, axpy(s, dt, k3), u, w);
      s.x += dt / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
      s.Sx += dt / 6.0 * (k1.Sx + 2.0 * k2.Sx + 2.0 * k3.Sx + k4.Sx);
      s.Su += dt / 6.0 * (k1.Su + 2.0 * k2.Su + 2.0 * k3.Su + k4.Su);
      s.Sw += dt / 6.0 * (k1.Sw + 2.0 * k2.Sw + 2.0 * k3.Sw + k4.Sw);
      time += dt;
    }
    node.A = s.Sx;
    node.B = s.Su;
    node.F = s.Sw;
    node.next_state = s.x;
  }
  node.z = node.next_state - node.A * x - node.B * u;
  if (!all_finite(node)) throw NumericalError("discretization produced non-finite values");
  return node;
}

DiscreteLinearization discretize_trajectory(const SystemModel& model,
                                            const std::vector<double>& times,
                                            const std::vector<Vector>& states,
                                            const std::vector<Vector>& inputs,
                                            const DiscretizationOptions& options) {
  require(states.size() == inputs.size() + 1, "discretize_trajectory: need N+1 states, N inputs");
  require(times.size() == states.size(), "discretize_trajectory: time grid length mismatch");
  DiscreteLinearization out;
  out.nodes.reserve(inputs.size());
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    try {
      out.nodes.push_back(
          discretize_zoh(model, times[k], states[k], inputs[k], times[k + 1] - times[k], options));
    } catch (const NumericalError& e) {
      throw NumericalError("node " + std::to_string(k) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace funnel
