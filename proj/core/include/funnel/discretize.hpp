#pragma once

#include <vector>

#include "funnel/common.hpp"
#include "funnel/model.hpp"

namespace funnel {

enum class DiscretizationMethod {
  /// Classical RK4 on state and sensitivity equations, inputs held constant.
  kRk4Zoh,
  /// One forward-Euler step. The discrete map then keeps the converted form
  /// exactly, with nonlinearity h*phi(q_k) evaluated at the node.
  kEuler,
};

struct DiscretizationOptions {
  DiscretizationMethod method = DiscretizationMethod::kRk4Zoh;
  int substeps = 10;
};

/// Affine model of one interval: x+ = A x + B u + F w + z around the nominal
/// node, exact at the nominal point with w = 0.
struct DiscreteNode {
  Matrix A, B, F;
  Vector z;
  Vector next_state;  ///< f(t_k, xbar_k, ubar_k, 0)
};

struct DiscreteLinearization {
  std::vector<DiscreteNode> nodes;
  int size() const { return static_cast<int>(nodes.size()); }
};

/// Propagates x over [t, t+h] with u and w held constant.
Vector propagate(const SystemModel& model, double t, const Vector& x, const Vector& u,
                 const Vector& w, double h, const DiscretizationOptions& options = {});

/// Linearizes one interval around (x, u, w = 0).
DiscreteNode discretize_zoh(const SystemModel& model, double t, const Vector& x,
                            const Vector& u, double h,
                            const DiscretizationOptions& options = {});

/// Linearizes every interval of a trajectory; `states` has one more entry than
/// `inputs`.
DiscreteLinearization discretize_trajectory(const SystemModel& model,
                                            const std::vector<double>& times,
                                            const std::vector<Vector>& states,
                                            const std::vector<Vector>& inputs,
                                            const DiscretizationOptions& options = {});

}  // namespace funnel
