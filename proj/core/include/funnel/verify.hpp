#pragma once

#include <cstdint>
#include <vector>

#include "funnel/common.hpp"
#include "funnel/discretize.hpp"
#include "funnel/funnelopt.hpp"
#include "funnel/model.hpp"
#include "funnel/trajopt.hpp"

namespace funnel {

enum class DisturbanceMode {
  /// Uniform on the unit sphere, held over each interval.
  kRandomSphere,
  /// Unit vector along F_k' Q_{k+1}^-1 A_cl eta_k, pushing the predicted
  /// deviation outward; falls back to a random direction when that is zero.
  kWorstCase,
};

struct VerifyOptions {
  int samples = 100;
  std::uint64_t seed = 0;
  DisturbanceMode disturbance = DisturbanceMode::kRandomSphere;
  double containment_tol = 1e-9;
  double margin_tol = 1e-9;
  DiscretizationOptions integration;
};

struct RolloutPath {
  std::vector<Vector> states;        ///< N+1
  std::vector<Vector> inputs;        ///< N
  std::vector<Vector> disturbances;  ///< N
};

/// Integrates the continuous model interval by interval with the input
/// ubar_k + K_k (x_k - xbar_k) and disturbance disturbances[k] held constant.
RolloutPath rollout(const SystemModel& model, const Trajectory& nominal, const Funnel& funnel,
                    const Vector& eta0, const std::vector<Vector>& disturbances,
                    const DiscretizationOptions& integration = {});

/// Constraint margins -h of the original constraints: one row per node with
/// the state constraints, then one row per interval with the input ones.
struct Margins {
  std::vector<std::vector<double>> state;  ///< [node][constraint]
  std::vector<std::vector<double>> input;  ///< [interval][constraint]
  double min() const;
};

Margins check_feasibility(const std::vector<Vector>& states, const std::vector<Vector>& inputs,
                          const ConstraintSet& constraints);

struct SampleRecord {
  Vector eta0;
  std::vector<double> containment;  ///< eta_k' (beta_k Q_k)^-1 eta_k, k = 0..N
  Margins margins;
  RolloutPath path;
  bool contained = true;
  bool feasible = true;
};

struct VerificationReport {
  int samples = 0;
  std::vector<SampleRecord> records;
  bool passed = false;
  int contained_count = 0;
  int feasible_count = 0;
  double worst_containment = 0.0;
  int worst_sample = -1;
  int worst_node = -1;
  double min_margin = 0.0;
};

/// Monte Carlo rollouts from the surface of E_{beta_0 Q_0}.
VerificationReport verify_funnel(const SystemModel& model, const Trajectory& nominal,
                                 const Funnel& funnel, const ConstraintSet& constraints,
                                 const VerifyOptions& options = {});

}  // namespace funnel
