#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "funnel/common.hpp"
#include "funnel/discretize.hpp"
#include "funnel/model.hpp"

namespace funnel {

/// Ratios below this norm of dq are discarded.
inline constexpr double kDeltaQFloor = 1e-9;

struct FunnelSample {
  Vector eta;  ///< on the boundary of {eta' Q^-1 eta <= 1}
  Vector w;    ///< in the unit ball
};

/// Deterministic per-node random stream.
std::mt19937_64 node_stream(std::uint64_t seed, int node);

/// Uniform direction on the unit sphere in R^n.
Vector sample_unit_sphere(std::mt19937_64& rng, int n);
/// Uniform point in the unit ball in R^n.
Vector sample_unit_ball(std::mt19937_64& rng, int n);

/// Draws `count` pairs: eta = Q^{1/2} d with d uniform on the unit sphere, w
/// uniform in the unit ball of dimension `disturbance_dim`.
std::vector<FunnelSample> sample_funnel(const Matrix& Q, int disturbance_dim, int count,
                                        std::mt19937_64& rng);
std::vector<FunnelSample> sample_funnel(const Matrix& Q, int disturbance_dim, int count,
                                        std::uint64_t seed);

/// Map q -> p whose differences are measured by the direct ratio.
using PMap = std::function<Vector(const Vector&)>;

/// |p(q) - p(qbar)| / |q - qbar|, or nothing when |q - qbar| < kDeltaQFloor.
std::optional<double> delta_direct(const PMap& p, const Vector& q_bar, const Vector& q);

/// p(q) = h (phi(q) - J q) with J = dphi/dq at q_bar: the part of the
/// nonlinearity left over once the linearization is accounted for, scaled to
/// one step of length h. Used by the direct path so that both paths measure
/// the same quantity.
PMap linearization_remainder(const SystemModel& model, const Vector& q_bar, double h);

/// Closed-loop data of one node used by the indirect ratio.
struct NodeClosedLoop {
  Matrix A_cl;  ///< A + B K
  Matrix C_cl;  ///< C + D K
  Matrix F, G, E;
  Matrix E_pinv;
};

NodeClosedLoop closed_loop(const SystemModel& model, const DiscreteNode& node, const Matrix& K);

/// Minimum-norm Delta with r = E Delta v, r the one-step residual
/// eta_next - A_cl eta - F w and v = C_cl eta + G w: returns |E^+ r| / |v|.
/// Nothing when |v| < kDeltaQFloor. Throws NumericalError when r leaves the
/// range of E by more than 1e-7.
std::optional<double> delta_indirect(const NodeClosedLoop& cl, const Vector& eta,
                                     const Vector& w, const Vector& eta_next);

struct LipschitzEstimate {
  std::vector<double> gamma;                 ///< per node, safety factor applied
  std::vector<std::vector<double>> ratios;   ///< retained ratios per node
  int samples_per_node = 0;
};

/// gamma_k = kappa * max of the retained ratios. Throws NumericalError when a
/// node has none.
LipschitzEstimate estimate_gamma(std::vector<std::vector<double>> ratios, double kappa,
                                 int samples_per_node = 0);

enum class LipschitzMethod { kIndirect, kDirect };

struct LipschitzOptions {
  int samples = 100;
  double safety_factor = 1.1;
  std::uint64_t seed = 0;
  LipschitzMethod method = LipschitzMethod::kIndirect;
};

/// Samples every node of the funnel (Q, K) around the nominal trajectory and
/// estimates gamma_k. `lin` must be the linearization around the same nominal.
LipschitzEstimate estimate_lipschitz(const SystemModel& model, const std::vector<double>& times,
                                     const std::vector<Vector>& states,
                                     const std::vector<Vector>& inputs,
                                     const DiscreteLinearization& lin,
                                     const std::vector<Matrix>& Q, const std::vector<Matrix>& K,
                                     const LipschitzOptions& options,
                                     const DiscretizationOptions& discretization = {});

}  // namespace funnel
