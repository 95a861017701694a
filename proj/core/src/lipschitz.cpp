#include "funnel/lipschitz.hpp"

#include <algorithm>
#include <cmath>

#include "funnel/linalg.hpp"

namespace funnel {

std::mt19937_64 node_stream(std::uint64_t seed, int node) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(node), 0x9e3779b9u};
  return std::mt19937_64(seq);
}

Vector sample_unit_sphere(std::mt19937_64& rng, int n) {
  require(n >= 1, "sample_unit_sphere: dimension must be positive");
  std::normal_distribution<double> normal;
  for (;;) {
    Vector d(n);
    for (int i = 0; i < n; ++i) d(i) = normal(rng);
    const double norm = d.norm();
    if (norm > 1e-12) return d / norm;
  }
}

Vector sample_unit_ball(std::mt19937_64& rng, int n) {
  const Vector d = sample_unit_sphere(rng, n);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  return std::pow(uniform(rng), 1.0 / n) * d;
}

std::vector<FunnelSample> sample_funnel(const Matrix& Q, int disturbance_dim, int count,
                                        std::mt19937_64& rng) {
  require(Q.rows() == Q.cols() && Q.rows() > 0, "sample_funnel: Q must be square");
  require(count >= 0, "sample_funnel: negative count");
  const Matrix root = sqrtm_psd(Q);
  const auto n = static_cast<int>(Q.rows());
  std::vector<FunnelSample> out;
  out.reserve(count);
  for (int s = 0; s < count; ++s) {
    FunnelSample sample;
    sample.eta = root * sample_unit_sphere(rng, n);
    sample.w = disturbance_dim > 0 ? sample_unit_ball(rng, disturbance_dim) : Vector();
    out.push_back(std::move(sample));
  }
  return out;
}

std::vector<FunnelSample> sample_funnel(const Matrix& Q, int disturbance_dim, int count,
                                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_funnel(Q, disturbance_dim, count, rng);
}

std::optional<double> delta_direct(const PMap& p, const Vector& q_bar, const Vector& q) {
  require(q.size() == q_bar.size(), "delta_direct: q size mismatch");
  const double dq = (q - q_bar).norm();
  if (dq < kDeltaQFloor) return std::nullopt;
  return (p(q) - p(q_bar)).norm() / dq;
}

PMap linearization_remainder(const SystemModel& model, const Vector& q_bar, double h) {
  const Matrix J = model.phi_jacobian(q_bar);
  return [&model, J, h](const Vector& q) -> Vector { return h * (model.phi(q) - J * q); };
}

NodeClosedLoop closed_loop(const SystemModel& model, const DiscreteNode& node, const Matrix& K) {
  const Decomposition& d = model.decomposition();
  NodeClosedLoop cl;
  cl.A_cl = node.A + node.B * K;
  cl.C_cl = d.C + d.D * K;
  cl.F = node.F;
  cl.G = d.G;
  cl.E = d.E;
  cl.E_pinv = pseudo_inverse(d.E);
  return cl;
}

std::optional<double> delta_indirect(const NodeClosedLoop& cl, const Vector& eta,
                                     const Vector& w, const Vector& eta_next) {
  const Vector v = cl.C_cl * eta + cl.G * w;
  const Vector r = eta_next - cl.A_cl * eta - cl.F * w;
  const Vector p = cl.E_pinv * r;
  const double off_range = (r - cl.E * p).norm();
  if (off_range > 1e-7) {
    throw NumericalError("one-step residual leaves the range of E by " +
                         std::to_string(off_range));
  }
  const double vn = v.norm();
  if (vn < kDeltaQFloor) return std::nullopt;
  return p.norm() / vn;
}

LipschitzEstimate estimate_gamma(std::vector<std::vector<double>> ratios, double kappa,
                                 int samples_per_node) {
  require(kappa > 0.0, "Lipschitz safety factor must be positive");
  LipschitzEstimate out;
  out.samples_per_node = samples_per_node;
  out.gamma.reserve(ratios.size());
  for (std::size_t k = 0; k < ratios.size(); ++k) {
    if (ratios[k].empty()) {
      throw NumericalError("Lipschitz estimate at node " + std::to_string(k) +
                           " has no usable samples");
    }
    out.gamma.push_back(kappa * *std::max_element(ratios[k].begin(), ratios[k].end()));
  }
  out.ratios = std::move(ratios);
  return out;
}

LipschitzEstimate estimate_lipschitz(const SystemModel& model, const std::vector<double>& times,
                                     const std::vector<Vector>& states,
                                     const std::vector<Vector>& inputs,
                                     const DiscreteLinearization& lin,
                                     const std::vector<Matrix>& Q, const std::vector<Matrix>& K,
                                     const LipschitzOptions& options,
                                     const DiscretizationOptions& discretization) {
  const auto N = static_cast<int>(inputs.size());
  require(lin.size() == N && static_cast<int>(K.size()) == N &&
              static_cast<int>(Q.size()) >= N && static_cast<int>(states.size()) == N + 1 &&
              static_cast<int>(times.size()) == N + 1,
          "estimate_lipschitz: inconsistent node counts");
  require(options.samples >= 1, "Lipschitz sample count must be positive");
  const int nw = model.disturbance_dim();
  const Vector w0 = Vector::Zero(nw);

  std::vector<std::vector<double>> ratios(N);
  for (int k = 0; k < N; ++k) {
    std::mt19937_64 rng = node_stream(options.seed, k);
    const std::vector<FunnelSample> samples = sample_funnel(Q[k], nw, options.samples, rng);
    const double h = times[k + 1] - times[k];
    try {
      if (options.method == LipschitzMethod::kIndirect) {
        const NodeClosedLoop cl = closed_loop(model, lin.nodes[k], K[k]);
        for (const FunnelSample& s : samples) {
          const Vector x = states[k] + s.eta;
          const Vector u = inputs[k] + K[k] * s.eta;
          const Vector next = propagate(model, times[k], x, u, s.w, h, discretization);
          const Vector eta_next = next - lin.nodes[k].next_state;
          if (auto d = delta_indirect(cl, s.eta, s.w, eta_next)) ratios[k].push_back(*d);
        }
      } else {
        const Vector q_bar = nonlinearity_q(model, states[k], inputs[k], w0);
        const PMap p = linearization_remainder(model, q_bar, h);
        for (const FunnelSample& s : samples) {
          const Vector q =
              nonlinearity_q(model, states[k] + s.eta, inputs[k] + K[k] * s.eta, s.w);
          if (auto d = delta_direct(p, q_bar, q)) ratios[k].push_back(*d);
        }
      }
    } catch (const NumericalError& e) {
      throw NumericalError("Lipschitz estimate at node " + std::to_string(k) + ": " + e.what());
    }
  }
  return estimate_gamma(std::move(ratios), options.safety_factor, options.samples);
}

}  // namespace funnel
