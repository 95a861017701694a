#include "funnel/verify.hpp"

#include <algorithm>
#include <limits>

#include "funnel/linalg.hpp"
#include "funnel/lipschitz.hpp"

namespace funnel {

RolloutPath rollout(const SystemModel& model, const Trajectory& nominal, const Funnel& funnel,
                    const Vector& eta0, const std::vector<Vector>& disturbances,
                    const DiscretizationOptions& integration) {
  nominal.check();
  funnel.check();
  const int N = nominal.intervals();
  require(funnel.intervals() == N, "rollout: funnel and trajectory disagree on N");
  require(static_cast<int>(disturbances.size()) == N, "rollout: need one disturbance per interval");
  require(eta0.size() == model.state_dim(), "rollout: eta0 has the wrong size");
  const double v0 = eta0.dot(inverse_spd(funnel.certified_shape(0)) * eta0);
  require(v0 <= 1.0 + 1e-9, "rollout: eta0 lies outside the initial funnel set");

  RolloutPath path;
  path.states.push_back(nominal.states[0] + eta0);
  for (int k = 0; k < N; ++k) {
    const Vector eta = path.states[k] - nominal.states[k];
    const Vector u = nominal.inputs[k] + funnel.K[k] * eta;
    path.inputs.push_back(u);
    path.disturbances.push_back(disturbances[k]);
    path.states.push_back(propagate(model, nominal.times[k], path.states[k], u, disturbances[k],
                                    nominal.times[k + 1] - nominal.times[k], integration));
  }
  return path;
}

double Margins::min() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& row : state)
    for (double v : row) m = std::min(m, v);
  for (const auto& row : input)
    for (double v : row) m = std::min(m, v);
  return m;
}

Margins check_feasibility(const std::vector<Vector>& states, const std::vector<Vector>& inputs,
                          const ConstraintSet& constraints) {
  Margins m;
  for (const Vector& x : states) {
    std::vector<double> row;
    for (const ScalarConstraint& c : constraints.state) row.push_back(-c.value(x));
    m.state.push_back(std::move(row));
  }
  for (const Vector& u : inputs) {
    std::vector<double> row;
    for (const ScalarConstraint& c : constraints.input) row.push_back(-c.value(u));
    m.input.push_back(std::move(row));
  }
  return m;
}

namespace {

// Rollout where each disturbance is chosen from the state reached so far.
RolloutPath worst_case_rollout(const SystemModel& model, const Trajectory& nominal,
                               const Funnel& funnel, const Vector& eta0,
                               const DiscretizationOptions& integration, std::mt19937_64& rng) {
  const int N = nominal.intervals();
  const int nw = model.disturbance_dim();
  RolloutPath path;
  path.states.push_back(nominal.states[0] + eta0);
  for (int k = 0; k < N; ++k) {
    const double h = nominal.times[k + 1] - nominal.times[k];
    const Vector eta = path.states[k] - nominal.states[k];
    const Vector u = nominal.inputs[k] + funnel.K[k] * eta;
    const DiscreteNode node =
        discretize_zoh(model, nominal.times[k], nominal.states[k], nominal.inputs[k], h, integration);
    const Vector pred = (node.A + node.B * funnel.K[k]) * eta;
    Vector w = node.F.transpose() * (inverse_spd(funnel.certified_shape(k + 1)) * pred);
    if (w.norm() > 1e-12) {
      w.normalize();
    } else {
      w = sample_unit_sphere(rng, nw);
    }
    path.inputs.push_back(u);
    path.disturbances.push_back(w);
    path.states.push_back(propagate(model, nominal.times[k], path.states[k], u, w, h, integration));
  }
  return path;
}

}  // namespace

VerificationReport verify_funnel(const SystemModel& model, const Trajectory& nominal,
                                 const Funnel& funnel, const ConstraintSet& constraints,
                                 const VerifyOptions& options) {
  require(options.samples >= 1, "verification needs at least one sample");
  nominal.check();
  funnel.check();
  const int N = nominal.intervals();
  const int nx = model.state_dim(), nw = model.disturbance_dim();

  std::vector<Matrix> shape_inv;
  for (int k = 0; k <= N; ++k) shape_inv.push_back(inverse_spd(funnel.certified_shape(k)));
  const Matrix root0 = sqrtm_psd(funnel.certified_shape(0));

  VerificationReport report;
  report.samples = options.samples;
  report.min_margin = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(options.seed);
  for (int s = 0; s < options.samples; ++s) {
    SampleRecord rec;
    rec.eta0 = root0 * sample_unit_sphere(rng, nx);
    try {
      if (options.disturbance == DisturbanceMode::kWorstCase) {
        rec.path = worst_case_rollout(model, nominal, funnel, rec.eta0, options.integration, rng);
      } else {
        std::vector<Vector> w;
        for (int k = 0; k < N; ++k) w.push_back(sample_unit_sphere(rng, nw));
        rec.path = rollout(model, nominal, funnel, rec.eta0, w, options.integration);
      }
    } catch (const NumericalError& e) {
      throw NumericalError("rollout of sample " + std::to_string(s) + ": " + e.what());
    }
    for (int k = 0; k <= N; ++k) {
      const Vector eta = rec.path.states[k] - nominal.states[k];
      const double c = eta.dot(shape_inv[k] * eta);
      rec.containment.push_back(c);
      if (c > 1.0 + options.containment_tol) rec.contained = false;
      if (c > report.worst_containment) {
        report.worst_containment = c;
        report.worst_sample = s;
        report.worst_node = k;
      }
    }
    rec.margins = check_feasibility(rec.path.states, rec.path.inputs, constraints);
    const double m = rec.margins.min();
    rec.feasible = m >= -options.margin_tol;
    report.min_margin = std::min(report.min_margin, m);
    report.contained_count += rec.contained ? 1 : 0;
    report.feasible_count += rec.feasible ? 1 : 0;
    report.records.push_back(std::move(rec));
  }
  report.passed =
      report.contained_count == options.samples && report.feasible_count == options.samples;
  return report;
}

}  // namespace funnel
