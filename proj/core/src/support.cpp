#include "funnel/support.hpp"

#include <algorithm>

#include "funnel/linalg.hpp"

namespace funnel {

SupportMatrices assemble_S(const SupportNodeData& d) {
  const auto nx = static_cast<int>(d.A_cl.rows());
  const auto np = static_cast<int>(d.E.cols());
  const auto nw = static_cast<int>(d.F.cols());
  const auto nq = static_cast<int>(d.C_cl.rows());
  require(d.E.rows() == nx && d.F.rows() == nx && d.Q.rows() == nx && d.Q_next.rows() == nx &&
              d.C_cl.cols() == nx && d.G.rows() == nq && d.G.cols() == nw,
          "assemble_S: inconsistent matrix sizes");
  const int ny = nx + np + nw;

  Matrix M(nx, ny);
  M << d.A_cl, d.E, d.F;
  SupportMatrices S;
  S.nx = nx;
  S.np = np;
  S.nw = nw;
  S.S0 = symmetrize(M.transpose() * inverse_spd(d.Q_next) * M);
  S.S1 = Matrix::Zero(ny, ny);
  S.S1.topLeftCorner(nx, nx) = inverse_spd(d.Q);
  S.S3 = Matrix::Zero(ny, ny);
  S.S3.bottomRightCorner(nw, nw).setIdentity();

  Matrix Nm = Matrix::Zero(nq + np, ny);
  Nm.topLeftCorner(nq, nx) = d.C_cl;
  Nm.block(0, nx + np, nq, nw) = d.G;
  Nm.block(nq, nx, np, np).setIdentity();
  Vector weights(nq + np);
  weights << Vector::Constant(nq, -d.gamma * d.gamma), Vector::Ones(np);
  S.S2 = symmetrize(Nm.transpose() * weights.asDiagonal() * Nm);
  return S;
}

SupportDual solve_support_dual(const SupportMatrices& S, const SolverSettings& settings) {
  const auto ny = static_cast<int>(S.S0.rows());
  ConeProgram p;
  const int l = p.add_variables(3);
  const bool use_s2 = S.S2.cwiseAbs().maxCoeff() > 0.0;
  p.add_objective(l + 0, 1.0);
  p.add_objective(l + 2, 1.0);
  p.add_nonneg(AffineExpr::var(l + 0));
  p.add_nonneg(AffineExpr::var(l + 2));
  if (use_s2) {
    p.add_nonneg(AffineExpr::var(l + 1));
  } else {
    p.add_equality(AffineExpr::var(l + 1));
  }
  AffineSymMatrix lmi(ny);  // sum l_i S_i - S0 >= 0
  lmi.add_constant_block(0, 0, -S.S0);
  lmi.add_variable_block(0, 0, l + 0, S.S1);
  if (use_s2) lmi.add_variable_block(0, 0, l + 1, S.S2);
  lmi.add_variable_block(0, 0, l + 2, S.S3);
  p.add_psd(lmi);

  const SolveResult r = solve(p, settings);
  if (r.status != SolveStatus::kOptimal) {
    throw SolveError("support dual returned " + to_string(r.status));
  }
  SupportDual out;
  out.lambda1 = std::max(r.x(l + 0), 0.0);
  out.lambda2 = use_s2 ? std::max(r.x(l + 1), 0.0) : 0.0;
  out.lambda3 = std::max(r.x(l + 2), 0.0);
  out.beta_hat = out.lambda1 + out.lambda3;
  out.residual = max_eigenvalue(S.S0 - out.lambda1 * S.S1 - out.lambda2 * S.S2 -
                                out.lambda3 * S.S3);
  out.solver_iterations = r.iterations;
  return out;
}

BetaSequence beta_recursion(const std::vector<double>& beta_hat, double alpha) {
  require(!beta_hat.empty(), "beta_recursion: need at least one beta_hat");
  require(alpha > 0.0 && alpha <= 1.0, "beta_recursion: alpha must lie in (0, 1]");
  BetaSequence out;
  out.alpha = alpha;
  out.beta_hat = beta_hat;
  out.beta.push_back(1.0);
  out.beta.push_back(beta_hat[0]);
  const std::vector<double> rest = continue_beta_recursion(
      beta_hat[0], std::vector<double>(beta_hat.begin() + 1, beta_hat.end()), alpha);
  out.beta.insert(out.beta.end(), rest.begin(), rest.end());
  return out;
}

std::vector<double> continue_beta_recursion(double carried, const std::vector<double>& beta_hat,
                                            double alpha) {
  std::vector<double> out;
  out.reserve(beta_hat.size());
  double b = carried;
  for (double bh : beta_hat) {
    b = std::max(alpha * b, bh);
    out.push_back(b);
  }
  return out;
}

Funnel apply_support_scaling(const Funnel& funnel, const std::vector<double>& beta) {
  funnel.check();
  require(beta.size() == funnel.Q.size(), "apply_support_scaling: need one beta per node");
  Funnel out = funnel;
  for (std::size_t k = 0; k < beta.size(); ++k) {
    require(beta[k] >= 0.0, "apply_support_scaling: beta must be nonnegative");
    out.Q[k] = beta[k] * funnel.Q[k];
  }
  for (std::size_t k = 0; k < out.K.size(); ++k) out.Y[k] = out.K[k] * out.Q[k];
  out.beta.assign(beta.size(), 1.0);
  return out;
}

std::vector<SupportDual> support_duals(const FunnelProblem& problem, const Funnel& funnel,
                                       const SolverSettings& settings) {
  funnel.check();
  const int N = problem.intervals();
  require(funnel.intervals() == N, "support_duals: funnel and problem disagree on N");
  std::vector<SupportDual> out;
  out.reserve(N);
  for (int k = 0; k < N; ++k) {
    const DiscreteNode& node = problem.lin.nodes[k];
    SupportNodeData d;
    d.A_cl = node.A + node.B * funnel.K[k];
    d.E = problem.E;
    d.F = node.F;
    d.C_cl = problem.C + problem.D * funnel.K[k];
    d.G = problem.G;
    d.Q = funnel.Q[k];
    d.Q_next = funnel.Q[k + 1];
    d.gamma = problem.gamma[k];
    try {
      out.push_back(solve_support_dual(assemble_S(d), settings));
    } catch (const Error& e) {
      throw SolveError("support dual at node " + std::to_string(k) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace funnel
