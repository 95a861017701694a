#pragma once

#include <vector>

#include "funnel/common.hpp"
#include "funnel/conic.hpp"
#include "funnel/funnelopt.hpp"

namespace funnel {

/// Quadratic forms over y = (eta, dp, w) describing one step of the
/// difference dynamics:
///   S0 = M' Q_next^-1 M,  M = [A_cl E F]
///   S1 = blkdiag(Q^-1, 0, 0),  S3 = blkdiag(0, 0, I)
///   S2 = N' diag(-gamma^2 I, I) N,  N = [[C_cl 0 G]; [0 I 0]]
struct SupportMatrices {
  Matrix S0, S1, S2, S3;
  int nx = 0, np = 0, nw = 0;
};

struct SupportNodeData {
  Matrix A_cl, E, F;
  Matrix C_cl, G;
  Matrix Q, Q_next;
  double gamma = 0.0;
};

SupportMatrices assemble_S(const SupportNodeData& node);

struct SupportDual {
  double beta_hat = 0.0;
  double lambda1 = 0.0, lambda2 = 0.0, lambda3 = 0.0;
  /// Largest eigenvalue of S0 - sum lambda_i S_i at the returned multipliers.
  double residual = 0.0;
  int solver_iterations = 0;
};

/// minimize l1 + l3 s.t. l >= 0, S0 - sum l_i S_i <= 0. Throws SolveError when
/// the solver fails.
SupportDual solve_support_dual(const SupportMatrices& S, const SolverSettings& settings = {});

struct BetaSequence {
  std::vector<double> beta;      ///< k = 0..N
  std::vector<double> beta_hat;  ///< k = 1..N, stored at index k-1
  double alpha = 1.0;
};

/// beta_0 = 1, beta_1 = beta_hat_1, beta_{k+1} = max(alpha beta_k, beta_hat_{k+1}).
BetaSequence beta_recursion(const std::vector<double>& beta_hat, double alpha);

/// Continues a recursion from a carried beta value (the last entry of an
/// earlier sequence) over more beta_hat values; returns only the new entries.
std::vector<double> continue_beta_recursion(double carried, const std::vector<double>& beta_hat,
                                            double alpha);

/// Q_k <- beta_k Q_k with K unchanged and Y refreshed to K Q. The result
/// carries beta = 1.
Funnel apply_support_scaling(const Funnel& funnel, const std::vector<double>& beta);

/// Support duals for every node of a funnel around a linearization.
std::vector<SupportDual> support_duals(const FunnelProblem& problem, const Funnel& funnel,
                                       const SolverSettings& settings = {});

}  // namespace funnel
