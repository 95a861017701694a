#include "funnel/funnelopt.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Cholesky>

#include "funnel/linalg.hpp"

namespace funnel {

void Funnel::check() const {
  const auto N = K.size();
  require(N >= 1, "funnel needs at least one interval");
  require(Q.size() == N + 1 && Y.size() == N && beta.size() == N + 1,
          "funnel needs N+1 shapes and betas and N gains");
}

Funnel Funnel::from_gains(std::vector<Matrix> Q, std::vector<Matrix> K) {
  Funnel f;
  f.Q = std::move(Q);
  f.K = std::move(K);
  for (std::size_t k = 0; k < f.K.size(); ++k) f.Y.push_back(f.K[k] * f.Q[k]);
  f.beta.assign(f.Q.size(), 1.0);
  f.check();
  return f;
}

Matrix gain_from(const Matrix& Y, const Matrix& Q) {
  Eigen::LLT<Matrix> llt(symmetrize(Q));
  if (llt.info() != Eigen::Success) throw NumericalError("gain_from: Q is not positive definite");
  return llt.solve(Y.transpose()).transpose();
}

int SymMatrixVar::index(int i, int j) const {
  if (i < j) std::swap(i, j);
  return first + svec_index(side, i, j);
}

SymMatrixVar SymMatrixVar::add(ConeProgram& p, int side) {
  return {p.add_variables(svec_size(side)), side};
}

Matrix SymMatrixVar::value(const Vector& x) const {
  Matrix M(side, side);
  for (int j = 0; j < side; ++j)
    for (int i = j; i < side; ++i) M(i, j) = M(j, i) = x(index(i, j));
  return M;
}

DenseMatrixVar DenseMatrixVar::add(ConeProgram& p, int rows, int cols) {
  return {p.add_variables(rows * cols), rows, cols};
}

Matrix DenseMatrixVar::value(const Vector& x) const {
  Matrix M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = x(index(i, j));
  return M;
}

namespace {

// Adds scale * Q at the diagonal block starting at `offset`.
void add_sym_block(AffineSymMatrix& M, int offset, const SymMatrixVar& Q, double scale) {
  for (int j = 0; j < Q.side; ++j)
    for (int i = j; i < Q.side; ++i) M.add_term(offset + i, offset + j, Q.index(i, j), scale);
}

// Adds L * Q at (row, col); the block must lie strictly below the diagonal.
void add_left_product(AffineSymMatrix& M, int row, int col, const Matrix& L,
                      const SymMatrixVar& Q) {
  for (int i = 0; i < L.rows(); ++i)
    for (int j = 0; j < Q.side; ++j)
      for (int l = 0; l < Q.side; ++l)
        if (L(i, l) != 0.0) M.add_term(row + i, col + j, Q.index(l, j), L(i, l));
}

// Adds L * Y at (row, col) for a dense variable Y.
void add_left_product(AffineSymMatrix& M, int row, int col, const Matrix& L,
                      const DenseMatrixVar& Y) {
  for (int i = 0; i < L.rows(); ++i)
    for (int j = 0; j < Y.cols; ++j)
      for (int l = 0; l < Y.rows; ++l)
        if (L(i, l) != 0.0) M.add_term(row + i, col + j, Y.index(l, j), L(i, l));
}

}  // namespace

AffineSymMatrix build_node_lmi(const NodeLmiData& d, const NodeLmiVars& v, double alpha,
                               double lambda_w, double gamma, std::string* warning) {
  const auto nx = static_cast<int>(d.A.rows());
  const auto nw = static_cast<int>(d.F.cols());
  const auto np = static_cast<int>(d.E.cols());
  const auto nq = static_cast<int>(d.C.rows());
  require(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
  require(lambda_w > 0.0, "lambda_w must be positive");
  require(d.E.rows() == nx && d.C.cols() == nx && d.D.rows() == nq && d.G.rows() == nq &&
              d.G.cols() == nw && d.B.rows() == nx && d.D.cols() == d.B.cols(),
          "node LMI: inconsistent matrix sizes");
  require((np == 0) == (nq == 0), "node LMI: nonlinearity needs both p and q dimensions");
  const bool nonlinear = np > 0;
  if (nonlinear) {
    require(v.nu_p >= 0, "node LMI: nonlinearity needs a nu_p variable");
    require(std::isfinite(gamma), "node LMI: gamma must be finite");
    if (gamma < kGammaFloor) {
      if (warning) *warning = "gamma " + std::to_string(gamma) + " clamped to floor";
      gamma = kGammaFloor;
    }
  }

  const int o_eta = 0, o_p = nx, o_w = o_p + (nonlinear ? np : 0), o_next = o_w + nw,
            o_q = o_next + nx;
  const int side = o_q + (nonlinear ? nq : 0);
  AffineSymMatrix M(side);

  add_sym_block(M, o_eta, v.Q, alpha - lambda_w);
  for (int i = 0; i < nw; ++i) M.add_constant(o_w + i, o_w + i, lambda_w);
  add_left_product(M, o_next, o_eta, d.A, v.Q);
  add_left_product(M, o_next, o_eta, d.B, v.Y);
  M.add_constant_block(o_next, o_w, d.F);
  add_sym_block(M, o_next, v.Q_next, 1.0);
  if (nonlinear) {
    for (int i = 0; i < np; ++i) M.add_term(o_p + i, o_p + i, v.nu_p, 1.0);
    M.add_variable_block(o_next, o_p, v.nu_p, d.E);
    add_left_product(M, o_q, o_eta, d.C, v.Q);
    add_left_product(M, o_q, o_eta, d.D, v.Y);
    M.add_constant_block(o_q, o_w, d.G);
    for (int i = 0; i < nq; ++i) M.add_term(o_q + i, o_q + i, v.nu_p, 1.0 / (gamma * gamma));
  }
  return M;
}

Matrix node_lmi_value(const NodeLmiData& data, const Matrix& Q, const Matrix& Q_next,
                      const Matrix& Y, double nu_p, double alpha, double lambda_w, double gamma) {
  const auto nx = static_cast<int>(data.A.rows());
  const auto nu = static_cast<int>(data.B.cols());
  ConeProgram scratch;
  NodeLmiVars v;
  v.Q = SymMatrixVar::add(scratch, nx);
  v.Q_next = SymMatrixVar::add(scratch, nx);
  v.Y = DenseMatrixVar::add(scratch, nu, nx);
  v.nu_p = scratch.add_variables(1);
  Vector x(scratch.num_variables());
  for (int j = 0; j < nx; ++j) {
    for (int i = j; i < nx; ++i) {
      x(v.Q.index(i, j)) = Q(i, j);
      x(v.Q_next.index(i, j)) = Q_next(i, j);
    }
  }
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nx; ++j) x(v.Y.index(i, j)) = Y(i, j);
  x(v.nu_p) = nu_p;
  return build_node_lmi(data, v, alpha, lambda_w, gamma).evaluate(x);
}

int FunnelProblem::state_dim() const {
  require(!lin.nodes.empty(), "funnel problem has no nodes");
  return static_cast<int>(lin.nodes[0].A.rows());
}

FunnelProblem FunnelProblem::from_model(const SystemModel& model, DiscreteLinearization lin) {
  const Decomposition& d = model.decomposition();
  FunnelProblem p;
  p.lin = std::move(lin);
  p.E = d.E;
  p.C = d.C;
  p.D = d.D;
  p.G = d.G;
  return p;
}

namespace {

struct SdpLayout {
  std::vector<SymMatrixVar> Q;
  std::vector<DenseMatrixVar> Y;
  std::vector<int> nu, mu, nu_p, tq, ty;
};

void check_problem(const FunnelProblem& pr) {
  const int N = pr.intervals();
  require(N >= 1, "funnel problem needs at least one interval");
  require(static_cast<int>(pr.gamma.size()) == N, "funnel problem needs one gamma per interval");
  require(pr.alpha > 0.0 && pr.alpha <= 1.0, "alpha must lie in (0, 1]");
  require(pr.trust_weight >= 0.0, "funnel trust-region weight must be nonnegative");
  if (pr.trust_weight > 0.0) {
    require(static_cast<int>(pr.reference.Q.size()) == N + 1 &&
                static_cast<int>(pr.reference.Y.size()) == N,
            "funnel trust region needs a reference with N+1 shapes and N gains");
  }
}

SdpLayout assemble(ConeProgram& p, const FunnelProblem& pr, double lambda_w,
                   std::vector<std::string>* warnings) {
  check_problem(pr);
  const int N = pr.intervals();
  const int nx = pr.state_dim();
  const auto nu = static_cast<int>(pr.lin.nodes[0].B.cols());
  const bool nonlinear = pr.E.cols() > 0;

  SdpLayout L;
  for (int k = 0; k <= N; ++k) L.Q.push_back(SymMatrixVar::add(p, nx));
  for (int k = 0; k < N; ++k) L.Y.push_back(DenseMatrixVar::add(p, nu, nx));
  for (int k = 0; k <= N; ++k) L.nu.push_back(p.add_variables(1));
  for (int k = 0; k < N; ++k) L.mu.push_back(p.add_variables(1));
  if (nonlinear) {
    for (int k = 0; k < N; ++k) L.nu_p.push_back(p.add_variables(1));
  }
  const bool trust = pr.trust_weight > 0.0;
  if (trust) {
    for (int k = 0; k < N; ++k) {
      L.tq.push_back(p.add_variables(1));
      L.ty.push_back(p.add_variables(1));
    }
  }

  // nu_N + sum (nu_k + mu_k) + w_trf sum (|Q_k - Qhat_k|_F + |Y_k - Yhat_k|_F)
  p.add_objective(L.nu[N], 1.0);
  for (int k = 0; k < N; ++k) {
    p.add_objective(L.nu[k], 1.0);
    p.add_objective(L.mu[k], 1.0);
    if (trust) {
      p.add_objective(L.tq[k], pr.trust_weight);
      p.add_objective(L.ty[k], pr.trust_weight);
    }
  }

  const Matrix I = Matrix::Identity(nx, nx);
  for (int k = 0; k <= N; ++k) {
    AffineSymMatrix upper(nx);  // nu I - Q
    add_sym_block(upper, 0, L.Q[k], -1.0);
    upper.add_variable_block(0, 0, L.nu[k], I);
    p.add_psd(upper);

    AffineSymMatrix lower(nx);  // Q - eps I
    add_sym_block(lower, 0, L.Q[k], 1.0);
    lower.add_constant_block(0, 0, -kPsdMargin * I);
    p.add_psd(lower);
  }

  for (int k = 0; k < N; ++k) {
    AffineSymMatrix schur(nu + nx);  // [mu I, Y; Y', Q]
    schur.add_variable_block(0, 0, L.mu[k], Matrix::Identity(nu, nu));
    for (int i = 0; i < nu; ++i)
      for (int j = 0; j < nx; ++j) schur.add_term(nu + j, i, L.Y[k].index(i, j), 1.0);
    add_sym_block(schur, nu, L.Q[k], 1.0);
    p.add_psd(schur);
  }

  for (int k = 0; k < N; ++k) {
    const DiscreteNode& node = pr.lin.nodes[k];
    NodeLmiData data{node.A, node.B, node.F, pr.E, pr.C, pr.D, pr.G};
    NodeLmiVars v{L.Q[k], L.Q[k + 1], L.Y[k], nonlinear ? L.nu_p[k] : -1};
    std::string warning;
    p.add_psd(build_node_lmi(data, v, pr.alpha, lambda_w, pr.gamma[k], &warning));
    if (!warning.empty() && warnings) warnings->push_back("node " + std::to_string(k) + ": " + warning);
  }

  if (pr.Q_initial.size() > 0) {  // Q_0 - Q_i >= 0
    require(pr.Q_initial.rows() == nx && pr.Q_initial.cols() == nx, "Q_initial size mismatch");
    AffineSymMatrix m(nx);
    add_sym_block(m, 0, L.Q[0], 1.0);
    m.add_constant_block(0, 0, -pr.Q_initial);
    p.add_psd(m);
  }
  if (pr.Q_final.size() > 0) {  // Q_f - Q_N >= 0
    require(pr.Q_final.rows() == nx && pr.Q_final.cols() == nx, "Q_final size mismatch");
    AffineSymMatrix m(nx);
    add_sym_block(m, 0, L.Q[N], -1.0);
    m.add_constant_block(0, 0, pr.Q_final);
    p.add_psd(m);
  }

  if (trust) {
    const double r2 = std::sqrt(2.0);
    for (int k = 0; k < N; ++k) {
      std::vector<AffineExpr> cq{AffineExpr::var(L.tq[k])};
      const Matrix& Qh = pr.reference.Q[k];
      for (int j = 0; j < nx; ++j) {
        for (int i = j; i < nx; ++i) {
          const double s = i == j ? 1.0 : r2;
          cq.push_back(s * (AffineExpr::var(L.Q[k].index(i, j)) - Qh(i, j)));
        }
      }
      p.add_second_order(cq);
      std::vector<AffineExpr> cy{AffineExpr::var(L.ty[k])};
      const Matrix& Yh = pr.reference.Y[k];
      for (int i = 0; i < nu; ++i)
        for (int j = 0; j < nx; ++j) cy.push_back(AffineExpr::var(L.Y[k].index(i, j)) - Yh(i, j));
      p.add_second_order(cy);
    }
  }
  return L;
}

std::string gamma_summary(const std::vector<double>& gamma) {
  std::ostringstream os;
  os << "gamma = [";
  for (std::size_t k = 0; k < gamma.size(); ++k) os << (k ? ", " : "") << gamma[k];
  os << "]";
  return os.str();
}

}  // namespace

ConeProgram build_funnel_sdp(const FunnelProblem& problem, double lambda_w,
                             std::vector<std::string>* warnings) {
  ConeProgram p;
  assemble(p, problem, lambda_w, warnings);
  return p;
}

FunnelSolution solve_funnel_sdp(const FunnelProblem& problem, double lambda_w,
                                const SolverSettings& settings) {
  ConeProgram p;
  FunnelSolution out;
  const SdpLayout L = assemble(p, problem, lambda_w, &out.warnings);
  const SolveResult r = solve(p, settings);
  if (r.status != SolveStatus::kOptimal) {
    throw SolveError("funnel SDP with lambda_w = " + std::to_string(lambda_w) + " returned " +
                     to_string(r.status) + "; " + gamma_summary(problem.gamma) +
                     "; try a smaller alpha or a different lambda_w grid");
  }
  const int N = problem.intervals();
  std::vector<Matrix> Q, Y, K;
  for (int k = 0; k <= N; ++k) Q.push_back(L.Q[k].value(r.x));
  for (int k = 0; k < N; ++k) {
    Y.push_back(L.Y[k].value(r.x));
    K.push_back(gain_from(Y.back(), Q[k]));
  }
  out.funnel.Q = std::move(Q);
  out.funnel.Y = std::move(Y);
  out.funnel.K = std::move(K);
  out.funnel.beta.assign(N + 1, 1.0);
  for (int k = 0; k <= N; ++k) out.nu.push_back(r.x(L.nu[k]));
  for (int k = 0; k < N; ++k) out.mu.push_back(r.x(L.mu[k]));
  for (int idx : L.nu_p) out.nu_p.push_back(r.x(idx));
  out.objective = r.objective;
  out.lambda_w = lambda_w;
  out.solver_iterations = r.iterations;
  return out;
}

FunnelSolution lambda_w_grid_search(const FunnelProblem& problem,
                                    const std::vector<double>& candidates,
                                    const SolverSettings& settings) {
  require(!candidates.empty(), "lambda_w grid must not be empty");
  std::vector<double> objectives;
  FunnelSolution best;
  bool found = false;
  std::string last_error;
  for (double lw : candidates) {
    require(lw > 0.0 && lw < problem.alpha, "lambda_w candidates must lie in (0, alpha)");
    try {
      FunnelSolution s = solve_funnel_sdp(problem, lw, settings);
      objectives.push_back(s.objective);
      if (!found || s.objective < best.objective) {
        best = std::move(s);
        found = true;
      }
    } catch (const SolveError& e) {
      objectives.push_back(std::numeric_limits<double>::quiet_NaN());
      last_error = e.what();
    }
  }
  if (!found) throw SolveError("funnel update failed for every lambda_w: " + last_error);
  best.candidate_objectives = std::move(objectives);
  return best;
}

}  // namespace funnel
