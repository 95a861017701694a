#include <cmath>
#include <iomanip>
#include <ostream>

#include <Eigen/Eigenvalues>

#include "funnel/conic.hpp"

namespace funnel {

namespace {
constexpr double kSqrt2 = 1.41421356237309504880;
}

int svec_index(int side, int i, int j) {
  // column j starts after columns 0..j-1, which hold side, side-1, ... entries
  return j * side - j * (j - 1) / 2 + (i - j);
}

Vector svec_pack(const Matrix& M, double symmetry_tol) {
  require(M.rows() == M.cols(), "svec_pack: matrix must be square");
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  require((M - M.transpose()).cwiseAbs().maxCoeff() <= symmetry_tol * scale,
          "svec_pack: matrix is not symmetric");
  const int n = static_cast<int>(M.rows());
  Vector v(svec_size(n));
  int k = 0;
  for (int j = 0; j < n; ++j) {
    v(k++) = M(j, j);
    for (int i = j + 1; i < n; ++i) v(k++) = kSqrt2 * M(i, j);
  }
  return v;
}

Matrix svec_unpack(const Vector& v) {
  const int n = static_cast<int>(std::lround((std::sqrt(8.0 * v.size() + 1.0) - 1.0) / 2.0));
  require(svec_size(n) == v.size(), "svec_unpack: length is not a triangular number");
  Matrix M(n, n);
  int k = 0;
  for (int j = 0; j < n; ++j) {
    M(j, j) = v(k++);
    for (int i = j + 1; i < n; ++i) {
      M(i, j) = v(k++) / kSqrt2;
      M(j, i) = M(i, j);
    }
  }
  return M;
}

// ---------------------------------------------------------------------------

AffineExpr& AffineExpr::operator+=(const AffineExpr& other) {
  constant += other.constant;
  terms.insert(terms.end(), other.terms.begin(), other.terms.end());
  return *this;
}

AffineExpr& AffineExpr::operator*=(double s) {
  constant *= s;
  for (auto& t : terms) t.second *= s;
  return *this;
}

AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
AffineExpr operator-(AffineExpr a, const AffineExpr& b) {
  AffineExpr nb = b;
  nb *= -1.0;
  return a += nb;
}
AffineExpr operator*(double s, AffineExpr a) { return a *= s; }

// ---------------------------------------------------------------------------

AffineSymMatrix::AffineSymMatrix(int side) : side_(side), constant_(Matrix::Zero(side, side)) {
  require(side > 0, "AffineSymMatrix: side must be positive");
}

void AffineSymMatrix::add_constant(int i, int j, double value) {
  if (i < j) std::swap(i, j);
  require(i < side_ && j >= 0, "AffineSymMatrix: index out of range");
  constant_(i, j) += value;
  if (i != j) constant_(j, i) += value;
}

void AffineSymMatrix::add_term(int i, int j, int var, double coef) {
  if (coef == 0.0) return;
  if (i < j) std::swap(i, j);
  require(i < side_ && j >= 0, "AffineSymMatrix: index out of range");
  terms_.push_back({i, j, var, coef});
}

void AffineSymMatrix::add_constant_block(int row, int col, const Matrix& block) {
  for (Eigen::Index a = 0; a < block.rows(); ++a) {
    for (Eigen::Index b = 0; b < block.cols(); ++b) {
      const int i = row + static_cast<int>(a), j = col + static_cast<int>(b);
      if (i >= j && block(a, b) != 0.0) add_constant(i, j, block(a, b));
    }
  }
}

void AffineSymMatrix::add_variable_block(int row, int col, int var, const Matrix& block) {
  for (Eigen::Index a = 0; a < block.rows(); ++a) {
    for (Eigen::Index b = 0; b < block.cols(); ++b) {
      const int i = row + static_cast<int>(a), j = col + static_cast<int>(b);
      if (i >= j) add_term(i, j, var, block(a, b));
    }
  }
}

Matrix AffineSymMatrix::evaluate(const Vector& x) const {
  Matrix M = constant_;
  for (const Term& t : terms_) {
    M(t.i, t.j) += t.coef * x(t.var);
    if (t.i != t.j) M(t.j, t.i) += t.coef * x(t.var);
  }
  return M;
}

// ---------------------------------------------------------------------------

int ConeProgram::add_variables(int count) {
  require(count >= 0, "add_variables: negative count");
  const int first = num_vars_;
  num_vars_ += count;
  grow_objective();
  return first;
}

void ConeProgram::grow_objective() {
  const auto old = c_.size();
  c_.conservativeResize(num_vars_);
  for (auto i = old; i < num_vars_; ++i) c_(i) = 0.0;
}

void ConeProgram::add_objective(int var, double coef) {
  require(var >= 0 && var < num_vars_, "add_objective: variable out of range");
  c_(var) += coef;
}

void ConeProgram::add_objective(const AffineExpr& expr) {
  c0_ += expr.constant;
  for (const auto& [var, coef] : expr.terms) add_objective(var, coef);
}

namespace {
void check_expr(const AffineExpr& e, int num_vars) {
  for (const auto& [var, coef] : e.terms) {
    require(var >= 0 && var < num_vars, "constraint references unknown variable");
    require(std::isfinite(coef), "constraint has non-finite coefficient");
  }
  require(std::isfinite(e.constant), "constraint has non-finite constant");
}
}  // namespace

void ConeProgram::add_equality(const AffineExpr& expr) {
  check_expr(expr, num_vars_);
  blocks_.push_back({ConeKind::kZero, 1, 0, {expr}});
}

void ConeProgram::add_nonneg(const AffineExpr& expr) {
  check_expr(expr, num_vars_);
  blocks_.push_back({ConeKind::kNonneg, 1, 0, {expr}});
}

void ConeProgram::add_second_order(const std::vector<AffineExpr>& entries) {
  require(!entries.empty(), "add_second_order: empty cone");
  for (const auto& e : entries) check_expr(e, num_vars_);
  blocks_.push_back({ConeKind::kSecondOrder, static_cast<int>(entries.size()), 0, entries});
}

void ConeProgram::add_psd(const AffineSymMatrix& M) {
  const int n = M.side();
  std::vector<AffineExpr> rows(svec_size(n));
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i) {
      const double scale = i == j ? 1.0 : kSqrt2;
      rows[svec_index(n, i, j)].constant = scale * M.constant()(i, j);
    }
  }
  for (const auto& t : M.terms()) {
    require(t.var >= 0 && t.var < num_vars_, "add_psd: unknown variable");
    const double scale = t.i == t.j ? 1.0 : kSqrt2;
    rows[svec_index(n, t.i, t.j)].add(t.var, scale * t.coef);
  }
  blocks_.push_back({ConeKind::kPsd, svec_size(n), n, std::move(rows)});
}

Vector ConeProgram::block_value(std::size_t block, const Vector& x) const {
  const Block& b = blocks_.at(block);
  Vector v(b.dim);
  for (int r = 0; r < b.dim; ++r) {
    double s = b.rows[r].constant;
    for (const auto& [var, coef] : b.rows[r].terms) s += coef * x(var);
    v(r) = s;
  }
  return v;
}

void ConeProgram::write_text(std::ostream& os) const {
  os << std::setprecision(17);
  os << "variables " << num_vars_ << "\n";
  os << "objective " << c0_;
  for (int i = 0; i < num_vars_; ++i) {
    if (c_(i) != 0.0) os << ' ' << i << ':' << c_(i);
  }
  os << "\n";
  for (const Block& b : blocks_) {
    switch (b.kind) {
      case ConeKind::kZero: os << "zero 1\n"; break;
      case ConeKind::kNonneg: os << "nonneg 1\n"; break;
      case ConeKind::kSecondOrder: os << "soc " << b.dim << "\n"; break;
      case ConeKind::kPsd: os << "psd " << b.side << "\n"; break;
    }
    for (const AffineExpr& row : b.rows) {
      os << row.constant;
      for (const auto& [var, coef] : row.terms) os << ' ' << var << ':' << coef;
      os << "\n";
    }
  }
}

double min_cone_margin(const ConeProgram& program, const Vector& x) {
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < program.blocks().size(); ++b) {
    const auto& block = program.blocks()[b];
    const Vector v = program.block_value(b, x);
    switch (block.kind) {
      case ConeKind::kZero: margin = std::min(margin, -std::abs(v(0))); break;
      case ConeKind::kNonneg: margin = std::min(margin, v(0)); break;
      case ConeKind::kSecondOrder:
        margin = std::min(margin, v(0) - v.tail(v.size() - 1).norm());
        break;
      case ConeKind::kPsd: {
        Eigen::SelfAdjointEigenSolver<Matrix> es(svec_unpack(v), Eigen::EigenvaluesOnly);
        margin = std::min(margin, es.eigenvalues().minCoeff());
        break;
      }
    }
  }
  return margin;
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kUnbounded: return "unbounded";
    case SolveStatus::kNumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

}  // namespace funnel
