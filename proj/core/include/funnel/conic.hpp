#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "funnel/common.hpp"

namespace funnel {

/// Scaled lower-triangular vectorization: column-major lower triangle with
/// off-diagonal entries multiplied by sqrt(2), so <M,N> = svec(M).svec(N).
Vector svec_pack(const Matrix& M, double symmetry_tol = 1e-12);
Matrix svec_unpack(const Vector& v);
/// n(n+1)/2
inline int svec_size(int side) { return side * (side + 1) / 2; }
/// Position of entry (i, j) with i >= j in the packed vector.
int svec_index(int side, int i, int j);

/// const + sum_k coef_k * x[var_k]
struct AffineExpr {
  double constant = 0.0;
  std::vector<std::pair<int, double>> terms;

  AffineExpr() = default;
  AffineExpr(double c) : constant(c) {}  // NOLINT(google-explicit-constructor)
  static AffineExpr var(int index, double coef = 1.0) {
    AffineExpr e;
    e.terms.emplace_back(index, coef);
    return e;
  }
  AffineExpr& add(int index, double coef) {
    terms.emplace_back(index, coef);
    return *this;
  }
  AffineExpr& operator+=(const AffineExpr& other);
  AffineExpr& operator*=(double s);
};

AffineExpr operator+(AffineExpr a, const AffineExpr& b);
AffineExpr operator-(AffineExpr a, const AffineExpr& b);
AffineExpr operator*(double s, AffineExpr a);

/// Symmetric matrix affine in the decision variables. Entries are addressed by
/// their lower-triangular position (i >= j); the upper part mirrors them.
class AffineSymMatrix {
 public:
  explicit AffineSymMatrix(int side);

  int side() const { return side_; }
  /// Adds `value` to the constant part at (i, j), mirrored.
  void add_constant(int i, int j, double value);
  /// Adds coef * x[var] at (i, j), mirrored.
  void add_term(int i, int j, int var, double coef);
  /// Adds a constant block with top-left corner (row, col). Blocks on the
  /// diagonal must be symmetric; only their lower triangle is read.
  void add_constant_block(int row, int col, const Matrix& block);
  /// Adds x[var] * block at (row, col).
  void add_variable_block(int row, int col, int var, const Matrix& block);

  const Matrix& constant() const { return constant_; }
  /// (packed index, var, coef) with the sqrt(2) svec scaling not yet applied.
  struct Term {
    int i, j, var;
    double coef;
  };
  const std::vector<Term>& terms() const { return terms_; }

  /// Numeric value for a given decision vector.
  Matrix evaluate(const Vector& x) const;

 private:
  int side_;
  Matrix constant_;
  std::vector<Term> terms_;
};

enum class ConeKind { kZero, kNonneg, kSecondOrder, kPsd };

/// A conic program
///   minimize c'x  s.t.  each constraint block's affine value lies in its cone.
/// Zero-cone rows are equalities; second-order blocks read (t, y) with t >= |y|.
class ConeProgram {
 public:
  int num_variables() const { return num_vars_; }
  /// Appends `count` variables and returns the index of the first one.
  int add_variables(int count);

  void add_objective(int var, double coef);
  void add_objective(const AffineExpr& expr);
  const Vector& objective() const { return c_; }
  double objective_constant() const { return c0_; }

  /// expr == 0
  void add_equality(const AffineExpr& expr);
  /// expr >= 0
  void add_nonneg(const AffineExpr& expr);
  /// entries[0] >= || entries[1..] ||_2
  void add_second_order(const std::vector<AffineExpr>& entries);
  /// M(x) PSD
  void add_psd(const AffineSymMatrix& M);

  struct Block {
    ConeKind kind;
    int dim;   ///< number of rows (packed length for PSD)
    int side;  ///< matrix side for PSD, else 0
    std::vector<AffineExpr> rows;
  };
  const std::vector<Block>& blocks() const { return blocks_; }

  /// Affine value of every block at x, in packed form.
  Vector block_value(std::size_t block, const Vector& x) const;

  /// Sparse text dump: one header line per block followed by its rows as
  /// "constant var:coef ...". See docs in the README.
  void write_text(std::ostream& os) const;

 private:
  void grow_objective();

  int num_vars_ = 0;
  Vector c_;
  double c0_ = 0.0;
  std::vector<Block> blocks_;
};

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kNumericalFailure };

std::string to_string(SolveStatus status);

struct SolveResult {
  SolveStatus status = SolveStatus::kNumericalFailure;
  Vector x;
  double objective = 0.0;  ///< c'x + constant
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  /// Dual multipliers, one per block, in packed form.
  std::vector<Vector> duals;
};

struct SolverSettings {
  int max_iterations = 100;
  double feasibility_tol = 1e-9;
  double absolute_gap_tol = 1e-10;
  double relative_gap_tol = 1e-9;
  /// Looser thresholds accepted when progress stalls.
  double reduced_tol = 1e-6;
  double step_fraction = 0.99;
  bool verbose = false;
};

/// Solves the program with the bundled primal-dual interior-point method.
/// Never throws for infeasible or badly conditioned programs; the status
/// reports the outcome.
SolveResult solve(const ConeProgram& program, const SolverSettings& settings = {});

/// Minimum cone margin of `x` across all blocks: equality residual is reported
/// as -|r|, nonneg as the value, SOC as t - |y|, PSD as the smallest eigenvalue.
double min_cone_margin(const ConeProgram& program, const Vector& x);

}  // namespace funnel
