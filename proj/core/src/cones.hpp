#pragma once

// Symmetric-cone algebra used by the interior-point solver. Vectors are laid
// out as [nonneg | soc_1 | ... | psd_1 (svec) | ...].

#include <vector>

#include "funnel/common.hpp"

namespace funnel::detail {

struct ConeLayout {
  int nonneg = 0;
  std::vector<int> soc;       // dimensions
  std::vector<int> psd;       // matrix sides
  std::vector<int> soc_start;
  std::vector<int> psd_start;
  int total = 0;

  void finalize();
  /// Barrier degree: nonneg + #soc + sum(psd sides).
  int degree() const;
};

/// Nesterov-Todd scaling W with W z = W^{-T} s = lambda.
class NtScaling {
 public:
  /// Returns false when s or z is not strictly interior.
  bool compute(const ConeLayout& layout, const Vector& s, const Vector& z);

  /// Scaled point in packed layout; PSD blocks hold svec(diag(lambda)).
  const Vector& lambda() const { return lambda_; }

  Vector apply_w(const Vector& u) const;       // W u
  Vector apply_wt(const Vector& u) const;      // W' u
  Vector apply_winv(const Vector& u) const;    // W^{-1} u
  Vector apply_winvt(const Vector& u) const;   // W^{-T} u

  /// W^{-T} applied to one column living only in the rows of a single cone.
  /// `cone` indexes nonneg rows first, then soc, then psd.
  void apply_winvt_block(int cone_kind, int index, Eigen::Ref<Vector> column) const;

 private:
  const ConeLayout* layout_ = nullptr;
  Vector lambda_;
  Vector d_;                     // nonneg scaling sqrt(s/z)
  std::vector<double> soc_beta_;
  std::vector<Vector> soc_v_;
  std::vector<Matrix> psd_r_, psd_rinv_;
};

/// Jordan product u o v.
Vector jordan_product(const ConeLayout& layout, const Vector& u, const Vector& v);
/// Solves lambda o x = d for x, where lambda is a scaled point (diagonal in
/// the PSD blocks).
Vector jordan_divide(const ConeLayout& layout, const Vector& lambda, const Vector& d);
/// Identity element.
Vector identity_element(const ConeLayout& layout);
/// Largest alpha with lambda + alpha * u in the cone (lambda scaled point).
double max_step_scaled(const ConeLayout& layout, const Vector& lambda, const Vector& u);
/// Smallest t with u + t e in the closed cone; negative when u is interior.
double interior_shift(const ConeLayout& layout, const Vector& u);
/// Standard trace inner product (svec preserves it).
inline double inner(const Vector& a, const Vector& b) { return a.dot(b); }

}  // namespace funnel::detail
