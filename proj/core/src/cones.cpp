#include "cones.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "funnel/conic.hpp"

namespace funnel::detail {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// J-norm squared of a second-order cone vector, factored for accuracy.
double soc_jnorm2(const Eigen::Ref<const Vector>& u) {
  const double t = u(0), r = u.tail(u.size() - 1).norm();
  return (t - r) * (t + r);
}

Vector soc_apply_j(const Eigen::Ref<const Vector>& u) {
  Vector out = -u;
  out(0) = u(0);
  return out;
}

// First positive root of a t^2 + b t + c with c > 0, or +inf.
double first_positive_root(double a, double b, double c) {
  if (std::abs(a) < 1e-300) {
    return b < 0.0 ? -c / b : kInf;
  }
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return kInf;
  const double sq = std::sqrt(disc);
  const double q = -0.5 * (b + (b >= 0.0 ? sq : -sq));
  double best = kInf;
  for (double root : {q / a, q != 0.0 ? c / q : kInf}) {
    if (root > 0.0 && root < best) best = root;
  }
  return best;
}

double soc_step(const Eigen::Ref<const Vector>& lam, const Eigen::Ref<const Vector>& u) {
  const auto n = lam.size() - 1;
  const double a = u(0) * u(0) - u.tail(n).squaredNorm();
  const double b = 2.0 * (lam(0) * u(0) - lam.tail(n).dot(u.tail(n)));
  const double c = soc_jnorm2(lam);
  double alpha = first_positive_root(a, b, std::max(c, 0.0));
  // the apex crossing is caught by the quadratic; guard the half-space too
  if (u(0) < 0.0) alpha = std::min(alpha, -lam(0) / u(0));
  return alpha;
}

Vector diag_of_packed(const Eigen::Ref<const Vector>& packed, int side) {
  Vector d(side);
  for (int j = 0; j < side; ++j) d(j) = packed(svec_index(side, j, j));
  return d;
}

}  // namespace

void ConeLayout::finalize() {
  soc_start.clear();
  psd_start.clear();
  int offset = nonneg;
  for (int d : soc) {
    soc_start.push_back(offset);
    offset += d;
  }
  for (int n : psd) {
    psd_start.push_back(offset);
    offset += svec_size(n);
  }
  total = offset;
}

int ConeLayout::degree() const {
  int deg = nonneg + static_cast<int>(soc.size());
  for (int n : psd) deg += n;
  return deg;
}

bool NtScaling::compute(const ConeLayout& layout, const Vector& s, const Vector& z) {
  layout_ = &layout;
  lambda_.resize(layout.total);

  d_.resize(layout.nonneg);
  for (int i = 0; i < layout.nonneg; ++i) {
    if (!(s(i) > 0.0 && z(i) > 0.0)) return false;
    d_(i) = std::sqrt(s(i) / z(i));
    lambda_(i) = std::sqrt(s(i) * z(i));
  }

  soc_beta_.assign(layout.soc.size(), 0.0);
  soc_v_.assign(layout.soc.size(), Vector());
  for (std::size_t k = 0; k < layout.soc.size(); ++k) {
    const int o = layout.soc_start[k], d = layout.soc[k];
    const auto sk = s.segment(o, d);
    const auto zk = z.segment(o, d);
    const double sj = soc_jnorm2(sk), zj = soc_jnorm2(zk);
    if (!(sj > 0.0 && zj > 0.0 && sk(0) > 0.0 && zk(0) > 0.0)) return false;
    const Vector sbar = sk / std::sqrt(sj);
    const Vector zbar = zk / std::sqrt(zj);
    const double gamma = std::sqrt(0.5 * (1.0 + sbar.dot(zbar)));
    Vector wbar = (sbar + soc_apply_j(zbar)) / (2.0 * gamma);
    Vector v = wbar;
    v(0) += 1.0;
    v /= std::sqrt(2.0 * (wbar(0) + 1.0));
    soc_beta_[k] = std::pow(sj / zj, 0.25);
    soc_v_[k] = std::move(v);
  }

  psd_r_.assign(layout.psd.size(), Matrix());
  psd_rinv_.assign(layout.psd.size(), Matrix());
  for (std::size_t k = 0; k < layout.psd.size(); ++k) {
    const int o = layout.psd_start[k], n = layout.psd[k];
    Eigen::LLT<Matrix> ls(svec_unpack(s.segment(o, svec_size(n))));
    Eigen::LLT<Matrix> lz(svec_unpack(z.segment(o, svec_size(n))));
    if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
    const Matrix Ls = ls.matrixL();
    const Matrix Lz = lz.matrixL();
    Eigen::JacobiSVD<Matrix> svd(Lz.transpose() * Ls, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector sv = svd.singularValues();
    if (!(sv.minCoeff() > 0.0)) return false;
    const Vector isq = sv.cwiseSqrt().cwiseInverse();
    psd_r_[k] = Ls * svd.matrixV() * isq.asDiagonal();
    psd_rinv_[k] = isq.asDiagonal() * svd.matrixU().transpose() * Lz.transpose();
    lambda_.segment(o, svec_size(n)) = svec_pack(Matrix(sv.asDiagonal()));
  }

  // lambda for soc = W z
  for (std::size_t k = 0; k < layout.soc.size(); ++k) {
    const int o = layout.soc_start[k], d = layout.soc[k];
    const Vector& v = soc_v_[k];
    const auto zk = z.segment(o, d);
    lambda_.segment(o, d) = soc_beta_[k] * (2.0 * v * v.dot(zk) - soc_apply_j(zk));
  }
  return lambda_.allFinite();
}

namespace {
enum class Op { kW, kWt, kWinv, kWinvt };
}

static Vector apply_op(const ConeLayout& layout, const Vector& d, const std::vector<double>& beta,
                       const std::vector<Vector>& vs, const std::vector<Matrix>& r,
                       const std::vector<Matrix>& rinv, const Vector& u, Op op) {
  Vector out(u.size());
  for (int i = 0; i < layout.nonneg; ++i) {
    out(i) = (op == Op::kW || op == Op::kWt) ? d(i) * u(i) : u(i) / d(i);
  }
  for (std::size_t k = 0; k < layout.soc.size(); ++k) {
    const int o = layout.soc_start[k], dim = layout.soc[k];
    const Vector& v = vs[k];
    const auto uk = u.segment(o, dim);
    if (op == Op::kW || op == Op::kWt) {
      out.segment(o, dim) = beta[k] * (2.0 * v * v.dot(uk) - soc_apply_j(uk));
    } else {
      const Vector jv = soc_apply_j(v);
      out.segment(o, dim) = (2.0 * jv * jv.dot(uk) - soc_apply_j(uk)) / beta[k];
    }
  }
  for (std::size_t k = 0; k < layout.psd.size(); ++k) {
    const int o = layout.psd_start[k], n = layout.psd[k];
    const Matrix U = svec_unpack(u.segment(o, svec_size(n)));
    Matrix V;
    switch (op) {
      case Op::kW: V = r[k].transpose() * U * r[k]; break;
      case Op::kWt: V = r[k] * U * r[k].transpose(); break;
      case Op::kWinv: V = rinv[k].transpose() * U * rinv[k]; break;
      case Op::kWinvt: V = rinv[k] * U * rinv[k].transpose(); break;
    }
    out.segment(o, svec_size(n)) = svec_pack(0.5 * (V + V.transpose()), kInf);
  }
  return out;
}

Vector NtScaling::apply_w(const Vector& u) const {
  return apply_op(*layout_, d_, soc_beta_, soc_v_, psd_r_, psd_rinv_, u, Op::kW);
}
Vector NtScaling::apply_wt(const Vector& u) const {
  return apply_op(*layout_, d_, soc_beta_, soc_v_, psd_r_, psd_rinv_, u, Op::kWt);
}
Vector NtScaling::apply_winv(const Vector& u) const {
  return apply_op(*layout_, d_, soc_beta_, soc_v_, psd_r_, psd_rinv_, u, Op::kWinv);
}
Vector NtScaling::apply_winvt(const Vector& u) const {
  return apply_op(*layout_, d_, soc_beta_, soc_v_, psd_r_, psd_rinv_, u, Op::kWinvt);
}

void NtScaling::apply_winvt_block(int cone_kind, int index, Eigen::Ref<Vector> column) const {
  if (cone_kind == 0) {
    column(0) /= d_(index);
  } else if (cone_kind == 1) {
    const Vector jv = soc_apply_j(soc_v_[index]);
    const Vector u = column;
    column = (2.0 * jv * jv.dot(u) - soc_apply_j(u)) / soc_beta_[index];
  } else {
    const Matrix U = svec_unpack(column);
    const Matrix& ri = psd_rinv_[index];
    const Matrix V = ri * U * ri.transpose();
    column = svec_pack(0.5 * (V + V.transpose()), kInf);
  }
}

Vector jordan_product(const ConeLayout& layout, const Vector& u, const Vector& v) {
  Vector out(u.size());
  for (int i = 0; i < layout.nonneg; ++i) out(i) = u(i) * v(i);
  for (std::size_t k = 0; k < layout.soc.size(); ++k) {
    const int o = layout.soc_start[k], d = layout.soc[k];
    const auto uk = u.segment(o, d);
    const auto vk = v.segment(o, d);
    out(o) = uk.dot(vk);
    out.segment(o + 1, d - 1) = uk(0) * vk.tail(d - 1) + vk(0) * uk.tail(d - 1);
  }
  for (std::size_t k = 0; k < layout.psd.size(); ++k) {
    const int o = layout.psd_start[k], n = layout.psd[k];
    const Matrix U = svec_unpack(u.segment(o, svec_size(n)));
    const Matrix V = svec_unpack(v.segment(o, svec_size(n)));
    out.segment(o, svec_size(n)) = svec_pack(0.5 * (U * V + V * U), kInf);
  }
  return out;
}

Vector jordan_divide(const ConeLayout& layout, const Vector& lambda, const Vector& d) {
  Vector out(d.size());
  for (int i = 0; i < layout.nonneg; ++i) out(i) = d(i) / lambda(i);
  for (std::size_t k = 0; k < layout.soc.size(); ++k) {
    const int o = layout.soc_start[k], n = layout.soc[k];
    const auto l = lambda.segment(o, n);
    const auto dk = d.segment(o, n);
    const double l0 = l(0);
    const double denom = soc_jnorm2(l);
    const double x0 = (l0 * dk(0) - l.tail(n - 1).dot(dk.tail(n - 1))) / denom;
    out(o) = x0;
    out.segment(o + 1, n - 1) = (dk.tail(n - 1) - x0 * l.tail(n - 1)) / l0;
  }
  for (std::size_t k = 0; k < layout.psd.size(); ++k) {
    const int o = layout.psd_start[k], n = layout.psd[k];
    const Vector lam = diag_of_packed(lambda.segment(o, svec_size(n)), n);
    Matrix D = svec_unpack(d.segment(o, svec_size(n)));
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) D(i, j) *= 2.0 / (lam(i) + lam(j));
    }
    out.segment(o, svec_size(n)) = svec_pack(D, kInf);
  }
  return out;
}

Vector identity_element(const ConeLayout& layout) {
  Vector e = Vector::Zero(layout.total);
  e.head(layout.nonneg).setOnes();
  for (int o : layout.soc_start) e(o) = 1.0;
  for (std::size_t k = 0; k < layout.psd.size(); ++k) {
    const int o = layout.psd_start[k], n = layout.psd[k];
    for (int j = 0; j < n; ++j) e(o + svec_index(n, j, j)) = 1.0;
  }
  return e;
}

double max_step_scaled(const ConeLayout& layout, const Vector& lambda, const Vector& u) {
  double alpha = kInf;
  for (int i = 0; i < layout.nonneg; ++i) {
    if (u(i) < 0.0) alpha = std::min(alpha, -lambda(i) / u(i));
  }
  for (std::size_t k = 0; k < layout.soc.size(); ++k) {
    const int o = layout.soc_start[k], d = layout.soc[k];
    alpha = std::min(alpha, soc_step(lambda.segment(o, d), u.segment(o, d)));
  }
  for (std::size_t k = 0; k < layout.psd.size(); ++k) {
    const int o = layout.psd_start[k], n = layout.psd[k];
    const Vector isq =
        diag_of_packed(lambda.segment(o, svec_size(n)), n).cwiseSqrt().cwiseInverse();
    const Matrix U = svec_unpack(u.segment(o, svec_size(n)));
    const Matrix M = isq.asDiagonal() * U * isq.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
    const double mn = es.eigenvalues()(0);
    if (mn < 0.0) alpha = std::min(alpha, -1.0 / mn);
  }
  return alpha;
}

double interior_shift(const ConeLayout& layout, const Vector& u) {
  double t = -kInf;
  for (int i = 0; i < layout.nonneg; ++i) t = std::max(t, -u(i));
  for (std::size_t k = 0; k < layout.soc.size(); ++k) {
    const int o = layout.soc_start[k], d = layout.soc[k];
    t = std::max(t, u.segment(o + 1, d - 1).norm() - u(o));
  }
  for (std::size_t k = 0; k < layout.psd.size(); ++k) {
    const int o = layout.psd_start[k], n = layout.psd[k];
    Eigen::SelfAdjointEigenSolver<Matrix> es(svec_unpack(u.segment(o, svec_size(n))),
                                             Eigen::EigenvaluesOnly);
    t = std::max(t, -es.eigenvalues()(0));
  }
  return t;
}

}  // namespace funnel::detail
