// Homogeneous self-dual primal-dual interior-point method for
//   minimize c'x  s.t.  G x + s = h,  A x = b,  s in K
// with K a product of nonnegative, second-order and PSD cones. Search
// directions use Nesterov-Todd scaling and a Mehrotra predictor-corrector;
// the reduced KKT system is solved by a sparse LDL' factorization with static
// regularization and iterative refinement.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "cones.hpp"
#include "funnel/conic.hpp"

namespace funnel {
namespace {

using detail::ConeLayout;
using detail::NtScaling;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

constexpr double kRegularization = 1e-9;
constexpr int kMaxRefinement = 8;

// A group of rows whose W^{-T} acts independently of the rest.
struct RowGroup {
  int kind;   // 0 nonneg, 1 soc, 2 psd
  int index;  // row for nonneg, cone index otherwise
  int start, dim;
  std::vector<int> cols;
  Matrix dense;  // rows x cols slice of G
};

struct StandardForm {
  ConeLayout layout;
  SpMat G, A;
  Vector h, b, c;
  // (block index in program, row offset in the packed s vector) per program block
  std::vector<std::pair<int, int>> block_to_rows;  // for cone blocks: (start, dim)
  std::vector<int> eq_rows;                        // per program block: row in A or -1
  std::vector<RowGroup> groups;
};

StandardForm to_standard_form(const ConeProgram& p) {
  StandardForm sf;
  const auto& blocks = p.blocks();
  const int n = p.num_variables();
  sf.block_to_rows.assign(blocks.size(), {-1, 0});
  sf.eq_rows.assign(blocks.size(), -1);

  int eq = 0;
  for (const auto& blk : blocks) {
    if (blk.kind == ConeKind::kZero) ++eq;
    if (blk.kind == ConeKind::kNonneg) ++sf.layout.nonneg;
    if (blk.kind == ConeKind::kSecondOrder) sf.layout.soc.push_back(blk.dim);
    if (blk.kind == ConeKind::kPsd) sf.layout.psd.push_back(blk.side);
  }
  sf.layout.finalize();
  const int m = sf.layout.total;

  std::vector<Triplet> gt, at;
  sf.h = Vector::Zero(m);
  sf.b = Vector::Zero(eq);
  int next_eq = 0, next_lp = 0;
  std::size_t next_soc = 0, next_psd = 0;
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const auto& blk = blocks[bi];
    if (blk.kind == ConeKind::kZero) {
      // e(x) = 0  ->  sum coef x = -const
      for (const auto& [var, coef] : blk.rows[0].terms) at.emplace_back(next_eq, var, coef);
      sf.b(next_eq) = -blk.rows[0].constant;
      sf.eq_rows[bi] = next_eq++;
      continue;
    }
    int start = 0, kind = 0, index = 0;
    if (blk.kind == ConeKind::kNonneg) {
      start = next_lp;
      index = next_lp++;
      kind = 0;
    } else if (blk.kind == ConeKind::kSecondOrder) {
      start = sf.layout.soc_start[next_soc];
      index = static_cast<int>(next_soc++);
      kind = 1;
    } else {
      start = sf.layout.psd_start[next_psd];
      index = static_cast<int>(next_psd++);
      kind = 2;
    }
    sf.block_to_rows[bi] = {start, blk.dim};
    RowGroup group{kind, index, start, blk.dim, {}, {}};
    for (int r = 0; r < blk.dim; ++r) {
      // s = e(x) = const + coef x  ->  G = -coef, h = const
      sf.h(start + r) = blk.rows[r].constant;
      for (const auto& [var, coef] : blk.rows[r].terms) {
        gt.emplace_back(start + r, var, -coef);
        group.cols.push_back(var);
      }
    }
    std::sort(group.cols.begin(), group.cols.end());
    group.cols.erase(std::unique(group.cols.begin(), group.cols.end()), group.cols.end());
    group.dense = Matrix::Zero(blk.dim, static_cast<Eigen::Index>(group.cols.size()));
    for (int r = 0; r < blk.dim; ++r) {
      for (const auto& [var, coef] : blk.rows[r].terms) {
        const auto pos = std::lower_bound(group.cols.begin(), group.cols.end(), var) -
                         group.cols.begin();
        group.dense(r, pos) -= coef;
      }
    }
    sf.groups.push_back(std::move(group));
  }
  sf.G.resize(m, n);
  sf.G.setFromTriplets(gt.begin(), gt.end());
  sf.A.resize(eq, n);
  sf.A.setFromTriplets(at.begin(), at.end());
  sf.c = p.objective();
  return sf;
}

class KktSolver {
 public:
  explicit KktSolver(const StandardForm& sf) : sf_(sf) {
    n_ = static_cast<int>(sf.G.cols());
    p_ = static_cast<int>(sf.A.rows());
  }

  bool factor(const NtScaling* scaling) {
    scaling_ = scaling;
    std::vector<Triplet> t;
    for (int i = 0; i < n_; ++i) t.emplace_back(i, i, kRegularization);
    for (const RowGroup& g : sf_.groups) {
      Matrix M = g.dense;
      if (scaling) {
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
          Vector col = M.col(j);
          scaling->apply_winvt_block(g.kind, g.index, col);
          M.col(j) = col;
        }
      }
      const Matrix H = M.transpose() * M;
      for (std::size_t a = 0; a < g.cols.size(); ++a) {
        for (std::size_t b = 0; b < g.cols.size(); ++b) {
          t.emplace_back(g.cols[a], g.cols[b], H(a, b));
        }
      }
    }
    for (int k = 0; k < sf_.A.outerSize(); ++k) {
      for (SpMat::InnerIterator it(sf_.A, k); it; ++it) {
        t.emplace_back(n_ + it.row(), it.col(), it.value());
        t.emplace_back(it.col(), n_ + it.row(), it.value());
      }
    }
    for (int i = 0; i < p_; ++i) t.emplace_back(n_ + i, n_ + i, -kRegularization);
    SpMat K(n_ + p_, n_ + p_);
    K.setFromTriplets(t.begin(), t.end());
    if (!analyzed_) {
      ldlt_.analyzePattern(K);
      analyzed_ = true;
    }
    ldlt_.factorize(K);
    return ldlt_.info() == Eigen::Success;
  }

  // Solves [0 A' G'; A 0 0; G 0 -W'W] [dx;dy;dz] = [r1;r2;r3].
  void solve(const Vector& r1, const Vector& r2, const Vector& r3, Vector& dx, Vector& dy,
             Vector& dz) const {
    reduced_solve(r1, r2, r3, dx, dy, dz);
    const double scale = 1.0 + std::max({r1.lpNorm<Eigen::Infinity>(),
                                         r2.size() ? r2.lpNorm<Eigen::Infinity>() : 0.0,
                                         r3.lpNorm<Eigen::Infinity>()});
    for (int it = 0; it < kMaxRefinement; ++it) {
      const Vector e1 = r1 - sf_.A.transpose() * dy - sf_.G.transpose() * dz;
      const Vector e2 = r2 - sf_.A * dx;
      const Vector e3 = r3 - (sf_.G * dx - apply_wtw(dz));
      const double err = std::max({e1.lpNorm<Eigen::Infinity>(),
                                   e2.size() ? e2.lpNorm<Eigen::Infinity>() : 0.0,
                                   e3.lpNorm<Eigen::Infinity>()});
      if (err <= 1e-14 * scale) break;
      Vector cx, cy, cz;
      reduced_solve(e1, e2, e3, cx, cy, cz);
      dx += cx;
      dy += cy;
      dz += cz;
    }
  }

 private:
  Vector apply_wtw(const Vector& u) const {
    return scaling_ ? scaling_->apply_wt(scaling_->apply_w(u)) : u;
  }
  Vector apply_inv_wtw(const Vector& u) const {
    return scaling_ ? scaling_->apply_winv(scaling_->apply_winvt(u)) : u;
  }

  void reduced_solve(const Vector& r1, const Vector& r2, const Vector& r3, Vector& dx,
                     Vector& dy, Vector& dz) const {
    Vector rhs(n_ + p_);
    rhs.head(n_) = r1 + sf_.G.transpose() * apply_inv_wtw(r3);
    rhs.tail(p_) = r2;
    const Vector sol = ldlt_.solve(rhs);
    dx = sol.head(n_);
    dy = sol.tail(p_);
    dz = apply_inv_wtw(sf_.G * dx - r3);
  }

  const StandardForm& sf_;
  const NtScaling* scaling_ = nullptr;
  int n_ = 0, p_ = 0;
  bool analyzed_ = false;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

}  // namespace

SolveResult solve(const ConeProgram& program, const SolverSettings& settings) {
  SolveResult result;
  const StandardForm sf = to_standard_form(program);
  const ConeLayout& layout = sf.layout;
  const int n = program.num_variables();
  const int m = layout.total;
  const double degree = layout.degree();

  const Vector& c = sf.c;
  const Vector& h = sf.h;
  const Vector& b = sf.b;
  const double resx0 = std::max(1.0, c.norm());
  const double resy0 = std::max(1.0, b.norm());
  const double resz0 = std::max(1.0, h.norm());
  const Vector e = detail::identity_element(layout);

  KktSolver kkt(sf);
  auto finish = [&](SolveStatus status, const Vector& x, const Vector& z, double tau, int it) {
    result.status = status;
    result.iterations = it;
    result.x = x / tau;
    result.objective = c.dot(result.x) + program.objective_constant();
    result.duals.assign(program.blocks().size(), Vector());
    for (std::size_t bi = 0; bi < program.blocks().size(); ++bi) {
      const auto [start, dim] = sf.block_to_rows[bi];
      if (start >= 0) result.duals[bi] = z.segment(start, dim) / tau;
    }
    return result;
  };

  // Initial point from two least-squares style solves with W = I.
  if (!kkt.factor(nullptr)) {
    result.status = SolveStatus::kNumericalFailure;
    result.x = Vector::Zero(n);
    return result;
  }
  Vector x, y, z, s;
  {
    Vector dz;
    kkt.solve(Vector::Zero(n), b, h, x, y, dz);
    s = -dz;
    Vector dx;
    kkt.solve(-c, Vector::Zero(b.size()), Vector::Zero(m), dx, y, z);
    const double ts = detail::interior_shift(layout, s);
    const double tz = detail::interior_shift(layout, z);
    if (m > 0) {
      if (ts >= -1e-8 * std::max(1.0, s.norm())) s += (1.0 + ts) * e;
      if (tz >= -1e-8 * std::max(1.0, z.norm())) z += (1.0 + tz) * e;
    }
  }
  double tau = 1.0, kappa = 1.0;

  // Best iterate meeting the reduced tolerance, returned if progress later
  // breaks down.
  struct Snapshot {
    Vector x, z;
    double tau = 0.0, score = std::numeric_limits<double>::infinity();
    int it = 0;
  } best;

  NtScaling scaling;
  for (int it = 0; it <= settings.max_iterations; ++it) {
    const double gap_raw = s.dot(z);
    const double mu = (gap_raw + tau * kappa) / (degree + 1.0);

    const Vector rx = sf.A.transpose() * y + sf.G.transpose() * z + c * tau;
    const Vector ry = b * tau - sf.A * x;
    const Vector rz = s + sf.G * x - h * tau;
    const double cx = c.dot(x), by = b.dot(y), hz = h.dot(z);
    const double rt = kappa + cx + by + hz;

    const double pcost = cx / tau;
    const double dcost = -(hz + by) / tau;
    const double gap = gap_raw / (tau * tau);
    const double pres = std::max(ry.norm() / resy0, rz.norm() / resz0) / tau;
    const double dres = rx.norm() / resx0 / tau;
    double relgap = std::numeric_limits<double>::infinity();
    if (pcost < 0.0) relgap = gap / -pcost;
    if (dcost > 0.0) relgap = gap / dcost;
    result.primal_residual = pres;
    result.dual_residual = dres;
    result.gap = gap;

    const double pinfres =
        (hz + by < 0.0) ? (sf.A.transpose() * y + sf.G.transpose() * z).norm() / resx0 / -(hz + by)
                        : std::numeric_limits<double>::infinity();
    const double dinfres =
        (cx < 0.0) ? std::max((sf.A * x).norm() / resy0, (sf.G * x + s).norm() / resz0) / -cx
                   : std::numeric_limits<double>::infinity();

    if (settings.verbose) {
      std::fprintf(stderr, "%3d % .9e % .9e %.2e %.2e %.2e tau=%.2e kappa=%.2e\n", it, pcost,
                   dcost, gap, pres, dres, tau, kappa);
    }

    if (pres <= settings.feasibility_tol && dres <= settings.feasibility_tol &&
        (gap <= settings.absolute_gap_tol || relgap <= settings.relative_gap_tol)) {
      return finish(SolveStatus::kOptimal, x, z, tau, it);
    }
    if (pinfres <= settings.feasibility_tol) {
      result.status = SolveStatus::kInfeasible;
      result.iterations = it;
      result.x = Vector::Zero(n);
      return result;
    }
    if (dinfres <= settings.feasibility_tol) {
      result.status = SolveStatus::kUnbounded;
      result.iterations = it;
      result.x = x / -cx;
      return result;
    }
    const bool reduced_ok =
        pres <= settings.reduced_tol && dres <= settings.reduced_tol &&
        (gap <= settings.reduced_tol * std::max(1.0, std::abs(pcost)) ||
         relgap <= settings.reduced_tol);
    if (reduced_ok) {
      const double score = std::max({pres, dres, std::min(relgap, gap)});
      if (score < best.score) best = {x, z, tau, score, it};
    }
    auto give_up = [&]() {
      if (reduced_ok) return finish(SolveStatus::kOptimal, x, z, tau, it);
      if (std::isfinite(best.score)) {
        return finish(SolveStatus::kOptimal, best.x, best.z, best.tau, best.it);
      }
      if (pinfres <= settings.reduced_tol) {
        result.status = SolveStatus::kInfeasible;
        result.iterations = it;
        result.x = Vector::Zero(n);
        return result;
      }
      result.status = SolveStatus::kNumericalFailure;
      result.iterations = it;
      result.x = x / tau;
      result.objective = c.dot(result.x) + program.objective_constant();
      return result;
    };
    if (it == settings.max_iterations) return give_up();

    if (!scaling.compute(layout, s, z) || !kkt.factor(&scaling)) return give_up();
    const Vector& lambda = scaling.lambda();
    const Vector lambda_sq = detail::jordan_product(layout, lambda, lambda);

    // Direction for right-hand sides (eta, ds, dk). Returns false on failure.
    Vector x1, y1, z1;
    kkt.solve(-c, b, h, x1, y1, z1);
    const double denom_base = c.dot(x1) + b.dot(y1) + h.dot(z1);

    struct Direction {
      Vector dx, dy, dz, ds, ds_scaled, dz_scaled;
      double dtau = 0.0, dkappa = 0.0;
    };
    auto direction = [&](double eta, const Vector& ds_target, double dk) {
      Direction d;
      const Vector ldiv = detail::jordan_divide(layout, lambda, ds_target);
      Vector x2, y2, z2;
      kkt.solve(-eta * rx, eta * ry, -eta * rz - scaling.apply_wt(ldiv), x2, y2, z2);
      const double num = -eta * rt - dk / tau - (c.dot(x2) + b.dot(y2) + h.dot(z2));
      const double den = denom_base - kappa / tau;
      d.dtau = num / den;
      d.dx = x2 + d.dtau * x1;
      d.dy = y2 + d.dtau * y1;
      d.dz = z2 + d.dtau * z1;
      d.dz_scaled = scaling.apply_w(d.dz);
      d.ds_scaled = ldiv - d.dz_scaled;
      d.ds = scaling.apply_wt(d.ds_scaled);
      d.dkappa = (dk - kappa * d.dtau) / tau;
      return d;
    };
    auto step_to_boundary = [&](const Direction& d) {
      double alpha = std::min(detail::max_step_scaled(layout, lambda, d.ds_scaled),
                              detail::max_step_scaled(layout, lambda, d.dz_scaled));
      if (d.dtau < 0.0) alpha = std::min(alpha, -tau / d.dtau);
      if (d.dkappa < 0.0) alpha = std::min(alpha, -kappa / d.dkappa);
      return alpha;
    };

    // Predictor
    const Direction aff = direction(1.0, -lambda_sq, -tau * kappa);
    const double alpha_aff = std::min(1.0, step_to_boundary(aff));
    const double sigma = std::pow(1.0 - alpha_aff, 3);

    // Corrector
    const Vector ds_target = -lambda_sq + sigma * mu * e -
                             detail::jordan_product(layout, aff.ds_scaled, aff.dz_scaled);
    const double dk = -tau * kappa + sigma * mu - aff.dtau * aff.dkappa;
    const Direction dir = direction(1.0 - sigma, ds_target, dk);
    double alpha = std::min(1.0, settings.step_fraction * step_to_boundary(dir));
    if (!(alpha > 0.0) || !std::isfinite(alpha) || !dir.dx.allFinite()) return give_up();

    x += alpha * dir.dx;
    y += alpha * dir.dy;
    z += alpha * dir.dz;
    s += alpha * dir.ds;
    tau += alpha * dir.dtau;
    kappa += alpha * dir.dkappa;
    if (!(tau > 0.0) || !(kappa > 0.0)) return give_up();
  }
  return result;
}

}  // namespace funnel
