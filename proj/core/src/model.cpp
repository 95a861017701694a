#include "funnel/model.hpp"

#include <algorithm>
#include <mutex>

namespace funnel {
namespace {

void check_dims(const SystemModel& model, const Vector& x, const Vector& u, const Vector& w) {
  if (x.size() != model.state_dim() || u.size() != model.input_dim() ||
      w.size() != model.disturbance_dim()) {
    throw ContractViolation("dimension mismatch for model '" + model.name() + "': got x[" +
                            std::to_string(x.size()) + "], u[" + std::to_string(u.size()) +
                            "], w[" + std::to_string(w.size()) + "]");
  }
}

}  // namespace

Jacobians finite_difference_jacobians(const SystemModel& model, double t, const Vector& x,
                                      const Vector& u, const Vector& w, double step) {
  const int nx = model.state_dim();
  Jacobians J{Matrix(nx, x.size()), Matrix(nx, u.size()), Matrix(nx, w.size())};
  auto column = [&](Vector xp, Vector up, Vector wp, Vector xm, Vector um, Vector wm) -> Vector {
    return (model.rhs(t, xp, up, wp) - model.rhs(t, xm, um, wm)) / (2.0 * step);
  };
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp(i) += step;
    xm(i) -= step;
    J.A.col(i) = column(xp, u, w, xm, u, w);
  }
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    Vector up = u, um = u;
    up(i) += step;
    um(i) -= step;
    J.B.col(i) = column(x, up, w, x, um, w);
  }
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    Vector wp = w, wm = w;
    wp(i) += step;
    wm(i) -= step;
    J.F.col(i) = column(x, u, wp, x, u, wm);
  }
  return J;
}

Jacobians SystemModel::rhs_jacobians(double t, const Vector& x, const Vector& u,
                                     const Vector& w) const {
  return finite_difference_jacobians(*this, t, x, u, w);
}

Matrix SystemModel::phi_jacobian(const Vector& q) const {
  constexpr double kStep = 1e-6;
  const Vector p0 = phi(q);
  Matrix J(p0.size(), q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    Vector qp = q, qm = q;
    qp(i) += kStep;
    qm(i) -= kStep;
    J.col(i) = (phi(qp) - phi(qm)) / (2.0 * kStep);
  }
  return J;
}

Vector eval_dynamics(const SystemModel& model, double t, const Vector& x, const Vector& u,
                     const Vector& w) {
  check_dims(model, x, u, w);
  return model.rhs(t, x, u, w);
}

Jacobians jacobians(const SystemModel& model, double t, const Vector& x, const Vector& u,
                    const Vector& w) {
  check_dims(model, x, u, w);
  return model.rhs_jacobians(t, x, u, w);
}

Vector nonlinearity_q(const SystemModel& model, const Vector& x, const Vector& u,
                      const Vector& w) {
  check_dims(model, x, u, w);
  const Decomposition& d = model.decomposition();
  return d.C * x + d.D * u + d.G * w;
}

Vector reconstruct_dynamics(const SystemModel& model, const Vector& x, const Vector& u,
                            const Vector& w) {
  const Decomposition& d = model.decomposition();
  Vector f = d.A_lin * x + d.B_lin * u + d.F_lin * w + d.c;
  if (d.E.cols() > 0) f += d.E * model.phi(nonlinearity_q(model, x, u, w));
  return f;
}

// ---------------------------------------------------------------------------

LinearModel::LinearModel(Matrix A, Matrix B, Matrix F, Vector c)
    : A_(std::move(A)), B_(std::move(B)), F_(std::move(F)), c_(std::move(c)) {
  const auto n = A_.rows();
  require(A_.cols() == n && B_.rows() == n && F_.rows() == n, "LinearModel: inconsistent shapes");
  if (c_.size() == 0) c_ = Vector::Zero(n);
  require(c_.size() == n, "LinearModel: affine term has wrong length");
  decomposition_ = Decomposition{A_,
                                 B_,
                                 F_,
                                 c_,
                                 Matrix::Zero(n, 0),
                                 Matrix::Zero(0, n),
                                 Matrix::Zero(0, B_.cols()),
                                 Matrix::Zero(0, F_.cols())};
}

Vector LinearModel::rhs(double, const Vector& x, const Vector& u, const Vector& w) const {
  return A_ * x + B_ * u + F_ * w + c_;
}

Jacobians LinearModel::rhs_jacobians(double, const Vector&, const Vector&,
                                     const Vector&) const {
  return {A_, B_, F_};
}

Vector LinearModel::phi(const Vector&) const { return Vector::Zero(0); }

Matrix LinearModel::phi_jacobian(const Vector&) const { return Matrix::Zero(0, 0); }

DomainBox LinearModel::domain() const {
  const auto n = A_.rows(), m = B_.cols();
  return {Vector::Constant(n, -1.0), Vector::Constant(n, 1.0), Vector::Constant(m, -1.0),
          Vector::Constant(m, 1.0)};
}

// ---------------------------------------------------------------------------

ModelRegistry::ModelRegistry() {
  factories_.emplace_back("unicycle", [] { return std::make_shared<const Unicycle>(); });
}

ModelRegistry& ModelRegistry::instance() {
  static ModelRegistry registry;
  return registry;
}

namespace {
std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

void ModelRegistry::add(const std::string& name, Factory factory) {
  std::lock_guard lock(registry_mutex());
  auto it = std::find_if(factories_.begin(), factories_.end(),
                         [&](const auto& entry) { return entry.first == name; });
  if (it != factories_.end()) {
    it->second = std::move(factory);
  } else {
    factories_.emplace_back(name, std::move(factory));
  }
}

ModelPtr ModelRegistry::make(const std::string& name) const {
  std::lock_guard lock(registry_mutex());
  for (const auto& [key, factory] : factories_) {
    if (key == name) return factory();
  }
  throw ContractViolation("unknown model '" + name + "'");
}

std::vector<std::string> ModelRegistry::names() const {
  std::lock_guard lock(registry_mutex());
  std::vector<std::string> out;
  for (const auto& entry : factories_) out.push_back(entry.first);
  return out;
}

ModelPtr make_model(const std::string& name) { return ModelRegistry::instance().make(name); }

}  // namespace funnel
