#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "funnel/common.hpp"

namespace funnel {

/// Continuous-time Jacobians of the right-hand side at one point.
struct Jacobians {
  Matrix A;  ///< d f / d x
  Matrix B;  ///< d f / d u
  Matrix F;  ///< d f / d w
};

/// Axis-aligned box on states and inputs; used for random test points and
/// to sanity check sampled nonlinearity arguments.
struct DomainBox {
  Vector x_lower, x_upper;
  Vector u_lower, u_upper;
};

/// Converted form of a model:
///   f(t,x,u,w) = A_lin x + B_lin u + F_lin w + E phi(q) + c,
///   q = C x + D u + G w.
struct Decomposition {
  Matrix A_lin, B_lin, F_lin;
  Vector c;
  Matrix E, C, D, G;
};

/// A continuous-time nonlinear system with additive structure exposing its
/// nonlinearity. Implementations must be stateless.
class SystemModel {
 public:
  virtual ~SystemModel() = default;

  virtual std::string name() const = 0;
  virtual int state_dim() const = 0;
  virtual int input_dim() const = 0;
  virtual int disturbance_dim() const = 0;

  int nonlinearity_out_dim() const { return static_cast<int>(decomposition().E.cols()); }
  int nonlinearity_in_dim() const { return static_cast<int>(decomposition().C.rows()); }

  /// Right-hand side without dimension checks; see eval_dynamics.
  virtual Vector rhs(double t, const Vector& x, const Vector& u, const Vector& w) const = 0;

  /// Analytic Jacobians. The default uses central finite differences.
  virtual Jacobians rhs_jacobians(double t, const Vector& x, const Vector& u,
                                  const Vector& w) const;

  virtual const Decomposition& decomposition() const = 0;
  virtual Vector phi(const Vector& q) const = 0;
  /// d phi / d q. The default uses central finite differences.
  virtual Matrix phi_jacobian(const Vector& q) const;

  virtual DomainBox domain() const = 0;
};

using ModelPtr = std::shared_ptr<const SystemModel>;

Vector eval_dynamics(const SystemModel& model, double t, const Vector& x, const Vector& u,
                     const Vector& w);

Jacobians jacobians(const SystemModel& model, double t, const Vector& x, const Vector& u,
                    const Vector& w);

/// Central finite-difference Jacobians with the given step.
Jacobians finite_difference_jacobians(const SystemModel& model, double t, const Vector& x,
                                      const Vector& u, const Vector& w, double step = 1e-6);

/// q = C x + D u + G w.
Vector nonlinearity_q(const SystemModel& model, const Vector& x, const Vector& u,
                      const Vector& w);

/// Evaluates the converted form; equals eval_dynamics up to round-off.
Vector reconstruct_dynamics(const SystemModel& model, const Vector& x, const Vector& u,
                            const Vector& w);

/// f(t,x,u,w) = A x + B u + F w + c, with an empty nonlinearity (n_p = n_q = 0).
class LinearModel final : public SystemModel {
 public:
  LinearModel(Matrix A, Matrix B, Matrix F, Vector c = {});

  std::string name() const override { return "linear"; }
  int state_dim() const override { return static_cast<int>(A_.rows()); }
  int input_dim() const override { return static_cast<int>(B_.cols()); }
  int disturbance_dim() const override { return static_cast<int>(F_.cols()); }

  Vector rhs(double t, const Vector& x, const Vector& u, const Vector& w) const override;
  Jacobians rhs_jacobians(double t, const Vector& x, const Vector& u,
                          const Vector& w) const override;
  const Decomposition& decomposition() const override { return decomposition_; }
  Vector phi(const Vector& q) const override;
  Matrix phi_jacobian(const Vector& q) const override;
  DomainBox domain() const override;

 private:
  Matrix A_, B_, F_;
  Vector c_;
  Decomposition decomposition_;
};

/// Planar unicycle with additive position disturbances:
///   r_x' = u_v cos(theta) + g w1,  r_y' = u_v sin(theta) + g w2,  theta' = u_theta.
/// The nonlinearity is q = (theta, u_v), phi(q) = (q2 cos q1, q2 sin q1).
class Unicycle final : public SystemModel {
 public:
  explicit Unicycle(double disturbance_gain = 0.1);

  std::string name() const override { return "unicycle"; }
  int state_dim() const override { return 3; }
  int input_dim() const override { return 2; }
  int disturbance_dim() const override { return 2; }

  Vector rhs(double t, const Vector& x, const Vector& u, const Vector& w) const override;
  Jacobians rhs_jacobians(double t, const Vector& x, const Vector& u,
                          const Vector& w) const override;
  const Decomposition& decomposition() const override { return decomposition_; }
  Vector phi(const Vector& q) const override;
  Matrix phi_jacobian(const Vector& q) const override;
  DomainBox domain() const override;

  double disturbance_gain() const { return gain_; }

 private:
  double gain_;
  Decomposition decomposition_;
};

/// Name-keyed model factory. "unicycle" is registered by default.
class ModelRegistry {
 public:
  using Factory = std::function<ModelPtr()>;

  static ModelRegistry& instance();

  void add(const std::string& name, Factory factory);
  ModelPtr make(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  ModelRegistry();
  std::vector<std::pair<std::string, Factory>> factories_;
};

ModelPtr make_model(const std::string& name);

}  // namespace funnel
