#include <cmath>
#include <numbers>

#include "funnel/model.hpp"

namespace funnel {

Unicycle::Unicycle(double disturbance_gain) : gain_(disturbance_gain) {
  Decomposition& d = decomposition_;
  d.A_lin = Matrix::Zero(3, 3);
  d.B_lin = Matrix::Zero(3, 2);
  d.B_lin(2, 1) = 1.0;
  d.F_lin = Matrix::Zero(3, 2);
  d.F_lin(0, 0) = gain_;
  d.F_lin(1, 1) = gain_;
  d.c = Vector::Zero(3);
  d.E = Matrix::Zero(3, 2);
  d.E(0, 0) = 1.0;
  d.E(1, 1) = 1.0;
  // q = (theta, u_v)
  d.C = Matrix::Zero(2, 3);
  d.C(0, 2) = 1.0;
  d.D = Matrix::Zero(2, 2);
  d.D(1, 0) = 1.0;
  d.G = Matrix::Zero(2, 2);
}

Vector Unicycle::rhs(double, const Vector& x, const Vector& u, const Vector& w) const {
  Vector f(3);
  f << u(0) * std::cos(x(2)) + gain_ * w(0), u(0) * std::sin(x(2)) + gain_ * w(1), u(1);
  return f;
}

Jacobians Unicycle::rhs_jacobians(double, const Vector& x, const Vector& u,
                                  const Vector&) const {
  const double c = std::cos(x(2)), s = std::sin(x(2));
  Jacobians J{Matrix::Zero(3, 3), Matrix::Zero(3, 2), decomposition_.F_lin};
  J.A(0, 2) = -u(0) * s;
  J.A(1, 2) = u(0) * c;
  J.B(0, 0) = c;
  J.B(1, 0) = s;
  J.B(2, 1) = 1.0;
  return J;
}

Vector Unicycle::phi(const Vector& q) const {
  Vector p(2);
  p << q(1) * std::cos(q(0)), q(1) * std::sin(q(0));
  return p;
}

Matrix Unicycle::phi_jacobian(const Vector& q) const {
  const double c = std::cos(q(0)), s = std::sin(q(0));
  Matrix J(2, 2);
  J << -q(1) * s, c, q(1) * c, s;
  return J;
}

DomainBox Unicycle::domain() const {
  DomainBox box;
  box.x_lower = Vector(3);
  box.x_upper = Vector(3);
  box.x_lower << -1.0, -1.0, -std::numbers::pi;
  box.x_upper << 6.0, 6.0, std::numbers::pi;
  box.u_lower = Vector(2);
  box.u_upper = Vector(2);
  box.u_lower << -4.0, -2.5;
  box.u_upper << 4.0, 2.5;
  return box;
}

}  // namespace funnel
