#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace funnel {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition of a public function was not met (wrong dimensions,
/// asymmetric input, non-positive step, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Integration or linear-algebra failure inside an otherwise valid call.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Thrown by a step of the synthesis loop when its convex subproblem cannot
/// be solved.
class SolveError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace funnel
