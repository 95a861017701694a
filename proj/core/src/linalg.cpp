#include "funnel/linalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

namespace funnel {

Matrix sqrtm_psd(const Matrix& M, double tol) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(M));
  const Vector ev = es.eigenvalues();
  if (ev.size() > 0 && ev(0) < -tol) {
    throw ContractViolation("sqrtm_psd: matrix has eigenvalue " + std::to_string(ev(0)));
  }
  return es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

Matrix inverse_spd(const Matrix& M) {
  Eigen::LLT<Matrix> llt(symmetrize(M));
  if (llt.info() != Eigen::Success) throw NumericalError("inverse_spd: matrix is not positive definite");
  return symmetrize(llt.solve(Matrix::Identity(M.rows(), M.cols())));
}

double min_eigenvalue(const Matrix& M) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(M), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double max_eigenvalue(const Matrix& M) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(M), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

Matrix pseudo_inverse(const Matrix& M) {
  if (M.size() == 0) return Matrix::Zero(M.cols(), M.rows());
  return Eigen::CompleteOrthogonalDecomposition<Matrix>(M).pseudoInverse();
}

}  // namespace funnel
