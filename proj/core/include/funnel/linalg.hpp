#pragma once

#include "funnel/common.hpp"

namespace funnel {

/// Symmetric PSD square root via eigendecomposition. Eigenvalues below
/// -tol raise ContractViolation; those in [-tol, 0) are clamped to zero.
Matrix sqrtm_psd(const Matrix& M, double tol = 1e-9);

/// Inverse of a symmetric positive definite matrix via Cholesky; throws
/// NumericalError when the factorization fails.
Matrix inverse_spd(const Matrix& M);

double min_eigenvalue(const Matrix& M);
double max_eigenvalue(const Matrix& M);

/// Moore-Penrose pseudo-inverse through a complete orthogonal decomposition.
Matrix pseudo_inverse(const Matrix& M);

inline Matrix symmetrize(const Matrix& M) { return 0.5 * (M + M.transpose()); }

}  // namespace funnel
