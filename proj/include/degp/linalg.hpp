#pragma once

#include <cstddef>
#include <stdexcept>

#include "degp/tensor.hpp"

namespace degp::nd {

/// Thrown when a factorization hits a non-positive pivot. `index` is the
/// zero-based row at which the factorization failed.
struct NotPositiveDefinite : std::runtime_error {
  std::size_t index;
  explicit NotPositiveDefinite(std::size_t idx);
};

/// Lower-triangular L with L L^T = A. A must be square and symmetric.
Tensor cholesky(const Tensor& a);

/// Solve L x = b (lower triangular, possibly multiple right-hand sides).
Tensor solve_lower(const Tensor& l, const Tensor& b);

/// Solve L^T x = b.
Tensor solve_lower_t(const Tensor& l, const Tensor& b);

/// Solve A x = b given the Cholesky factor L of A.
Tensor chol_solve(const Tensor& l, const Tensor& b);

/// log det A from its Cholesky factor.
double chol_logdet(const Tensor& l);

/// log det of a symmetric PD matrix via Cholesky (dense reference path).
double logdet_psd(const Tensor& a);

/// tr(A^{-1}) from the Cholesky factor of A: squared Frobenius norm of L^{-1}.
double trace_inverse(const Tensor& l);

/// logdet((1/M) Gc Gc^T + lambda I_D) through the matrix determinant lemma:
/// D log lambda + logdet(I_M + Gc^T Gc / (M lambda)). Cost O(D M^2).
double lowrank_logdet(const Tensor& gc, double lambda);

/// d lowrank_logdet / d Gc = (2 / (M lambda)) * Gc * A^{-1},
/// A = I_M + Gc^T Gc / (M lambda).
Tensor lowrank_logdet_grad(const Tensor& gc, double lambda);

/// Pin BLAS to one thread so runs are schedule-independent.
void use_single_thread_blas();

}  // namespace degp::nd
