#include "degp/linalg.hpp"

#include <cblas.h>
#include <lapacke.h>

#include <cmath>
#include <string>

extern "C" void openblas_set_num_threads(int);

namespace degp::nd {

NotPositiveDefinite::NotPositiveDefinite(std::size_t idx)
    : std::runtime_error("matrix is not positive definite (pivot " +
                         std::to_string(idx) + ")"),
      index(idx) {}

void use_single_thread_blas() { openblas_set_num_threads(1); }

Tensor cholesky(const Tensor& a) {
  check_shape(a.rank() == 2 && a.rows() == a.cols(), "cholesky needs square");
  const std::size_t n = a.rows();
  if (n == 0) throw std::invalid_argument("cholesky: empty matrix");
  // Symmetry gate; asymmetric input means the caller built the wrong matrix.
  const double scale = max_abs(a);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(a(i, j) - a(j, i)) > 1e-8 * std::max(1.0, scale))
        throw std::invalid_argument("cholesky: matrix is not symmetric");

  Tensor l = a;
  const lapack_int info = LAPACKE_dpotrf(LAPACK_ROW_MAJOR, 'L',
                                         static_cast<lapack_int>(n), l.data(),
                                         static_cast<lapack_int>(n));
  if (info > 0) throw NotPositiveDefinite(static_cast<std::size_t>(info - 1));
  if (info < 0) throw std::invalid_argument("cholesky: bad argument to dpotrf");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) l(i, j) = 0.0;
  return l;
}

namespace {
Tensor trsm(const Tensor& l, const Tensor& b, bool transpose_l) {
  check_shape(l.rank() == 2 && l.rows() == l.cols(), "triangular solve: factor");
  Tensor x = b.rank() == 1 ? b.reshaped({b.size(), 1}) : b;
  check_shape(x.rows() == l.rows(), "triangular solve: rhs rows");
  if (x.size() == 0) return b;
  cblas_dtrsm(CblasRowMajor, CblasLeft, CblasLower,
              transpose_l ? CblasTrans : CblasNoTrans, CblasNonUnit,
              static_cast<int>(x.rows()), static_cast<int>(x.cols()), 1.0,
              l.data(), static_cast<int>(l.cols()), x.data(),
              static_cast<int>(x.cols()));
  return b.rank() == 1 ? x.reshaped({b.size()}) : x;
}
}  // namespace

Tensor solve_lower(const Tensor& l, const Tensor& b) { return trsm(l, b, false); }

Tensor solve_lower_t(const Tensor& l, const Tensor& b) { return trsm(l, b, true); }

Tensor chol_solve(const Tensor& l, const Tensor& b) {
  return solve_lower_t(l, solve_lower(l, b));
}

double chol_logdet(const Tensor& l) {
  double s = 0.0;
  for (std::size_t i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

double logdet_psd(const Tensor& a) { return chol_logdet(cholesky(a)); }

double trace_inverse(const Tensor& l) {
  // tr(A^{-1}) = ||L^{-1}||_F^2; column j of L^{-1} solves L x = e_j.
  const std::size_t n = l.rows();
  Tensor inv_l = Tensor::identity(n);
  cblas_dtrsm(CblasRowMajor, CblasLeft, CblasLower, CblasNoTrans, CblasNonUnit,
              static_cast<int>(n), static_cast<int>(n), 1.0, l.data(),
              static_cast<int>(n), inv_l.data(), static_cast<int>(n));
  return dot(inv_l, inv_l);
}

namespace {
// A = I_M + Gc^T Gc / (M lambda), the capacitance of the determinant lemma.
Tensor capacitance(const Tensor& gc, double lambda) {
  const std::size_t m = gc.cols();
  Tensor a = Tensor::identity(m);
  matmul_acc(gc, gc, a, /*trans_a=*/true, /*trans_b=*/false,
             1.0 / (static_cast<double>(m) * lambda));
  return a;
}
}  // namespace

double lowrank_logdet(const Tensor& gc, double lambda) {
  if (!(lambda > 0.0))
    throw std::invalid_argument("lowrank_logdet: lambda must be positive");
  check_shape(gc.rank() == 2, "lowrank_logdet: Gc must be D x M");
  const auto d = static_cast<double>(gc.rows());
  return d * std::log(lambda) + logdet_psd(capacitance(gc, lambda));
}

Tensor lowrank_logdet_grad(const Tensor& gc, double lambda) {
  const std::size_t m = gc.cols();
  const Tensor l = cholesky(capacitance(gc, lambda));
  // Gc A^{-1} computed as (A^{-1} Gc^T)^T since A is symmetric.
  const Tensor solved = chol_solve(l, transpose(gc));
  return scale(transpose(solved), 2.0 / (static_cast<double>(m) * lambda));
}

}  // namespace degp::nd
