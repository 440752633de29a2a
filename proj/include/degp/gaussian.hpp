#pragma once

#include <cstddef>
#include <variant>

#include "degp/tape.hpp"
#include "degp/tensor.hpp"

namespace degp::gauss {

/// (1/M) Gc Gc^T + lambda I, with Gc of size D x M.
struct LowRankDiag {
  nd::Tensor centered;
  double lambda = 0.0;
};

/// B (x) I_c with B of size n x n; the joint dimension is D = n*c and rows
/// are ordered with the output index fastest (row = point*c + output). This
/// matches the row-major flattening of an n x c evaluation block; mixing
/// conventions corrupts the Kronecker solve silently.
struct KronIdentity {
  nd::Tensor base;
  std::size_t outputs = 1;
};

struct DenseCov {
  nd::Tensor cov;
};

/// Finite-dimensional Gaussian with a structured covariance.
struct GaussianMeasure {
  nd::Tensor mean;  // length D
  std::variant<LowRankDiag, KronIdentity, DenseCov> cov;

  std::size_t dim() const { return mean.size(); }
  nd::Tensor dense_cov() const;
};

/// Exact KL(q || p) on dense materializations. Reference path for the
/// structured implementation; p must be positive definite.
double kl_dense(const GaussianMeasure& q, const GaussianMeasure& p);

/// A Kronecker prior B (x) I_c factored once per measurement set: the prior
/// side of the KL carries no gradient, so its Cholesky, log-determinant and
/// inverse trace are precomputed.
struct PriorFactor {
  nd::Tensor base;       // B
  nd::Tensor chol;       // L with L L^T = B
  double logdet = 0.0;   // logdet B
  double trace_inv = 0;  // tr(B^{-1})
  std::size_t outputs = 1;

  std::size_t joint_dim() const { return base.rows() * outputs; }
};

PriorFactor factor_kron_prior(nd::Tensor base, std::size_t outputs);

/// (B^{-1} (x) I_c) v for v with n*c rows.
nd::Tensor kron_apply_inverse(const PriorFactor& prior, const nd::Tensor& v);

/// KL( N(m, (1/M)GcGc^T + lambda I) || N(0, B (x) I_c) ) through the
/// Kronecker inverse and the matrix determinant lemma. O(n^3) once for B
/// plus O(D M^2) per call instead of O(D^3).
double kl_structured(const nd::Tensor& m, const nd::Tensor& gc, double lambda,
                     const PriorFactor& prior);

/// Taped variant: differentiable w.r.t. m and gc, not the prior.
nd::Var kl_structured(nd::Tape& tape, nd::Var m, nd::Var gc, double lambda,
                      const PriorFactor& prior);

}  // namespace degp::gauss
