#pragma once

#include <utility>
#include <vector>

#include "degp/ensemble.hpp"
#include "degp/gaussian.hpp"
#include "degp/rng.hpp"
#include "degp/tape.hpp"
#include "degp/tensor.hpp"

namespace degp::gp {

/// Marginal of the ensemble-defined process on a finite point set:
/// mean m (length D = n*C), centered member columns Gc (D x M, column i is
/// vec(g_i) - m) and the jitter lambda. Covariance is (1/M) Gc Gc^T + lambda I.
struct FunctionBatch {
  nd::Tensor mean;
  nd::Tensor centered;
  double lambda = 0.0;

  std::size_t dim() const { return mean.size(); }
  std::size_t members() const { return centered.cols(); }
  gauss::GaussianMeasure measure() const;
};

/// Column mean and centered columns of a raw M x D evaluation block.
std::pair<nd::Tensor, nd::Tensor> mean_and_center(const nd::Tensor& raw);

/// Stack member outputs (each n x C, row-major so the output index is
/// fastest) into the raw M x D block.
nd::Tensor stack_members(const std::vector<nd::Tensor>& member_outputs);

/// lambda = fraction * mean eigenvalue of (1/M) Gc Gc^T
///        = fraction * ||Gc||_F^2 / (M D), floored at 1e-8 so a collapsed
/// ensemble still yields a valid covariance.
double lambda_from_trace(const nd::Tensor& gc, double fraction);
inline constexpr double kLambdaFloor = 1e-8;

/// Ensemble marginal at the given points.
FunctionBatch batch_at(const nets::EnsembleWeights& ens, const nd::Tensor& x,
                       double lambda_fraction);

gauss::GaussianMeasure posterior_at(const nets::EnsembleWeights& ens,
                                    const nd::Tensor& x, double lambda_fraction);

/// U pathwise samples, one per row:
/// f = m + (1/sqrt(M)) sum_i eps_i (g_i - m) + sqrt(lambda) eps0.
nd::Tensor sample_functions(const FunctionBatch& batch, std::size_t u,
                            nd::Rng& rng);

/// Taped counterpart of FunctionBatch; lambda is recomputed from values and
/// deliberately constant under differentiation.
struct TapedBatch {
  nd::Var mean;      // D
  nd::Var centered;  // D x M
  double lambda = 0.0;
};

/// Build the taped batch from taped member outputs (each n x C).
TapedBatch taped_batch(nd::Tape& tape, const std::vector<nd::Var>& member_outputs,
                       double lambda_fraction);

/// Pathwise samples on the tape, differentiable w.r.t. mean and Gc.
nd::Var sample_functions(nd::Tape& tape, const TapedBatch& batch, std::size_t u,
                         nd::Rng& rng);

}  // namespace degp::gp
