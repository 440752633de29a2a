#pragma once

#include <cstdint>
#include <vector>

#include "degp/gaussian.hpp"
#include "degp/mlp.hpp"
#include "degp/tensor.hpp"

namespace degp::prior {

/// Finitely wide random-feature prior: a ReLU projector h with frozen weight
/// draws w_s ~ N(0, diag(sigma0^2)) and an analytic Gaussian readout of
/// variance (sigma_w^2, sigma_b^2). The induced kernel on outputs is
/// (sigma_w^2 k_hat + sigma_b^2) I_C with
/// k_hat(x,x') = (1/(S*Chat)) sum_s h(x,w_s)^T h(x',w_s).
struct PriorSpec {
  std::size_t input_dim = 1;
  /// Hidden widths of the projector; the last is Chat. Empty = identity
  /// projector (depth-0 kernel).
  std::vector<std::size_t> widths;
  double sigma_w2 = 2.0;
  double sigma_b2 = 0.01;
  std::size_t mc_samples = 10;  // S
  std::uint64_t seed = 0;

  std::size_t feature_dim() const {
    return widths.empty() ? input_dim : widths.back();
  }
  void validate() const;
};

/// Prior with draws sampled once at construction and frozen for the run, so
/// the KL target stays a single fixed distribution during inference.
class McNnGpPrior {
 public:
  explicit McNnGpPrior(PriorSpec spec);

  const PriorSpec& spec() const { return spec_; }

  /// Base kernel matrix B = sigma_w^2 k_hat + sigma_b^2 on one point set.
  nd::Tensor base(const nd::Tensor& x) const;

  /// Projector features for draw s, n x Chat.
  nd::Tensor features(std::size_t s, const nd::Tensor& x) const;

 private:
  PriorSpec spec_;
  nets::MlpSpec projector_;
  std::vector<nets::WeightSet> draws_;
};

/// B factored for the joint prior B (x) I_C. Adds jitter
/// 1e-8 * mean diagonal if the first Cholesky fails; failure after jitter
/// propagates as not-positive-definite.
gauss::PriorFactor prior_base(const McNnGpPrior& prior, const nd::Tensor& x,
                              std::size_t outputs);

/// Analytic infinite-width ReLU kernel (arc-cosine recursion):
///   K^0(x,x')    = sigma_w^2 <x,x'>/d + sigma_b^2
///   K^{l+1}(x,x') = sigma_w^2/(2 pi) sqrt(K^l(x,x) K^l(x',x'))
///                   (sin t + (pi - t) cos t) + sigma_b^2,
/// t = arccos of the clamped correlation. depth = number of hidden layers.
nd::Tensor arccos_kernel(const nd::Tensor& xa, const nd::Tensor& xb,
                         std::size_t depth, double sigma_w2, double sigma_b2);

struct GpRegression {
  nd::Tensor mean;      // per test point
  nd::Tensor variance;  // per test point, clamped at zero
  std::size_t clamped = 0;  // how many variances were clamped
};

/// Exact GP regression from kernel blocks:
/// mean = Kx^T (K + noise I)^{-1} y, var = k** - q^T q with q = L^{-1} Kx.
GpRegression exact_gp_regression(const nd::Tensor& k_train,
                                 const nd::Tensor& k_cross,
                                 const nd::Tensor& k_test_diag,
                                 const nd::Tensor& y, double noise_var);

}  // namespace degp::prior
