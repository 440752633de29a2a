#pragma once

#include <optional>
#include <vector>

#include "degp/tensor.hpp"

namespace degp::eval {

struct ClassificationMetrics {
  double nll = 0.0;
  double accuracy = 0.0;
  double ece = 0.0;
};

/// NLL, accuracy and expected calibration error (equal-width confidence
/// bins; 15 by default, the usual convention).
ClassificationMetrics classification_metrics(const nd::Tensor& probs,
                                             const std::vector<std::size_t>& labels,
                                             std::size_t bins = 15);

double rmse(const nd::Tensor& predicted, const nd::Tensor& truth);

struct CurvePoint {
  double tau = 0.0;
  std::optional<double> error;  // absent when no point falls below tau
  std::size_t count = 0;
};

/// Mean 0/1 error over points whose normalized uncertainty is <= tau, for
/// each tau in the grid. Uncertainties are normalized by the pool maximum,
/// so rescaling them by any positive constant leaves the curve unchanged.
std::vector<CurvePoint> error_vs_uncertainty(const std::vector<int>& wrong,
                                             const nd::Tensor& uncertainty,
                                             const std::vector<double>& taus);

}  // namespace degp::eval
