#pragma once

#include <vector>

#include "degp/ensemble.hpp"
#include "degp/posterior.hpp"
#include "degp/rng.hpp"

namespace degp::eval {

/// Per-point predictive summary. Classification: mean is n x C class
/// probabilities. Regression: mean and variance are per point (mixture
/// moments including observation noise). epistemic is raw; the normalized
/// copy is filled by normalize_epistemic over an evaluation pool.
struct PredictiveSummary {
  nd::Tensor mean;
  nd::Tensor variance;
  nd::Tensor epistemic;
  nd::Tensor epistemic_norm;
  std::size_t sample_count = 0;
};

/// Function draws backing the predictive: ensemble members for the
/// point-mass families (S = M), q-samples for the GP posterior.
std::vector<nd::Tensor> member_function_samples(const nets::EnsembleWeights& ens,
                                                const nd::Tensor& x);
std::vector<nd::Tensor> gp_function_samples(const nets::EnsembleWeights& ens,
                                            const nd::Tensor& x,
                                            double lambda_fraction,
                                            std::size_t samples, nd::Rng& rng);

/// Monte Carlo posterior predictive, regression: mixture of N(f_s, noise).
/// Epistemic part is the spread of the sample means.
PredictiveSummary regression_predictive(const std::vector<nd::Tensor>& fs,
                                        double noise_var);

/// Monte Carlo posterior predictive, classification: mean softmax(f_s / T);
/// epistemic is the prediction-function mutual information.
PredictiveSummary classification_predictive(const std::vector<nd::Tensor>& fs,
                                            double temperature = 1.0);

/// Rowwise softmax with temperature.
nd::Tensor softmax_rows(const nd::Tensor& logits, double temperature);

/// Natural-log Shannon entropy of a probability row, 0 log 0 = 0.
double entropy(const nd::Tensor& probs, std::size_t row);

/// H(mean p_s) - mean H(p_s) per point, each sample an n x C simplex block.
nd::Tensor mutual_info(const std::vector<nd::Tensor>& prob_samples);

/// Mixture negative log-likelihood -log (1/S) sum_s N(y | f_s, noise) per
/// point, averaged.
double regression_nll(const std::vector<nd::Tensor>& fs, const nd::Tensor& y,
                      double noise_var);

/// Scale raw epistemic values into [0,1] by the max over the whole pool.
void normalize_epistemic(std::vector<PredictiveSummary*> pool);

}  // namespace degp::eval
