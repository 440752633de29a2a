#pragma once

#include <cstddef>
#include <stdexcept>
#include <variant>
#include <vector>

#include "degp/tape.hpp"
#include "degp/tensor.hpp"

namespace degp::train {

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GaussianLik {
  double noise_var = 0.05;
};

/// Categorical over C classes; logits divided by a temperature before the
/// softmax. Gaussian runs never touch the temperature.
struct CategoricalLik {};

using Likelihood = std::variant<GaussianLik, CategoricalLik>;

/// Supervised batch. Gaussian targets are n x C values with an optional
/// {0,1} mask of the same shape (unmasked entries carry likelihood terms);
/// categorical targets are label indices.
struct Batch {
  nd::Tensor x;  // n x d
  nd::Tensor y;  // n x C, gaussian only
  std::vector<std::size_t> labels;
  nd::Tensor mask;  // empty = all observed

  std::size_t size() const { return x.rows(); }
};

/// Average over U function samples of the batch log-likelihood
/// (Alg-style L1): samples is U x (n*C), restricted to the batch block.
/// temperature is a one-element node used only by the categorical branch.
nd::Var expected_loglik(nd::Tape& tape, nd::Var samples, const Batch& batch,
                        const Likelihood& lik, std::size_t outputs,
                        nd::Var temperature);

/// Plain log-likelihood of a single deterministic prediction (n x C), used
/// by the per-member baseline trainers.
nd::Var loglik(nd::Tape& tape, nd::Var prediction, const Batch& batch,
               const Likelihood& lik);

}  // namespace degp::train
