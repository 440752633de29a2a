#pragma once

#include <cstdint>
#include <vector>

#include "degp/rng.hpp"
#include "degp/tape.hpp"
#include "degp/tensor.hpp"

namespace degp::nets {

enum class Activation { kRelu, kTanh, kIdentity };

/// Multilayer perceptron architecture. An empty hidden list is a linear model.
struct MlpSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden;
  std::size_t output_dim = 1;
  Activation activation = Activation::kRelu;

  /// Width of the penultimate representation (input_dim when there is no
  /// hidden layer: the feature projector is the identity).
  std::size_t feature_dim() const {
    return hidden.empty() ? input_dim : hidden.back();
  }
  std::size_t layer_count() const { return hidden.size() + 1; }
  void validate() const;
};

/// One member's parameters: per layer a weight matrix (in x out) and a bias.
struct WeightSet {
  std::vector<nd::Tensor> weights;
  std::vector<nd::Tensor> biases;

  std::size_t layer_count() const { return weights.size(); }
  std::size_t param_count() const;
  double squared_norm() const;

  /// Flattened copy of all parameters (weights then bias, layer by layer).
  std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& flat);
};

/// He-style initialization: weights ~ N(0, 2/fan_in), biases zero.
/// Deterministic for a fixed seed.
WeightSet init_mlp(const MlpSpec& spec, std::uint64_t seed);

/// Draw from the Gaussian weight prior N(0, diag(sigma0^2)):
/// weights ~ N(0, weight_var_scale/fan_in), biases ~ N(0, bias_var).
WeightSet sample_gaussian_weights(const MlpSpec& spec, double weight_var_scale,
                                  double bias_var, nd::Rng& rng);

nd::Tensor activate(const nd::Tensor& pre, Activation act);

/// Forward pass, x is n x input_dim, result n x output_dim.
nd::Tensor forward(const MlpSpec& spec, const WeightSet& w, const nd::Tensor& x);

/// Penultimate activations, n x feature_dim.
nd::Tensor forward_features(const MlpSpec& spec, const WeightSet& w,
                            const nd::Tensor& x);

/// Weights lifted onto a tape as differentiable leaves.
struct TapedWeights {
  std::vector<nd::Var> weights;
  std::vector<nd::Var> biases;
};

TapedWeights lift(nd::Tape& tape, const WeightSet& w);

nd::Var forward(nd::Tape& tape, const MlpSpec& spec, const TapedWeights& w,
                nd::Var x);

}  // namespace degp::nets
