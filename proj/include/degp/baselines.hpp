#pragma once

#include <cstdint>
#include <vector>

#include "degp/ensemble.hpp"
#include "degp/prior_kernel.hpp"
#include "degp/trainer.hpp"

namespace degp::baselines {

/// Frozen random weight collections the RMS members are pulled towards.
struct AnchorSet {
  std::vector<nets::WeightSet> anchors;
};

/// Anchors drawn from N(0, diag(sigma0^2)): weight variance
/// weight_var_scale/fan_in, bias variance bias_var. Immutable thereafter.
AnchorSet draw_anchors(const nets::EnsembleSpec& spec, double weight_var_scale,
                       double bias_var, std::uint64_t seed);

/// Per-member maximum likelihood; no cross-member terms anywhere. All members
/// see the same batch order, so identically initialized members stay
/// identical.
train::History train_de(nets::EnsembleWeights& ens, const train::Batch& data,
                        const train::TrainConfig& cfg);

/// Per-member MAP: adds weight_decay * ||w_i||^2 to each member's loss.
train::History train_rde(nets::EnsembleWeights& ens, const train::Batch& data,
                         const train::TrainConfig& cfg, double weight_decay);

/// Anchored ensembles: adds gamma * ||w_i - a_i||^2 per member.
train::History train_rms(nets::EnsembleWeights& ens, const train::Batch& data,
                         const train::TrainConfig& cfg, double gamma,
                         const AnchorSet& anchors);

/// Analytic infinite-width ReLU GP regression; no network training.
prior::GpRegression nngp_regression_baseline(const nd::Tensor& train_x,
                                             const nd::Tensor& train_y,
                                             const nd::Tensor& test_x,
                                             std::size_t depth, double sigma_w2,
                                             double sigma_b2, double noise_var);

}  // namespace degp::baselines
