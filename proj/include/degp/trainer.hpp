#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "degp/ensemble.hpp"
#include "degp/likelihood.hpp"
#include "degp/optimizer.hpp"
#include "degp/prior_kernel.hpp"
#include "degp/rng.hpp"

namespace degp::train {

/// Distribution nu for extra measurement points: uniform over a box,
/// points_per_batch draws appended to every mini-batch (0 = none).
struct MeasurementPolicy {
  nd::Tensor box_lo;  // per input dimension
  nd::Tensor box_hi;
  std::size_t points_per_batch = 0;
};

struct TrainConfig {
  double alpha = 1.0;            // KL coefficient
  double beta = 0.0;             // weight-norm coefficient
  double lambda_fraction = 0.05; // jitter as a fraction of the mean eigenvalue
  std::size_t likelihood_samples = 256;  // U
  MeasurementPolicy measurement;
  Likelihood likelihood = GaussianLik{};
  OptimizerSpec optimizer;
  std::size_t epochs = 0;
  std::size_t batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 0;
  bool train_temperature = false;
  double temperature_lr = 1e-3;
  double clip_norm = 100.0;  // inactive in normal runs
};

/// Trainable softmax temperature with its own Adam state.
struct TemperatureParam {
  double log_temp = 0.0;
  double temperature() const;
  void adam_step(double grad, double lr);

 private:
  double m_ = 0.0, v_ = 0.0;
  std::size_t t_ = 0;
};

/// Measurement set for one step: batch inputs first, then nu draws.
nd::Tensor measurement_set(const nd::Tensor& batch_x,
                           const MeasurementPolicy& policy, nd::Rng& rng);

struct FelboDiag {
  double l1 = 0.0;       // expected log-likelihood
  double l2 = 0.0;       // KL to the prior marginal
  double l3 = 0.0;       // summed squared weight norm
  double lambda = 0.0;
  double temperature = 1.0;
};

struct FelboResult {
  nd::Var loss;  // -(L1 - alpha L2 - beta L3), for minimization
  FelboDiag diag;
  nd::Var log_temperature;  // leaf when the temperature is trainable
};

/// One step's objective. Noise and nu draws come from streams keyed by
/// (cfg.seed, step), so a fixed step is fully deterministic. lambda is
/// recomputed from the current members and treated as a constant of the step
/// (detached); fixed_lambda pins it externally, which the finite-difference
/// gradient harness relies on.
FelboResult felbo_loss(nd::Tape& tape, const nets::EnsembleSpec& spec,
                       const nets::TapedEnsemble& te, const Batch& batch,
                       const prior::McNnGpPrior& mc_prior,
                       const TrainConfig& cfg, const TemperatureParam& temp,
                       std::uint64_t step,
                       std::optional<double> fixed_lambda = std::nullopt);

struct EpochRecord {
  std::size_t epoch = 0;
  double l1 = 0.0, l2 = 0.0, l3 = 0.0;  // epoch means
  double temperature = 1.0;
  double learning_rate = 0.0;
};

using History = std::vector<EpochRecord>;

/// Joint training of all members (and optionally the temperature). A numeric
/// error aborts before the offending update, so the weights in `ens` are the
/// last good state.
History train(nets::EnsembleWeights& ens, const Batch& data,
              const prior::McNnGpPrior& mc_prior, const TrainConfig& cfg,
              TemperatureParam* temp = nullptr);

/// Rows of `data` selected by index, preserving targets/labels/mask.
Batch take(const Batch& data, const std::vector<std::size_t>& idx);

// Stream purposes used by the trainer (and by tests that re-create its draws).
inline constexpr std::uint64_t kStreamBatchOrder = 1;
inline constexpr std::uint64_t kStreamMeasurement = 2;
inline constexpr std::uint64_t kStreamSamples = 3;

}  // namespace degp::train
