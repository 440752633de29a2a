#pragma once

#include <cstddef>
#include <vector>

#include "degp/tensor.hpp"

namespace degp::train {

enum class OptimizerKind { kSgdMomentum, kAdam };
enum class ScheduleKind { kConstant, kCosine, kStepDecay };

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  ScheduleKind schedule = ScheduleKind::kConstant;
  double decay_factor = 0.99;          // step-decay multiplier
  std::size_t decay_every_epochs = 5;  // step-decay cadence
};

/// Learning rate at a given step. Cosine anneals over total_steps; step decay
/// multiplies by decay_factor every decay_every_epochs epochs.
double scheduled_lr(const OptimizerSpec& spec, std::size_t step,
                    std::size_t total_steps, std::size_t steps_per_epoch);

/// SGD-with-momentum or Adam over an ordered parameter list. State is keyed
/// by position, so the list must be stable across steps.
class Optimizer {
 public:
  explicit Optimizer(OptimizerSpec spec) : spec_(spec) {}

  const OptimizerSpec& spec() const { return spec_; }

  void step(const std::vector<nd::Tensor*>& params,
            const std::vector<nd::Tensor>& grads, double lr);

 private:
  OptimizerSpec spec_;
  std::vector<nd::Tensor> slot1_;  // momentum / first moment
  std::vector<nd::Tensor> slot2_;  // second moment (Adam)
  std::size_t t_ = 0;
};

/// Scale gradients in place so the global L2 norm is at most max_norm.
/// Returns the pre-clip norm.
double clip_global_norm(std::vector<nd::Tensor>& grads, double max_norm);

}  // namespace degp::train
