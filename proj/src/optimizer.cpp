#include "degp/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace degp::train {

double scheduled_lr(const OptimizerSpec& spec, std::size_t step,
                    std::size_t total_steps, std::size_t steps_per_epoch) {
  switch (spec.schedule) {
    case ScheduleKind::kConstant:
      return spec.learning_rate;
    case ScheduleKind::kCosine: {
      const double frac = total_steps <= 1
                              ? 0.0
                              : static_cast<double>(step) /
                                    static_cast<double>(total_steps);
      return spec.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
    }
    case ScheduleKind::kStepDecay: {
      const std::size_t epoch = steps_per_epoch == 0 ? 0 : step / steps_per_epoch;
      const auto periods = static_cast<double>(epoch / spec.decay_every_epochs);
      return spec.learning_rate * std::pow(spec.decay_factor, periods);
    }
  }
  throw std::logic_error("unknown schedule");
}

void Optimizer::step(const std::vector<nd::Tensor*>& params,
                     const std::vector<nd::Tensor>& grads, double lr) {
  if (params.size() != grads.size())
    throw std::invalid_argument("Optimizer::step: parameter/gradient mismatch");
  if (slot1_.empty()) {
    for (const nd::Tensor* p : params) slot1_.emplace_back(p->shape());
    if (spec_.kind == OptimizerKind::kAdam)
      for (const nd::Tensor* p : params) slot2_.emplace_back(p->shape());
  }
  ++t_;
  for (std::size_t k = 0; k < params.size(); ++k) {
    nd::Tensor& p = *params[k];
    const nd::Tensor& g = grads[k];
    nd::check_shape(p.same_shape(g), "Optimizer::step gradient shape");
    if (spec_.kind == OptimizerKind::kSgdMomentum) {
      nd::Tensor& v = slot1_[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        v(i) = spec_.momentum * v(i) + g(i);
        p(i) -= lr * v(i);
      }
    } else {
      nd::Tensor& m = slot1_[k];
      nd::Tensor& v = slot2_[k];
      const double bc1 = 1.0 - std::pow(spec_.beta1, static_cast<double>(t_));
      const double bc2 = 1.0 - std::pow(spec_.beta2, static_cast<double>(t_));
      for (std::size_t i = 0; i < p.size(); ++i) {
        m(i) = spec_.beta1 * m(i) + (1.0 - spec_.beta1) * g(i);
        v(i) = spec_.beta2 * v(i) + (1.0 - spec_.beta2) * g(i) * g(i);
        p(i) -= lr * (m(i) / bc1) / (std::sqrt(v(i) / bc2) + spec_.eps);
      }
    }
  }
}

double clip_global_norm(std::vector<nd::Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += nd::dot(g, g);
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (auto& g : grads)
      for (std::size_t i = 0; i < g.size(); ++i) g(i) *= factor;
  }
  return norm;
}

}  // namespace degp::train
