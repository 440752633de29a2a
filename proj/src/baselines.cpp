#include "degp/baselines.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace degp::baselines {

AnchorSet draw_anchors(const nets::EnsembleSpec& spec, double weight_var_scale,
                       double bias_var, std::uint64_t seed) {
  spec.validate();
  AnchorSet set;
  nd::Rng rng(seed ^ 0x616e63686fULL);
  for (std::size_t i = 0; i < spec.members; ++i)
    set.anchors.push_back(nets::sample_gaussian_weights(
        spec.head_spec(), weight_var_scale, bias_var, rng));
  return set;
}

namespace {

using PenaltyFn = std::function<nd::Var(nd::Tape&, std::size_t member,
                                        const nets::TapedWeights&)>;

// Independent per-member SGD sharing batching/optimizer machinery with the
// ensemble trainer, so method comparisons isolate the objective.
train::History train_members(nets::EnsembleWeights& ens,
                             const train::Batch& data,
                             const train::TrainConfig& cfg,
                             const PenaltyFn& penalty) {
  if (ens.spec.shared_layers != 0)
    throw std::invalid_argument(
        "baseline trainers require independent members");
  const std::size_t n = data.size();
  if (n == 0) throw std::invalid_argument("train_members: empty dataset");
  const std::size_t batch_size =
      cfg.batch_size == 0 ? n : std::min(cfg.batch_size, n);
  const std::size_t steps_per_epoch = (n + batch_size - 1) / batch_size;
  const std::size_t total_steps = cfg.epochs * steps_per_epoch;
  const std::size_t members = ens.member_count();
  const nets::MlpSpec head = ens.spec.head_spec();

  std::vector<train::Optimizer> opts(members, train::Optimizer(cfg.optimizer));
  train::History history;
  history.reserve(cfg.epochs);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    nd::Rng shuffle_rng =
        nd::Rng::stream(cfg.seed, epoch, train::kStreamBatchOrder);
    shuffle_rng.shuffle(order);

    train::EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t b0 = 0; b0 < n; b0 += batch_size, ++step) {
      const std::size_t b1 = std::min(b0 + batch_size, n);
      const train::Batch batch = train::take(
          data, std::vector<std::size_t>(order.begin() + static_cast<long>(b0),
                                         order.begin() + static_cast<long>(b1)));
      const double lr = train::scheduled_lr(cfg.optimizer, step, total_steps,
                                            steps_per_epoch);

      for (std::size_t i = 0; i < members; ++i) {
        nd::Tape tape;
        nets::TapedWeights tw = lift(tape, ens.heads[i]);
        nd::Var pred = forward(tape, head, tw, tape.constant(batch.x));
        nd::Var nll = tape.scale(loglik(tape, pred, batch, cfg.likelihood), -1.0);
        nd::Var loss = penalty ? nll + penalty(tape, i, tw) : nll;
        if (!std::isfinite(tape.value(loss).item()))
          throw train::NumericError("baseline: non-finite loss at step " +
                                    std::to_string(step));
        tape.backward(loss);

        std::vector<nd::Tensor*> params;
        std::vector<nd::Tensor> grads;
        for (std::size_t l = 0; l < tw.weights.size(); ++l) {
          params.push_back(&ens.heads[i].weights[l]);
          params.push_back(&ens.heads[i].biases[l]);
          grads.push_back(tape.grad(tw.weights[l]));
          grads.push_back(tape.grad(tw.biases[l]));
        }
        for (const auto& g : grads)
          if (!g.all_finite())
            throw train::NumericError("baseline: non-finite gradient at step " +
                                      std::to_string(step));
        train::clip_global_norm(grads, cfg.clip_norm);
        opts[i].step(params, grads, lr);

        rec.l1 += tape.value(nll).item() / static_cast<double>(members);
      }
      rec.learning_rate = lr;
    }
    rec.l1 /= static_cast<double>(steps_per_epoch);
    rec.l3 = ens.squared_norm();
    history.push_back(rec);
  }
  return history;
}

}  // namespace

train::History train_de(nets::EnsembleWeights& ens, const train::Batch& data,
                        const train::TrainConfig& cfg) {
  return train_members(ens, data, cfg, nullptr);
}

train::History train_rde(nets::EnsembleWeights& ens, const train::Batch& data,
                         const train::TrainConfig& cfg, double weight_decay) {
  if (weight_decay == 0.0) return train_members(ens, data, cfg, nullptr);
  PenaltyFn penalty = [weight_decay](nd::Tape& tape, std::size_t,
                                     const nets::TapedWeights& tw) {
    nd::Var total = tape.constant(nd::Tensor::scalar(0.0));
    for (std::size_t l = 0; l < tw.weights.size(); ++l) {
      total = total + sum(tape.square(tw.weights[l]));
      total = total + sum(tape.square(tw.biases[l]));
    }
    return tape.scale(total, weight_decay);
  };
  return train_members(ens, data, cfg, penalty);
}

train::History train_rms(nets::EnsembleWeights& ens, const train::Batch& data,
                         const train::TrainConfig& cfg, double gamma,
                         const AnchorSet& anchors) {
  if (anchors.anchors.size() != ens.member_count())
    throw std::invalid_argument("train_rms: anchor count mismatch");
  if (gamma == 0.0) return train_members(ens, data, cfg, nullptr);
  PenaltyFn penalty = [gamma, &anchors](nd::Tape& tape, std::size_t member,
                                        const nets::TapedWeights& tw) {
    const nets::WeightSet& a = anchors.anchors[member];
    nd::Var total = tape.constant(nd::Tensor::scalar(0.0));
    for (std::size_t l = 0; l < tw.weights.size(); ++l) {
      nd::Var dw = tw.weights[l] - tape.constant(a.weights[l]);
      nd::Var db = tw.biases[l] - tape.constant(a.biases[l]);
      total = total + sum(tape.square(dw)) + sum(tape.square(db));
    }
    return tape.scale(total, gamma);
  };
  return train_members(ens, data, cfg, penalty);
}

prior::GpRegression nngp_regression_baseline(const nd::Tensor& train_x,
                                             const nd::Tensor& train_y,
                                             const nd::Tensor& test_x,
                                             std::size_t depth, double sigma_w2,
                                             double sigma_b2, double noise_var) {
  const nd::Tensor k_train =
      prior::arccos_kernel(train_x, train_x, depth, sigma_w2, sigma_b2);
  const nd::Tensor k_cross =
      prior::arccos_kernel(train_x, test_x, depth, sigma_w2, sigma_b2);
  const nd::Tensor k_test =
      prior::arccos_kernel(test_x, test_x, depth, sigma_w2, sigma_b2);
  nd::Tensor k_diag({test_x.rows()});
  for (std::size_t i = 0; i < k_diag.size(); ++i) k_diag(i) = k_test(i, i);
  return prior::exact_gp_regression(k_train, k_cross, k_diag, train_y,
                                    noise_var);
}

}  // namespace degp::baselines
