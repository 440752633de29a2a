#include "degp/trainer.hpp"

#include <cmath>
#include <string>

#include "degp/posterior.hpp"

namespace degp::train {

double TemperatureParam::temperature() const { return std::exp(log_temp); }

void TemperatureParam::adam_step(double grad, double lr) {
  ++t_;
  m_ = 0.9 * m_ + 0.1 * grad;
  v_ = 0.999 * v_ + 0.001 * grad * grad;
  const double mhat = m_ / (1.0 - std::pow(0.9, static_cast<double>(t_)));
  const double vhat = v_ / (1.0 - std::pow(0.999, static_cast<double>(t_)));
  log_temp -= lr * mhat / (std::sqrt(vhat) + 1e-8);
}

nd::Tensor measurement_set(const nd::Tensor& batch_x,
                           const MeasurementPolicy& policy, nd::Rng& rng) {
  if (batch_x.rows() == 0)
    throw std::invalid_argument("measurement_set: empty batch");
  if (policy.points_per_batch == 0) return batch_x;
  const std::size_t d = batch_x.cols();
  nd::check_shape(policy.box_lo.size() == d && policy.box_hi.size() == d,
                  "measurement box bounds");
  nd::Tensor out({batch_x.rows() + policy.points_per_batch, d});
  for (std::size_t i = 0; i < batch_x.rows(); ++i)
    for (std::size_t j = 0; j < d; ++j) out(i, j) = batch_x(i, j);
  for (std::size_t i = 0; i < policy.points_per_batch; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out(batch_x.rows() + i, j) = rng.uniform(policy.box_lo(j), policy.box_hi(j));
  return out;
}

namespace {

bool is_categorical(const Likelihood& lik) {
  return std::holds_alternative<CategoricalLik>(lik);
}

// Squared norm of all trainable weights on the tape; the trunk appears once.
nd::Var taped_squared_norm(nd::Tape& tape, const nets::TapedEnsemble& te) {
  nd::Var total = tape.constant(nd::Tensor::scalar(0.0));
  auto add_set = [&](const nets::TapedWeights& tw) {
    for (std::size_t l = 0; l < tw.weights.size(); ++l) {
      total = total + sum(tape.square(tw.weights[l]));
      total = total + sum(tape.square(tw.biases[l]));
    }
  };
  add_set(te.trunk);
  for (const auto& h : te.heads) add_set(h);
  return total;
}

double value_squared_norm(const nd::Tape& tape, const nets::TapedEnsemble& te) {
  double total = 0.0;
  auto add_set = [&](const nets::TapedWeights& tw) {
    for (std::size_t l = 0; l < tw.weights.size(); ++l) {
      const nd::Tensor& w = tape.value(tw.weights[l]);
      const nd::Tensor& b = tape.value(tw.biases[l]);
      total += nd::dot(w, w) + nd::dot(b, b);
    }
  };
  add_set(te.trunk);
  for (const auto& h : te.heads) add_set(h);
  return total;
}

}  // namespace

FelboResult felbo_loss(nd::Tape& tape, const nets::EnsembleSpec& spec,
                       const nets::TapedEnsemble& te, const Batch& batch,
                       const prior::McNnGpPrior& mc_prior,
                       const TrainConfig& cfg, const TemperatureParam& temp,
                       std::uint64_t step, std::optional<double> fixed_lambda) {
  const std::size_t outputs = spec.net.output_dim;

  nd::Rng rng_nu = nd::Rng::stream(cfg.seed, step, kStreamMeasurement);
  const nd::Tensor x_tilde = measurement_set(batch.x, cfg.measurement, rng_nu);

  auto member_outs =
      ensemble_forward(tape, spec, te, tape.constant(x_tilde));
  gp::TapedBatch tb = gp::taped_batch(tape, member_outs, cfg.lambda_fraction);
  if (fixed_lambda) tb.lambda = *fixed_lambda;

  const gauss::PriorFactor prior_factor =
      prior::prior_base(mc_prior, x_tilde, outputs);

  nd::Rng rng_eps = nd::Rng::stream(cfg.seed, step, kStreamSamples);
  nd::Var samples =
      gp::sample_functions(tape, tb, cfg.likelihood_samples, rng_eps);
  nd::Var batch_block =
      tape.slice_cols(samples, 0, batch.size() * outputs);

  FelboResult out;
  nd::Var log_temp_node;
  if (is_categorical(cfg.likelihood)) {
    if (cfg.train_temperature) {
      out.log_temperature = tape.leaf(nd::Tensor::scalar(temp.log_temp));
      log_temp_node = out.log_temperature;
    } else {
      log_temp_node = tape.constant(nd::Tensor::scalar(temp.log_temp));
    }
  }

  nd::Var l1 = expected_loglik(tape, batch_block, batch, cfg.likelihood,
                               outputs, log_temp_node);
  nd::Var l2 = gauss::kl_structured(tape, tb.mean, tb.centered, tb.lambda,
                                    prior_factor);

  nd::Var loss = tape.scale(l1, -1.0) + tape.scale(l2, cfg.alpha);
  out.diag.l3 = value_squared_norm(tape, te);
  if (cfg.beta > 0.0) {
    nd::Var l3 = taped_squared_norm(tape, te);
    loss = loss + tape.scale(l3, cfg.beta);
  }

  out.loss = loss;
  out.diag.l1 = tape.value(l1).item();
  out.diag.l2 = tape.value(l2).item();
  out.diag.lambda = tb.lambda;
  out.diag.temperature = temp.temperature();
  return out;
}

Batch take(const Batch& data, const std::vector<std::size_t>& idx) {
  Batch b;
  b.x = nd::Tensor({idx.size(), data.x.cols()});
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < data.x.cols(); ++j)
      b.x(i, j) = data.x(idx[i], j);
  if (!data.y.empty()) {
    b.y = nd::Tensor({idx.size(), data.y.cols()});
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < data.y.cols(); ++j)
        b.y(i, j) = data.y(idx[i], j);
  }
  if (!data.labels.empty()) {
    b.labels.reserve(idx.size());
    for (std::size_t i : idx) b.labels.push_back(data.labels[i]);
  }
  if (!data.mask.empty()) {
    b.mask = nd::Tensor({idx.size(), data.mask.cols()});
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < data.mask.cols(); ++j)
        b.mask(i, j) = data.mask(idx[i], j);
  }
  return b;
}

History train(nets::EnsembleWeights& ens, const Batch& data,
              const prior::McNnGpPrior& mc_prior, const TrainConfig& cfg,
              TemperatureParam* temp) {
  const std::size_t n = data.size();
  if (n == 0) throw std::invalid_argument("train: empty dataset");
  const std::size_t batch_size =
      cfg.batch_size == 0 ? n : std::min(cfg.batch_size, n);
  const std::size_t steps_per_epoch = (n + batch_size - 1) / batch_size;
  const std::size_t total_steps = cfg.epochs * steps_per_epoch;

  Optimizer opt(cfg.optimizer);
  TemperatureParam local_temp;
  TemperatureParam& temperature = temp ? *temp : local_temp;

  History history;
  history.reserve(cfg.epochs);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    nd::Rng shuffle_rng = nd::Rng::stream(cfg.seed, epoch, kStreamBatchOrder);
    shuffle_rng.shuffle(order);

    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t b0 = 0; b0 < n; b0 += batch_size, ++step) {
      const std::size_t b1 = std::min(b0 + batch_size, n);
      const Batch batch = take(
          data, std::vector<std::size_t>(order.begin() + static_cast<long>(b0),
                                         order.begin() + static_cast<long>(b1)));

      nd::Tape tape;
      nets::TapedEnsemble te = lift(tape, ens);
      FelboResult r =
          felbo_loss(tape, ens.spec, te, batch, mc_prior, cfg, temperature, step);
      if (!std::isfinite(tape.value(r.loss).item()))
        throw NumericError("train: non-finite loss at step " +
                           std::to_string(step));
      tape.backward(r.loss);

      std::vector<nd::Tensor> grads;
      auto pull_set = [&](const nets::TapedWeights& tw) {
        for (std::size_t l = 0; l < tw.weights.size(); ++l) {
          grads.push_back(tape.grad(tw.weights[l]));
          grads.push_back(tape.grad(tw.biases[l]));
        }
      };
      pull_set(te.trunk);
      for (const auto& h : te.heads) pull_set(h);
      for (const auto& g : grads)
        if (!g.all_finite())
          throw NumericError("train: non-finite gradient at step " +
                             std::to_string(step));
      clip_global_norm(grads, cfg.clip_norm);

      const double lr =
          scheduled_lr(cfg.optimizer, step, total_steps, steps_per_epoch);
      opt.step(ens.parameters(), grads, lr);

      if (r.log_temperature.valid())
        temperature.adam_step(tape.grad(r.log_temperature).item(),
                              cfg.temperature_lr);

      rec.l1 += r.diag.l1;
      rec.l2 += r.diag.l2;
      rec.l3 += r.diag.l3;
      rec.learning_rate = lr;
    }
    rec.l1 /= static_cast<double>(steps_per_epoch);
    rec.l2 /= static_cast<double>(steps_per_epoch);
    rec.l3 /= static_cast<double>(steps_per_epoch);
    rec.temperature = temperature.temperature();
    history.push_back(rec);
  }
  return history;
}

}  // namespace degp::train
