#include "degp/likelihood.hpp"

#include <cmath>
#include <numbers>

namespace degp::train {

namespace {

double observed_count(const Batch& batch, std::size_t outputs) {
  if (batch.mask.empty())
    return static_cast<double>(batch.size() * outputs);
  return nd::sum(batch.mask);
}

nd::Var gaussian_quadratic(nd::Tape& tape, nd::Var values, const Batch& batch,
                           std::size_t outputs) {
  const std::size_t width = batch.size() * outputs;
  nd::check_shape(batch.y.size() == width, "gaussian targets");
  nd::Tensor neg_y({width});
  for (std::size_t i = 0; i < width; ++i) neg_y(i) = -batch.y(i);
  nd::Var diff = tape.add_rowvec(values, tape.constant(std::move(neg_y)));
  if (!batch.mask.empty()) {
    nd::check_shape(batch.mask.size() == width, "gaussian mask");
    diff = tape.mul_rowvec(diff, tape.constant(batch.mask.reshaped({width})));
  }
  return sum(tape.square(diff));
}

nd::Var categorical_picked(nd::Tape& tape, nd::Var values, const Batch& batch,
                           std::size_t outputs, nd::Var log_temperature) {
  const std::size_t rows = tape.value(values).rows();
  const std::size_t n = batch.size();
  nd::check_shape(batch.labels.size() == n, "categorical labels");
  nd::Var logits =
      tape.reshape(values, {rows * n, outputs});
  if (log_temperature.valid()) {
    nd::Var inv_t = tape.exp(tape.scale(log_temperature, -1.0));
    logits = tape.scale_by(logits, inv_t);
  }
  nd::Var lsm = tape.log_softmax_rows(logits);
  std::vector<std::size_t> tiled(rows * n);
  for (std::size_t u = 0; u < rows; ++u)
    for (std::size_t i = 0; i < n; ++i) tiled[u * n + i] = batch.labels[i];
  return sum(tape.gather_cols(lsm, std::move(tiled)));
}

}  // namespace

nd::Var expected_loglik(nd::Tape& tape, nd::Var samples, const Batch& batch,
                        const Likelihood& lik, std::size_t outputs,
                        nd::Var log_temperature) {
  const nd::Tensor& sv = tape.value(samples);
  if (!sv.all_finite())
    throw NumericError("expected_loglik: non-finite function sample");
  const std::size_t u = sv.rows();
  nd::check_shape(sv.cols() == batch.size() * outputs,
                  "expected_loglik sample width");

  if (const auto* g = std::get_if<GaussianLik>(&lik)) {
    const double count = observed_count(batch, outputs);
    const double log_norm =
        -0.5 * count * std::log(2.0 * std::numbers::pi * g->noise_var);
    nd::Var quad = gaussian_quadratic(tape, samples, batch, outputs);
    return tape.scale(quad, -1.0 / (2.0 * g->noise_var * static_cast<double>(u))) +
           tape.constant(nd::Tensor::scalar(log_norm));
  }
  nd::Var picked = categorical_picked(tape, samples, batch, outputs,
                                      log_temperature);
  return tape.scale(picked, 1.0 / static_cast<double>(u));
}

nd::Var loglik(nd::Tape& tape, nd::Var prediction, const Batch& batch,
               const Likelihood& lik) {
  const nd::Tensor& pv = tape.value(prediction);
  if (!pv.all_finite()) throw NumericError("loglik: non-finite prediction");
  const std::size_t outputs = pv.cols();
  nd::Var flat = tape.reshape(prediction, {1, batch.size() * outputs});
  if (const auto* g = std::get_if<GaussianLik>(&lik)) {
    const double count = observed_count(batch, outputs);
    const double log_norm =
        -0.5 * count * std::log(2.0 * std::numbers::pi * g->noise_var);
    nd::Var quad = gaussian_quadratic(tape, flat, batch, outputs);
    return tape.scale(quad, -1.0 / (2.0 * g->noise_var)) +
           tape.constant(nd::Tensor::scalar(log_norm));
  }
  return categorical_picked(tape, flat, batch, outputs, nd::Var{});
}

}  // namespace degp::train
