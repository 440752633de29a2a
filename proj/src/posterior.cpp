#include "degp/posterior.hpp"

#include <cmath>
#include <stdexcept>

namespace degp::gp {

gauss::GaussianMeasure FunctionBatch::measure() const {
  return {mean, gauss::LowRankDiag{centered, lambda}};
}

std::pair<nd::Tensor, nd::Tensor> mean_and_center(const nd::Tensor& raw) {
  nd::check_shape(raw.rank() == 2 && raw.rows() >= 1, "mean_and_center: M x D");
  const std::size_t m = raw.rows();
  const std::size_t d = raw.cols();
  nd::Tensor mean({d});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < d; ++j) mean(j) += raw(i, j);
  for (std::size_t j = 0; j < d; ++j) mean(j) /= static_cast<double>(m);
  nd::Tensor gc({d, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < d; ++j) gc(j, i) = raw(i, j) - mean(j);
  return {std::move(mean), std::move(gc)};
}

nd::Tensor stack_members(const std::vector<nd::Tensor>& member_outputs) {
  if (member_outputs.empty())
    throw std::invalid_argument("stack_members: empty ensemble");
  const std::size_t d = member_outputs[0].size();
  nd::Tensor raw({member_outputs.size(), d});
  for (std::size_t i = 0; i < member_outputs.size(); ++i) {
    nd::check_shape(member_outputs[i].size() == d, "stack_members widths");
    for (std::size_t j = 0; j < d; ++j) raw(i, j) = member_outputs[i](j);
  }
  return raw;
}

double lambda_from_trace(const nd::Tensor& gc, double fraction) {
  if (!(fraction > 0.0))
    throw std::invalid_argument("lambda_from_trace: fraction must be positive");
  const double md = static_cast<double>(gc.rows()) * static_cast<double>(gc.cols());
  const double mean_eig = nd::dot(gc, gc) / md;
  return std::max(fraction * mean_eig, kLambdaFloor);
}

FunctionBatch batch_at(const nets::EnsembleWeights& ens, const nd::Tensor& x,
                       double lambda_fraction) {
  if (x.rows() == 0) throw std::invalid_argument("batch_at: empty point set");
  auto [mean, gc] = mean_and_center(stack_members(ensemble_forward(ens, x)));
  FunctionBatch b;
  b.lambda = lambda_from_trace(gc, lambda_fraction);
  b.mean = std::move(mean);
  b.centered = std::move(gc);
  return b;
}

gauss::GaussianMeasure posterior_at(const nets::EnsembleWeights& ens,
                                    const nd::Tensor& x, double lambda_fraction) {
  return batch_at(ens, x, lambda_fraction).measure();
}

nd::Tensor sample_functions(const FunctionBatch& batch, std::size_t u,
                            nd::Rng& rng) {
  if (u == 0) throw std::invalid_argument("sample_functions: U >= 1");
  const std::size_t d = batch.dim();
  const std::size_t m = batch.members();
  const nd::Tensor eps = rng.normal_tensor({u, m});
  const nd::Tensor eps0 = rng.normal_tensor({u, d});
  nd::Tensor out({u, d});
  const double root_lambda = std::sqrt(batch.lambda);
  for (std::size_t i = 0; i < u; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out(i, j) = batch.mean(j) + root_lambda * eps0(i, j);
  nd::matmul_acc(eps, batch.centered, out, false, true,
                 1.0 / std::sqrt(static_cast<double>(m)));
  return out;
}

TapedBatch taped_batch(nd::Tape& tape, const std::vector<nd::Var>& member_outputs,
                       double lambda_fraction) {
  if (member_outputs.empty())
    throw std::invalid_argument("taped_batch: empty ensemble");
  const std::size_t m = member_outputs.size();
  const std::size_t d = tape.value(member_outputs[0]).size();
  std::vector<nd::Var> cols;
  cols.reserve(m);
  for (nd::Var g : member_outputs) cols.push_back(tape.reshape(g, {d, 1}));
  nd::Var g_block = tape.concat_cols(cols);  // D x M
  // m = (1/M) G 1_M
  nd::Var ones = tape.constant(nd::Tensor({m, 1}, 1.0));
  nd::Var mean_col = tape.scale(matmul(g_block, ones), 1.0 / static_cast<double>(m));
  // Gc = G - m 1_M^T
  nd::Var ones_row = tape.constant(nd::Tensor({1, m}, 1.0));
  nd::Var gc = g_block - matmul(mean_col, ones_row);
  TapedBatch b;
  b.mean = tape.reshape(mean_col, {d});
  b.centered = gc;
  b.lambda = lambda_from_trace(tape.value(gc), lambda_fraction);
  return b;
}

nd::Var sample_functions(nd::Tape& tape, const TapedBatch& batch, std::size_t u,
                         nd::Rng& rng) {
  if (u == 0) throw std::invalid_argument("sample_functions: U >= 1");
  const std::size_t d = tape.value(batch.mean).size();
  const std::size_t m = tape.value(batch.centered).cols();
  nd::Var eps = tape.constant(rng.normal_tensor({u, m}));
  nd::Var eps0 = tape.constant(rng.normal_tensor({u, d}));
  nd::Var ones = tape.constant(nd::Tensor({u, 1}, 1.0));
  nd::Var mean_row = tape.reshape(batch.mean, {1, d});
  nd::Var spread = tape.scale(matmul(eps, tape.transpose(batch.centered)),
                              1.0 / std::sqrt(static_cast<double>(m)));
  return matmul(ones, mean_row) + spread +
         tape.scale(eps0, std::sqrt(batch.lambda));
}

}  // namespace degp::gp
