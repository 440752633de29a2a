#include "degp/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace degp::nets {

void MlpSpec::validate() const {
  if (input_dim == 0 || output_dim == 0)
    throw std::invalid_argument("MlpSpec: zero extent");
  for (std::size_t h : hidden)
    if (h == 0) throw std::invalid_argument("MlpSpec: zero hidden width");
}

namespace {
struct LayerShape {
  std::size_t in, out;
};

std::vector<LayerShape> layer_shapes(const MlpSpec& spec) {
  std::vector<LayerShape> shapes;
  std::size_t in = spec.input_dim;
  for (std::size_t h : spec.hidden) {
    shapes.push_back({in, h});
    in = h;
  }
  shapes.push_back({in, spec.output_dim});
  return shapes;
}
}  // namespace

std::size_t WeightSet::param_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

double WeightSet::squared_norm() const {
  double s = 0.0;
  for (const auto& w : weights) s += nd::dot(w, w);
  for (const auto& b : biases) s += nd::dot(b, b);
  return s;
}

std::vector<double> WeightSet::flatten() const {
  std::vector<double> flat;
  flat.reserve(param_count());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    flat.insert(flat.end(), weights[l].flat().begin(), weights[l].flat().end());
    flat.insert(flat.end(), biases[l].flat().begin(), biases[l].flat().end());
  }
  return flat;
}

void WeightSet::unflatten(const std::vector<double>& flat) {
  if (flat.size() != param_count())
    throw std::invalid_argument("WeightSet::unflatten: size mismatch");
  std::size_t off = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (std::size_t i = 0; i < weights[l].size(); ++i) weights[l](i) = flat[off++];
    for (std::size_t i = 0; i < biases[l].size(); ++i) biases[l](i) = flat[off++];
  }
}

WeightSet init_mlp(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  nd::Rng rng(seed);
  WeightSet w;
  for (const auto& [in, out] : layer_shapes(spec)) {
    const double sd = std::sqrt(2.0 / static_cast<double>(in));
    nd::Tensor weight({in, out});
    for (std::size_t i = 0; i < weight.size(); ++i) weight(i) = sd * rng.normal();
    w.weights.push_back(std::move(weight));
    w.biases.emplace_back(std::vector<std::size_t>{out});
  }
  return w;
}

WeightSet sample_gaussian_weights(const MlpSpec& spec, double weight_var_scale,
                                  double bias_var, nd::Rng& rng) {
  spec.validate();
  WeightSet w;
  for (const auto& [in, out] : layer_shapes(spec)) {
    const double sd = std::sqrt(weight_var_scale / static_cast<double>(in));
    const double bsd = std::sqrt(bias_var);
    nd::Tensor weight({in, out});
    for (std::size_t i = 0; i < weight.size(); ++i) weight(i) = sd * rng.normal();
    nd::Tensor bias({out});
    for (std::size_t i = 0; i < bias.size(); ++i) bias(i) = bsd * rng.normal();
    w.weights.push_back(std::move(weight));
    w.biases.push_back(std::move(bias));
  }
  return w;
}

nd::Tensor activate(const nd::Tensor& pre, Activation act) {
  switch (act) {
    case Activation::kRelu:
      return nd::relu(pre);
    case Activation::kTanh: {
      nd::Tensor out = pre;
      for (std::size_t i = 0; i < out.size(); ++i) out(i) = std::tanh(out(i));
      return out;
    }
    case Activation::kIdentity:
      return pre;
  }
  throw std::logic_error("unknown activation");
}

namespace {
nd::Tensor affine(const nd::Tensor& x, const nd::Tensor& w, const nd::Tensor& b) {
  nd::Tensor out = nd::matmul(x, w);
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += b(j);
  return out;
}
}  // namespace

nd::Tensor forward(const MlpSpec& spec, const WeightSet& w, const nd::Tensor& x) {
  nd::check_shape(x.cols() == spec.input_dim, "mlp forward input width");
  nd::Tensor h = forward_features(spec, w, x);
  return affine(h, w.weights.back(), w.biases.back());
}

nd::Tensor forward_features(const MlpSpec& spec, const WeightSet& w,
                            const nd::Tensor& x) {
  nd::check_shape(x.cols() == spec.input_dim, "mlp features input width");
  nd::Tensor h = x;
  for (std::size_t l = 0; l + 1 < w.layer_count(); ++l)
    h = activate(affine(h, w.weights[l], w.biases[l]), spec.activation);
  return h;
}

TapedWeights lift(nd::Tape& tape, const WeightSet& w) {
  TapedWeights tw;
  for (std::size_t l = 0; l < w.layer_count(); ++l) {
    tw.weights.push_back(tape.leaf(w.weights[l]));
    tw.biases.push_back(tape.leaf(w.biases[l]));
  }
  return tw;
}

nd::Var forward(nd::Tape& tape, const MlpSpec& spec, const TapedWeights& w,
                nd::Var x) {
  if (spec.activation != Activation::kRelu &&
      spec.activation != Activation::kIdentity)
    throw std::invalid_argument("taped forward supports relu/identity only");
  nd::Var h = x;
  const std::size_t layers = w.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    h = tape.add_rowvec(tape.matmul(h, w.weights[l]), w.biases[l]);
    if (l + 1 < layers && spec.activation == Activation::kRelu) h = tape.relu(h);
  }
  return h;
}

}  // namespace degp::nets
