#include "degp/ensemble.hpp"

#include <stdexcept>

namespace degp::nets {

void EnsembleSpec::validate() const {
  net.validate();
  if (members == 0) throw std::invalid_argument("EnsembleSpec: members >= 1");
  if (shared_layers > net.hidden.size())
    throw std::invalid_argument("EnsembleSpec: shared_layers exceeds hidden layers");
}

MlpSpec EnsembleSpec::trunk_spec() const {
  MlpSpec t;
  t.input_dim = net.input_dim;
  t.activation = net.activation;
  if (shared_layers == 0) {
    t.output_dim = net.input_dim;  // identity trunk, no weights
    return t;
  }
  t.hidden.assign(net.hidden.begin(),
                  net.hidden.begin() + static_cast<long>(shared_layers - 1));
  t.output_dim = net.hidden[shared_layers - 1];
  return t;
}

MlpSpec EnsembleSpec::head_spec() const {
  MlpSpec h;
  h.input_dim = shared_layers == 0 ? net.input_dim : net.hidden[shared_layers - 1];
  h.hidden.assign(net.hidden.begin() + static_cast<long>(shared_layers),
                  net.hidden.end());
  h.output_dim = net.output_dim;
  h.activation = net.activation;
  return h;
}

double EnsembleWeights::squared_norm() const {
  double s = trunk.squared_norm();
  for (const auto& h : heads) s += h.squared_norm();
  return s;
}

std::vector<nd::Tensor*> EnsembleWeights::parameters() {
  std::vector<nd::Tensor*> ps;
  auto push = [&ps](WeightSet& w) {
    for (std::size_t l = 0; l < w.layer_count(); ++l) {
      ps.push_back(&w.weights[l]);
      ps.push_back(&w.biases[l]);
    }
  };
  push(trunk);
  for (auto& h : heads) push(h);
  return ps;
}

std::vector<const nd::Tensor*> EnsembleWeights::parameters() const {
  std::vector<const nd::Tensor*> ps;
  auto push = [&ps](const WeightSet& w) {
    for (std::size_t l = 0; l < w.layer_count(); ++l) {
      ps.push_back(&w.weights[l]);
      ps.push_back(&w.biases[l]);
    }
  };
  push(trunk);
  for (const auto& h : heads) push(h);
  return ps;
}

namespace {
std::uint64_t member_seed(std::uint64_t seed, std::size_t i) {
  return seed * 0x100000001b3ULL + 0x9e3779b97f4a7c15ULL * (i + 1);
}

// All weight layers of the trunk spec, including its readout into the last
// shared width; the trunk readout is followed by an activation.
WeightSet init_trunk(const EnsembleSpec& spec, std::uint64_t seed) {
  if (spec.shared_layers == 0) return {};
  return init_mlp(spec.trunk_spec(), member_seed(seed, 0) ^ 0x7454756e6bULL);
}
}  // namespace

EnsembleWeights init_ensemble(const EnsembleSpec& spec, std::uint64_t seed) {
  spec.validate();
  EnsembleWeights ens;
  ens.spec = spec;
  ens.trunk = init_trunk(spec, seed);
  const MlpSpec head = spec.head_spec();
  for (std::size_t i = 0; i < spec.members; ++i)
    ens.heads.push_back(init_mlp(head, member_seed(seed, i)));
  return ens;
}

namespace {
nd::Tensor trunk_features(const EnsembleWeights& ens, const nd::Tensor& x) {
  if (ens.spec.shared_layers == 0) return x;
  const MlpSpec ts = ens.spec.trunk_spec();
  // Trunk readout is a feature map: activation applies to its output too.
  return activate(forward(ts, ens.trunk, x), ts.activation);
}
}  // namespace

nd::Tensor member_forward(const EnsembleWeights& ens, std::size_t i,
                          const nd::Tensor& x) {
  return forward(ens.spec.head_spec(), ens.heads.at(i), trunk_features(ens, x));
}

std::vector<nd::Tensor> ensemble_forward(const EnsembleWeights& ens,
                                         const nd::Tensor& x) {
  const nd::Tensor feats = trunk_features(ens, x);
  const MlpSpec head = ens.spec.head_spec();
  std::vector<nd::Tensor> outs;
  outs.reserve(ens.member_count());
  for (const auto& h : ens.heads) outs.push_back(forward(head, h, feats));
  return outs;
}

TapedEnsemble lift(nd::Tape& tape, const EnsembleWeights& ens) {
  TapedEnsemble te;
  te.trunk = lift(tape, ens.trunk);
  for (const auto& h : ens.heads) te.heads.push_back(lift(tape, h));
  return te;
}

std::vector<nd::Var> ensemble_forward(nd::Tape& tape, const EnsembleSpec& spec,
                                      const TapedEnsemble& te, nd::Var x) {
  nd::Var feats = x;
  if (spec.shared_layers > 0) {
    const MlpSpec ts = spec.trunk_spec();
    feats = forward(tape, ts, te.trunk, x);
    if (ts.activation == Activation::kRelu) feats = tape.relu(feats);
  }
  const MlpSpec head = spec.head_spec();
  std::vector<nd::Var> outs;
  outs.reserve(te.heads.size());
  for (const auto& h : te.heads) outs.push_back(forward(tape, head, h, feats));
  return outs;
}

}  // namespace degp::nets
