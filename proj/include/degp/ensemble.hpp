#pragma once

#include <cstdint>
#include <vector>

#include "degp/mlp.hpp"

namespace degp::nets {

/// An ensemble of M structurally identical MLPs. With shared_layers > 0 the
/// first hidden layers form one trunk owned jointly by all members; the
/// remaining layers are per-member heads.
struct EnsembleSpec {
  MlpSpec net;
  std::size_t members = 1;
  std::size_t shared_layers = 0;

  void validate() const;
  MlpSpec trunk_spec() const;  // input -> last shared width (identity if none)
  MlpSpec head_spec() const;   // trunk features -> output
};

struct EnsembleWeights {
  EnsembleSpec spec;
  WeightSet trunk;                 // empty when shared_layers == 0
  std::vector<WeightSet> heads;    // size M

  std::size_t member_count() const { return heads.size(); }
  /// Trunk parameters counted once, plus every head.
  double squared_norm() const;
  /// All trainable tensors, trunk first then heads in member order.
  std::vector<nd::Tensor*> parameters();
  std::vector<const nd::Tensor*> parameters() const;
};

/// Member seeds derive from (seed, member index) so members differ but the
/// whole ensemble is reproducible.
EnsembleWeights init_ensemble(const EnsembleSpec& spec, std::uint64_t seed);

/// Member i's outputs, n x C. Shared trunk is evaluated once per call.
nd::Tensor member_forward(const EnsembleWeights& ens, std::size_t i,
                          const nd::Tensor& x);

/// All members' outputs on X, in member order.
std::vector<nd::Tensor> ensemble_forward(const EnsembleWeights& ens,
                                         const nd::Tensor& x);

/// Taped ensemble: trunk leaves shared across members, so trunk gradients
/// accumulate over heads.
struct TapedEnsemble {
  TapedWeights trunk;
  std::vector<TapedWeights> heads;
};

TapedEnsemble lift(nd::Tape& tape, const EnsembleWeights& ens);

/// Member outputs on the tape; the trunk forward is recorded once.
std::vector<nd::Var> ensemble_forward(nd::Tape& tape, const EnsembleSpec& spec,
                                      const TapedEnsemble& te, nd::Var x);

}  // namespace degp::nets
