#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "degp/baselines.hpp"
#include "degp/trainer.hpp"

namespace degp::bandit {

/// Contextual bandit environment. Rewards are deterministic functions of
/// (context, arm, rng draw), so a whole run replays from its seeds.
class Env {
 public:
  virtual ~Env() = default;
  virtual std::size_t context_dim() const = 0;
  virtual std::size_t arms() const = 0;
  virtual nd::Tensor draw_context(nd::Rng& rng) const = 0;
  virtual double reward(const nd::Tensor& context, std::size_t arm,
                        nd::Rng& rng) const = 0;
  /// Noise-free mean reward, used by the cheating oracle baseline in tests.
  virtual double mean_reward(const nd::Tensor& context,
                             std::size_t arm) const = 0;
};

/// Synthetic wheel-style environment: contexts on the unit disk, one safe
/// arm everywhere, four quadrant arms that pay a large reward only in the
/// outer ring (radius > delta). Exploration-sensitive but fully
/// deterministic given seeds.
class WheelEnv : public Env {
 public:
  WheelEnv(double delta = 0.8, double noise_sd = 0.05);
  std::size_t context_dim() const override { return 2; }
  std::size_t arms() const override { return 5; }
  nd::Tensor draw_context(nd::Rng& rng) const override;
  double reward(const nd::Tensor& context, std::size_t arm,
                nd::Rng& rng) const override;
  double mean_reward(const nd::Tensor& context, std::size_t arm) const override;

 private:
  double delta_;
  double noise_sd_;
};

/// Mushroom-style environment over a CSV table: first column is the label
/// (e = edible, p = poisonous), remaining columns are categorical features
/// one-hot encoded at load. Arm 0 passes (reward 0); arm 1 eats: +5 if
/// edible, else +5 or -35 on a fair coin.
class TableEnv : public Env {
 public:
  explicit TableEnv(const std::string& csv_path);
  std::size_t context_dim() const override { return dim_; }
  std::size_t arms() const override { return 2; }
  nd::Tensor draw_context(nd::Rng& rng) const override;
  double reward(const nd::Tensor& context, std::size_t arm,
                nd::Rng& rng) const override;
  double mean_reward(const nd::Tensor& context, std::size_t arm) const override;
  std::size_t rows() const { return edible_.size(); }

 private:
  bool row_edible(const nd::Tensor& context) const;
  std::size_t dim_ = 0;
  std::vector<nd::Tensor> contexts_;
  std::vector<bool> edible_;
};

enum class Policy { kGpSample, kRandomMember, kUniform, kOracleGreedy };

struct AgentConfig {
  Policy policy = Policy::kUniform;
  nets::EnsembleSpec model;     // context -> one output head per arm
  prior::PriorSpec prior;       // MC NN-GP prior over the reward model
  train::TrainConfig retrain;   // protocol defaults: alpha=1, beta=0, Adam
  double lambda_fraction = 0.05;
  std::size_t retrain_every = 50;
};

/// Replay-buffer agent with periodic retraining. Only the played arm's head
/// receives a likelihood term (masked Gaussian); the KL still covers all
/// heads. Until the first retrain the agent plays uniformly.
class Agent {
 public:
  Agent(AgentConfig cfg, std::uint64_t seed);

  std::size_t act(const nd::Tensor& context, nd::Rng& rng) const;
  void observe(const nd::Tensor& context, std::size_t arm, double reward);
  /// Retrains when the buffer has grown by the configured cadence.
  void maybe_retrain();

  bool trained() const { return retrains_ > 0; }
  Policy policy() const { return cfg_.policy; }
  std::size_t buffer_size() const { return arms_.size(); }
  const nets::EnsembleWeights& model() const { return ens_; }
  /// Buffer as a masked training batch (used by the retraining step and by
  /// the masking tests).
  train::Batch buffer_batch() const;

 private:
  AgentConfig cfg_;
  std::uint64_t seed_;
  nets::EnsembleWeights ens_;
  prior::McNnGpPrior mc_prior_;
  std::vector<nd::Tensor> contexts_;
  std::vector<std::size_t> arms_;
  std::vector<double> rewards_;
  std::size_t retrains_ = 0;
};

struct Trace {
  std::string agent;
  std::uint64_t seed = 0;
  std::vector<double> cumulative;  // running reward sum per round
};

/// One agent, one environment, `rounds` rounds. Context, reward noise and
/// action draws come from per-round streams of (seed, round).
Trace run_rounds(const Env& env, Agent& agent, std::size_t rounds,
                 std::uint64_t seed, const std::string& name);

struct NamedAgentConfig {
  std::string name;
  AgentConfig config;
};

/// Full experiment: every agent config against the environment for every
/// seed. Traces come back per (agent, seed).
std::vector<Trace> run_experiment(const Env& env,
                                  const std::vector<NamedAgentConfig>& agents,
                                  std::size_t rounds,
                                  const std::vector<std::uint64_t>& seeds);

}  // namespace degp::bandit
