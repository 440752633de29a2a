#include "degp/bandit.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "degp/csv.hpp"
#include "degp/posterior.hpp"

namespace degp::bandit {

WheelEnv::WheelEnv(double delta, double noise_sd)
    : delta_(delta), noise_sd_(noise_sd) {}

nd::Tensor WheelEnv::draw_context(nd::Rng& rng) const {
  // uniform on the unit disk
  for (;;) {
    const double x = rng.uniform(-1.0, 1.0);
    const double y = rng.uniform(-1.0, 1.0);
    if (x * x + y * y <= 1.0) return nd::Tensor::matrix(1, 2, {x, y});
  }
}

double WheelEnv::mean_reward(const nd::Tensor& context, std::size_t arm) const {
  const double x = context(0, 0);
  const double y = context(0, 1);
  if (arm == 0) return 1.2;  // safe arm, best inside the radius
  if (std::sqrt(x * x + y * y) <= delta_) return 1.0;
  const std::size_t quadrant =
      x >= 0.0 ? (y >= 0.0 ? 1 : 4) : (y >= 0.0 ? 2 : 3);
  // the matching quadrant arm pays off only in the outer ring, so an agent
  // that stops exploring early settles on the safe arm and forfeits it
  return arm == quadrant ? 3.0 : 1.0;
}

double WheelEnv::reward(const nd::Tensor& context, std::size_t arm,
                        nd::Rng& rng) const {
  return mean_reward(context, arm) + noise_sd_ * rng.normal();
}

TableEnv::TableEnv(const std::string& csv_path) {
  const auto rows = io::read_csv(csv_path);
  if (rows[0].size() < 2)
    throw std::runtime_error("table env needs label + feature columns");
  const std::size_t features = rows[0].size() - 1;

  // one-hot vocabulary per categorical column, sorted for determinism
  std::vector<std::map<std::string, std::size_t>> vocab(features);
  for (const auto& row : rows)
    for (std::size_t j = 0; j < features; ++j) vocab[j].emplace(row[j + 1], 0);
  dim_ = 0;
  for (auto& v : vocab)
    for (auto& [key, idx] : v) idx = dim_++;

  for (const auto& row : rows) {
    if (row[0] != "e" && row[0] != "p")
      throw std::runtime_error("table env label must be 'e' or 'p', got '" +
                               row[0] + "'");
    nd::Tensor ctx({1, dim_});
    for (std::size_t j = 0; j < features; ++j)
      ctx(0, vocab[j].at(row[j + 1])) = 1.0;
    contexts_.push_back(std::move(ctx));
    edible_.push_back(row[0] == "e");
  }
}

nd::Tensor TableEnv::draw_context(nd::Rng& rng) const {
  return contexts_[rng.index(contexts_.size())];
}

bool TableEnv::row_edible(const nd::Tensor& context) const {
  for (std::size_t i = 0; i < contexts_.size(); ++i) {
    if (nd::max_abs(nd::sub(contexts_[i], context)) == 0.0) return edible_[i];
  }
  throw std::invalid_argument("table env: unknown context");
}

double TableEnv::mean_reward(const nd::Tensor& context, std::size_t arm) const {
  if (arm == 0) return 0.0;
  return row_edible(context) ? 5.0 : 0.5 * 5.0 + 0.5 * -35.0;
}

double TableEnv::reward(const nd::Tensor& context, std::size_t arm,
                        nd::Rng& rng) const {
  if (arm == 0) return 0.0;
  if (row_edible(context)) return 5.0;
  return rng.uniform() < 0.5 ? 5.0 : -35.0;
}

Agent::Agent(AgentConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      seed_(seed),
      ens_(init_ensemble(cfg_.model, seed ^ 0x6167656e74ULL)),
      mc_prior_([&] {
        prior::PriorSpec ps = cfg_.prior;
        ps.seed ^= seed;
        return prior::McNnGpPrior(ps);
      }()) {}

std::size_t Agent::act(const nd::Tensor& context, nd::Rng& rng) const {
  const std::size_t arms = cfg_.model.net.output_dim;
  if (!trained() || cfg_.policy == Policy::kUniform ||
      cfg_.policy == Policy::kOracleGreedy)
    return rng.index(arms);

  nd::Tensor estimates;
  if (cfg_.policy == Policy::kGpSample) {
    // Thompson-style: one function draw from q, play its argmax
    const gp::FunctionBatch b = gp::batch_at(ens_, context, cfg_.lambda_fraction);
    estimates = gp::sample_functions(b, 1, rng).reshaped({arms});
  } else {
    const std::size_t member = rng.index(ens_.member_count());
    estimates = member_forward(ens_, member, context).reshaped({arms});
  }
  std::size_t best = 0;
  for (std::size_t a = 1; a < arms; ++a)
    if (estimates(a) > estimates(best)) best = a;
  return best;
}

void Agent::observe(const nd::Tensor& context, std::size_t arm, double reward) {
  contexts_.push_back(context);
  arms_.push_back(arm);
  rewards_.push_back(reward);
}

train::Batch Agent::buffer_batch() const {
  const std::size_t n = contexts_.size();
  const std::size_t arms = cfg_.model.net.output_dim;
  const std::size_t d = cfg_.model.net.input_dim;
  // Rewards are standardized over the buffer before fitting; the argmax is
  // invariant (the affine map is shared by all arms) and the reward model
  // stays on the scale the GP prior expects.
  double mean = 0.0, var = 0.0;
  for (double r : rewards_) mean += r / static_cast<double>(n);
  for (double r : rewards_) var += (r - mean) * (r - mean) / static_cast<double>(n);
  const double sd = std::max(std::sqrt(var), 1e-6);

  train::Batch b;
  b.x = nd::Tensor({n, d});
  b.y = nd::Tensor({n, arms});
  b.mask = nd::Tensor({n, arms});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) b.x(i, j) = contexts_[i](0, j);
    b.y(i, arms_[i]) = (rewards_[i] - mean) / sd;
    b.mask(i, arms_[i]) = 1.0;
  }
  return b;
}

void Agent::maybe_retrain() {
  if (cfg_.policy == Policy::kUniform || cfg_.policy == Policy::kOracleGreedy)
    return;
  if (buffer_size() == 0 || buffer_size() % cfg_.retrain_every != 0) return;

  train::TrainConfig cfg = cfg_.retrain;
  cfg.seed = seed_ + 0x1000 * (retrains_ + 1);  // fresh batch order per retrain
  const train::Batch data = buffer_batch();
  if (cfg_.policy == Policy::kGpSample) {
    train::train(ens_, data, mc_prior_, cfg);
  } else {
    baselines::train_de(ens_, data, cfg);
  }
  ++retrains_;
}

Trace run_rounds(const Env& env, Agent& agent, std::size_t rounds,
                 std::uint64_t seed, const std::string& name) {
  constexpr std::uint64_t kCtx = 11, kAct = 12, kRew = 13;
  Trace t;
  t.agent = name;
  t.seed = seed;
  t.cumulative.reserve(rounds);
  double total = 0.0;
  for (std::size_t r = 0; r < rounds; ++r) {
    nd::Rng rng_ctx = nd::Rng::stream(seed, r, kCtx);
    const nd::Tensor context = env.draw_context(rng_ctx);

    std::size_t arm = 0;
    nd::Rng rng_act = nd::Rng::stream(seed, r, kAct);
    if (agent.policy() == Policy::kOracleGreedy) {
      for (std::size_t a = 1; a < env.arms(); ++a)
        if (env.mean_reward(context, a) > env.mean_reward(context, arm)) arm = a;
    } else {
      arm = agent.act(context, rng_act);
    }

    nd::Rng rng_rew = nd::Rng::stream(seed, r, kRew);
    const double reward = env.reward(context, arm, rng_rew);
    total += reward;
    t.cumulative.push_back(total);

    agent.observe(context, arm, reward);
    agent.maybe_retrain();
  }
  return t;
}

std::vector<Trace> run_experiment(const Env& env,
                                  const std::vector<NamedAgentConfig>& agents,
                                  std::size_t rounds,
                                  const std::vector<std::uint64_t>& seeds) {
  std::vector<Trace> traces;
  for (const auto& spec : agents) {
    for (std::uint64_t seed : seeds) {
      Agent agent(spec.config, seed);
      traces.push_back(run_rounds(env, agent, rounds, seed, spec.name));
    }
  }
  return traces;
}

}  // namespace degp::bandit
