#include "degp/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace degp::cli {

namespace {

const std::vector<std::string>& registry() {
  static const std::vector<std::string> keys = {
      // run identity
      "experiment", "seeds", "out", "methods",
      // ensemble model
      "model.hidden", "model.members", "model.shared_layers",
      // training
      "train.alpha", "train.beta", "train.lambda_fraction", "train.u",
      "train.epochs", "train.batch", "train.optimizer", "train.lr",
      "train.momentum", "train.schedule", "train.decay_factor",
      "train.decay_every", "train.noise_var", "train.temperature",
      "train.weight_decay", "train.rms_gamma", "train.clip_norm",
      // extra measurement points
      "measurement.points", "measurement.lo", "measurement.hi",
      // MC NN-GP prior
      "prior.widths", "prior.s", "prior.sigma_w2", "prior.sigma_b2",
      "prior.seed",
      // datasets
      "data.paths", "data.target_col", "data.folds",
      // 1-D regression experiment
      "regress.n", "regress.noise_var", "regress.perturb", "regress.grid",
      "regress.grid_lo", "regress.grid_hi", "regress.depth",
      "predictive.samples",
      // synthetic classification experiment
      "classify.classes", "classify.train_n", "classify.test_n",
      "classify.ood_n", "classify.blob_sd", "classify.radius",
      "classify.ood_radius",
      // bandit experiment
      "bandit.rounds", "bandit.retrain_every", "bandit.csv", "bandit.delta",
      "bandit.noise_sd",
      // kernel validation suite
      "kernel.instances", "kernel.max_n", "kernel.max_c", "kernel.max_m",
      "kernel.logdet_instances", "kernel.timing_d", "kernel.timing_m",
      "kernel.mc_s", "kernel.mc_width", "kernel.pairs",
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

template <class T>
std::vector<T> parse_list(const std::string& value,
                          T (*one)(const std::string&)) {
  std::vector<T> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(one(item));
  }
  return out;
}

std::size_t parse_size(const std::string& s) {
  return static_cast<std::size_t>(std::stoull(s));
}
std::uint64_t parse_u64(const std::string& s) { return std::stoull(s); }
std::string parse_string(const std::string& s) { return s; }

}  // namespace

const std::vector<std::string>& Config::known_keys() { return registry(); }

void Config::set(const std::string& key, const std::string& value) {
  const auto& keys = registry();
  if (std::find(keys.begin(), keys.end(), key) == keys.end())
    throw std::invalid_argument("unknown config key: " + key);
  kv_[key] = value;
}

void Config::merge(const Config& other) {
  for (const auto& [k, v] : other.kv_) kv_[k] = v;
}

Config Config::from_text(const std::string& text, const std::string& origin) {
  Config cfg;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                  ": expected key = value");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str(), path);
}

bool Config::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string Config::get(const std::string& key, const std::string& def) const {
  const auto it = kv_.find(key);
  return it == kv_.end() ? def : it->second;
}

double Config::get_double(const std::string& key, double def) const {
  const auto it = kv_.find(key);
  return it == kv_.end() ? def : std::stod(it->second);
}

std::size_t Config::get_size(const std::string& key, std::size_t def) const {
  const auto it = kv_.find(key);
  return it == kv_.end() ? def : parse_size(it->second);
}

bool Config::get_bool(const std::string& key, bool def) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  if (it->second == "1" || it->second == "true") return true;
  if (it->second == "0" || it->second == "false") return false;
  throw std::invalid_argument("config key " + key + " expects a boolean");
}

std::vector<std::size_t> Config::get_sizes(
    const std::string& key, const std::vector<std::size_t>& def) const {
  const auto it = kv_.find(key);
  return it == kv_.end() ? def : parse_list<std::size_t>(it->second, parse_size);
}

std::vector<std::uint64_t> Config::get_u64s(
    const std::string& key, const std::vector<std::uint64_t>& def) const {
  const auto it = kv_.find(key);
  return it == kv_.end() ? def : parse_list<std::uint64_t>(it->second, parse_u64);
}

std::vector<std::string> Config::get_strings(
    const std::string& key, const std::vector<std::string>& def) const {
  const auto it = kv_.find(key);
  return it == kv_.end() ? def
                         : parse_list<std::string>(it->second, parse_string);
}

std::string Config::serialize() const {
  std::ostringstream os;
  for (const auto& [k, v] : kv_) os << k << " = " << v << "\n";
  return os.str();
}

namespace {

// The 1-D regression recipe: 50 members, SGD momentum 0.9 at 1e-3 with a
// cosine schedule for 1000 full-batch iterations, jitter fraction 1e-4,
// extra measurement points uniform on [-2, 2].
Config preset_fig1() {
  Config c;
  c.set("experiment", "regress1d");
  c.set("seeds", "0");
  c.set("methods", "degp,de,rde,nngp");
  c.set("model.hidden", "64");
  c.set("model.members", "50");
  c.set("train.alpha", "1");
  c.set("train.beta", "0");
  c.set("train.lambda_fraction", "1e-4");
  c.set("train.u", "256");
  c.set("train.epochs", "1000");
  c.set("train.optimizer", "sgd");
  c.set("train.lr", "0.001");
  c.set("train.momentum", "0.9");
  c.set("train.schedule", "cosine");
  c.set("train.noise_var", "0.2");
  c.set("train.weight_decay", "0.1");
  c.set("measurement.points", "16");
  c.set("measurement.lo", "-2");
  c.set("measurement.hi", "2");
  c.set("prior.widths", "64");
  c.set("prior.s", "10");
  c.set("regress.n", "8");
  c.set("regress.noise_var", "0.2");
  c.set("regress.perturb", "-1.2");
  c.set("regress.grid", "201");
  c.set("predictive.samples", "1000");
  return c;
}

// Same problem with linear members (no hidden layer), the collapse case.
Config preset_fig1_linear() {
  Config c = preset_fig1();
  c.set("model.hidden", "");
  c.set("prior.widths", "");
  c.set("regress.depth", "0");
  return c;
}

// UCI-style recipe: 10 members, 2x256 MLPs, Adam at 0.01 decaying by 0.99
// every 5 epochs, batch 256, 1000 epochs.
Config preset_uci() {
  Config c;
  c.set("experiment", "uci");
  c.set("seeds", "0");
  c.set("methods", "degp,de,rde,nngp");
  c.set("model.hidden", "256,256");
  c.set("model.members", "10");
  c.set("train.alpha", "1");
  c.set("train.beta", "0");
  c.set("train.lambda_fraction", "0.05");
  c.set("train.u", "256");
  c.set("train.epochs", "1000");
  c.set("train.batch", "256");
  c.set("train.optimizer", "adam");
  c.set("train.lr", "0.01");
  c.set("train.schedule", "step");
  c.set("train.decay_factor", "0.99");
  c.set("train.decay_every", "5");
  c.set("train.noise_var", "0.05");
  c.set("prior.widths", "256,256");
  c.set("prior.s", "10");
  c.set("data.folds", "5");
  c.set("predictive.samples", "1000");
  return c;
}

// Desk-scale variant of the UCI protocol (same 5-fold procedure, smaller
// nets and fewer epochs so the full suite runs in minutes on one core).
Config preset_uci_desk() {
  Config c = preset_uci();
  c.set("model.hidden", "64");
  c.set("model.members", "5");
  c.set("train.u", "64");
  c.set("train.epochs", "150");
  c.set("train.batch", "128");
  c.set("prior.widths", "64");
  c.set("data.paths", "data/synth_reg_a.csv,data/synth_reg_b.csv");
  return c;
}

Config preset_classify_synth() {
  Config c;
  c.set("experiment", "classify-synth");
  c.set("seeds", "0");
  c.set("methods", "degp,de,rde");
  c.set("model.hidden", "32");
  c.set("model.members", "5");
  c.set("train.alpha", "0.1");
  c.set("train.beta", "0");
  c.set("train.lambda_fraction", "0.05");
  c.set("train.u", "64");
  c.set("train.epochs", "150");
  c.set("train.batch", "64");
  c.set("train.optimizer", "adam");
  c.set("train.lr", "0.01");
  c.set("train.temperature", "1");
  c.set("train.weight_decay", "0.1");
  c.set("prior.widths", "32");
  c.set("prior.s", "10");
  c.set("classify.classes", "3");
  c.set("classify.train_n", "120");
  c.set("classify.test_n", "240");
  c.set("classify.ood_n", "120");
  c.set("predictive.samples", "1000");
  return c;
}

// Synthetic wheel bandit at desk scale; the protocol (retrain cadence 50,
// Thompson-style draws for the GP agent, random member for the ensembles)
// follows the contextual-bandit setup.
Config preset_bandit_wheel() {
  Config c;
  c.set("experiment", "bandit");
  c.set("seeds", "0,1,2,3,4");
  c.set("methods", "degp,de,uniform");
  c.set("model.hidden", "32");
  c.set("model.members", "5");
  c.set("train.alpha", "1");
  c.set("train.beta", "0");
  c.set("train.lambda_fraction", "0.05");
  c.set("train.u", "64");
  c.set("train.epochs", "30");
  c.set("train.batch", "256");
  c.set("train.optimizer", "adam");
  c.set("train.lr", "0.01");
  c.set("train.noise_var", "0.1");
  c.set("prior.widths", "32");
  c.set("prior.s", "10");
  c.set("bandit.rounds", "2000");
  c.set("bandit.retrain_every", "50");
  c.set("bandit.delta", "0.85");
  c.set("bandit.noise_sd", "0.05");
  return c;
}

// Bandit protocol at the reference scale: 2x256 MLPs, batch 512, 100-epoch
// retrains every 50 rounds, alpha=1, beta=0.
Config preset_bandit_paper() {
  Config c = preset_bandit_wheel();
  c.set("model.hidden", "256,256");
  c.set("prior.widths", "256,256");
  c.set("train.batch", "512");
  c.set("train.epochs", "100");
  c.set("train.u", "256");
  return c;
}

Config preset_kernel_check() {
  Config c;
  c.set("experiment", "kernel-check");
  c.set("seeds", "0");
  c.set("kernel.instances", "200");
  c.set("kernel.max_n", "12");
  c.set("kernel.max_c", "4");
  c.set("kernel.max_m", "8");
  c.set("kernel.logdet_instances", "100");
  c.set("kernel.timing_d", "2560");
  c.set("kernel.timing_m", "10");
  c.set("kernel.mc_s", "2000");
  c.set("kernel.mc_width", "64");
  c.set("kernel.pairs", "50");
  return c;
}

}  // namespace

std::vector<std::string> Config::preset_names() {
  return {"fig1",        "fig1-linear",   "uci",          "uci-desk",
          "classify-synth", "bandit-wheel", "bandit-paper", "kernel-check"};
}

Config Config::preset(const std::string& name) {
  if (name == "fig1") return preset_fig1();
  if (name == "fig1-linear") return preset_fig1_linear();
  if (name == "uci") return preset_uci();
  if (name == "uci-desk") return preset_uci_desk();
  if (name == "classify-synth") return preset_classify_synth();
  if (name == "bandit-wheel") return preset_bandit_wheel();
  if (name == "bandit-paper") return preset_bandit_paper();
  if (name == "kernel-check") return preset_kernel_check();
  std::string names;
  for (const auto& n : preset_names()) names += n + " ";
  throw std::invalid_argument("unknown preset '" + name + "'; available: " +
                              names);
}

}  // namespace degp::cli
