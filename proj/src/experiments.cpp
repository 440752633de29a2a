#include "degp/experiments.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "degp/bandit.hpp"
#include "degp/baselines.hpp"
#include "degp/csv.hpp"
#include "degp/linalg.hpp"
#include "degp/metrics.hpp"
#include "degp/posterior.hpp"
#include "degp/predictive.hpp"
#include "degp/prior_kernel.hpp"
#include "degp/trainer.hpp"

namespace degp::cli {

namespace {

using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

nets::EnsembleSpec model_spec(const Config& cfg, std::size_t input_dim,
                              std::size_t output_dim) {
  nets::EnsembleSpec spec;
  spec.net.input_dim = input_dim;
  spec.net.hidden = cfg.get_sizes("model.hidden", {64});
  spec.net.output_dim = output_dim;
  spec.members = cfg.get_size("model.members", 10);
  spec.shared_layers = cfg.get_size("model.shared_layers", 0);
  return spec;
}

prior::PriorSpec prior_spec(const Config& cfg, std::size_t input_dim) {
  prior::PriorSpec ps;
  ps.input_dim = input_dim;
  ps.widths = cfg.get_sizes("prior.widths", {64});
  ps.sigma_w2 = cfg.get_double("prior.sigma_w2", 2.0);
  ps.sigma_b2 = cfg.get_double("prior.sigma_b2", 0.01);
  ps.mc_samples = cfg.get_size("prior.s", 10);
  ps.seed = cfg.get_size("prior.seed", 91);
  return ps;
}

train::TrainConfig train_config(const Config& cfg, std::uint64_t seed,
                                std::size_t input_dim, bool categorical) {
  train::TrainConfig tc;
  tc.alpha = cfg.get_double("train.alpha", 1.0);
  tc.beta = cfg.get_double("train.beta", 0.0);
  tc.lambda_fraction = cfg.get_double("train.lambda_fraction", 0.05);
  tc.likelihood_samples = cfg.get_size("train.u", 256);
  tc.epochs = cfg.get_size("train.epochs", 100);
  tc.batch_size = cfg.get_size("train.batch", 0);
  tc.seed = seed;
  tc.clip_norm = cfg.get_double("train.clip_norm", 100.0);
  if (categorical) {
    tc.likelihood = train::CategoricalLik{};
    tc.train_temperature = cfg.get_bool("train.temperature", false);
  } else {
    tc.likelihood = train::GaussianLik{cfg.get_double("train.noise_var", 0.05)};
  }

  const std::string opt = cfg.get("train.optimizer", "adam");
  tc.optimizer.kind = opt == "sgd" ? train::OptimizerKind::kSgdMomentum
                                   : train::OptimizerKind::kAdam;
  tc.optimizer.learning_rate = cfg.get_double("train.lr", 1e-3);
  tc.optimizer.momentum = cfg.get_double("train.momentum", 0.9);
  const std::string sched = cfg.get("train.schedule", "constant");
  tc.optimizer.schedule = sched == "cosine" ? train::ScheduleKind::kCosine
                          : sched == "step" ? train::ScheduleKind::kStepDecay
                                            : train::ScheduleKind::kConstant;
  tc.optimizer.decay_factor = cfg.get_double("train.decay_factor", 0.99);
  tc.optimizer.decay_every_epochs = cfg.get_size("train.decay_every", 5);

  if (cfg.get_size("measurement.points", 0) > 0) {
    tc.measurement.points_per_batch = cfg.get_size("measurement.points", 0);
    const double lo = cfg.get_double("measurement.lo", -2.0);
    const double hi = cfg.get_double("measurement.hi", 2.0);
    tc.measurement.box_lo = nd::Tensor({input_dim}, lo);
    tc.measurement.box_hi = nd::Tensor({input_dim}, hi);
  }
  return tc;
}

std::string prepare_outdir_impl(const Config& cfg) {
  std::string out =
      cfg.get("out", "results/" + cfg.get("experiment", "run"));
  std::filesystem::path p(out);
  if (p.is_relative()) {
    if (const char* root = std::getenv("DEGP_OUT_ROOT")) p = root / p;
  }
  std::filesystem::create_directories(p);
  return p.string();
}

void write_manifest(const Config& cfg, const std::string& outdir) {
  json j;
  j["experiment"] = cfg.get("experiment", "");
  j["version"] = kVersion;
  j["seeds"] = cfg.get_u64s("seeds", {0});
  json jc;
  for (const auto& [k, v] : cfg.entries()) jc[k] = v;
  j["config"] = jc;
  io::write_text_file(outdir + "/manifest.json", j.dump(2) + "\n");
  io::write_text_file(outdir + "/config.resolved", cfg.serialize());
}

// Trained model plus how to draw function samples from it at new inputs.
struct FittedModel {
  std::string method;
  nets::EnsembleWeights ens;
  bool gp = false;  // sample from the GP posterior instead of member passes
  double lambda_fraction = 0.05;
  double temperature = 1.0;
};

std::vector<nd::Tensor> draw_functions(const FittedModel& model,
                                       const nd::Tensor& x, std::size_t samples,
                                       std::uint64_t seed) {
  if (model.gp) {
    nd::Rng rng = nd::Rng::stream(seed, 0, 0x51);
    return eval::gp_function_samples(model.ens, x, model.lambda_fraction,
                                     samples, rng);
  }
  return eval::member_function_samples(model.ens, x);
}

// Train one method on a regression dataset. Methods: degp | de | rde | rms.
FittedModel fit_regression(const std::string& method, const Config& cfg,
                           const train::Batch& data, std::uint64_t seed) {
  const std::size_t input_dim = data.x.cols();
  nets::EnsembleSpec spec = model_spec(cfg, input_dim, data.y.cols());
  train::TrainConfig tc = train_config(cfg, seed, input_dim, false);
  FittedModel out;
  out.method = method;
  out.lambda_fraction = tc.lambda_fraction;
  out.ens = init_ensemble(spec, seed * 7919 + 17);
  if (method == "degp") {
    prior::McNnGpPrior mc(prior_spec(cfg, input_dim));
    train::train(out.ens, data, mc, tc);
    out.gp = true;
  } else if (method == "de") {
    baselines::train_de(out.ens, data, tc);
  } else if (method == "rde") {
    baselines::train_rde(out.ens, data, tc,
                         cfg.get_double("train.weight_decay", 0.1));
  } else if (method == "rms") {
    baselines::AnchorSet anchors = baselines::draw_anchors(
        spec, cfg.get_double("prior.sigma_w2", 2.0),
        cfg.get_double("prior.sigma_b2", 0.01), seed ^ 0xa17c);
    baselines::train_rms(out.ens, data, tc,
                         cfg.get_double("train.rms_gamma",
                                        cfg.get_double("train.weight_decay", 0.1)),
                         anchors);
  } else {
    throw std::invalid_argument("unknown regression method: " + method);
  }
  return out;
}

train::Batch make_sin_dataset(const Config& cfg, std::uint64_t seed) {
  const std::size_t n = cfg.get_size("regress.n", 8);
  const double noise_var = cfg.get_double("regress.noise_var", 0.2);
  const double perturb = cfg.get_double("regress.perturb", -1.2);
  nd::Rng rng(seed ^ 0x5174ULL);
  std::vector<double> xs;
  for (std::size_t i = 0; i < n; ++i) xs.push_back(rng.uniform(-1.5, 1.5));
  std::sort(xs.begin(), xs.end());
  train::Batch d;
  d.x = nd::Tensor({n, 1});
  d.y = nd::Tensor({n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    d.x(i, 0) = xs[i];
    d.y(i, 0) = std::sin(2.0 * xs[i]) + std::sqrt(noise_var) * rng.normal();
  }
  d.y(n - 1, 0) += perturb;  // deliberate outlier at the right edge
  return d;
}

}  // namespace

std::string prepare_outdir(const Config& cfg) { return prepare_outdir_impl(cfg); }

int run(const Config& cfg) {
  const std::string kind = cfg.get("experiment", "");
  if (kind == "regress1d") return run_regress1d(cfg);
  if (kind == "uci") return run_uci(cfg);
  if (kind == "classify-synth") return run_classify_synth(cfg);
  if (kind == "bandit") return run_bandit(cfg);
  if (kind == "kernel-check") return run_kernel_check(cfg);
  std::cerr << "unknown experiment kind: '" << kind << "'\n";
  return 2;
}

int run_regress1d(const Config& cfg) {
  const std::string outdir = prepare_outdir(cfg);
  write_manifest(cfg, outdir);
  const auto seeds = cfg.get_u64s("seeds", {0});
  const auto methods = cfg.get_strings("methods", {"degp", "de"});
  const std::size_t grid_n = cfg.get_size("regress.grid", 201);
  const double lo = cfg.get_double("regress.grid_lo", -2.0);
  const double hi = cfg.get_double("regress.grid_hi", 2.0);
  const double noise_var = cfg.get_double("train.noise_var", 0.2);
  const std::size_t pred_samples = cfg.get_size("predictive.samples", 1000);

  nd::Tensor grid({grid_n, 1});
  for (std::size_t i = 0; i < grid_n; ++i)
    grid(i, 0) = lo + (hi - lo) * static_cast<double>(i) /
                          static_cast<double>(grid_n - 1);

  std::ostringstream data_csv, pred_csv;
  data_csv << "seed,x,y\n";
  pred_csv << "method,seed,x,mean,std\n";

  for (std::uint64_t seed : seeds) {
    const train::Batch data = make_sin_dataset(cfg, seed);
    for (std::size_t i = 0; i < data.size(); ++i)
      data_csv << seed << "," << io::format_double(data.x(i, 0)) << ","
               << io::format_double(data.y(i, 0)) << "\n";

    for (const std::string& method : methods) {
      nd::Tensor mean({grid_n});
      nd::Tensor stddev({grid_n});
      if (method == "nngp") {
        const std::size_t depth = cfg.has("regress.depth")
                                      ? cfg.get_size("regress.depth", 0)
                                      : cfg.get_sizes("model.hidden", {64}).size();
        nd::Tensor y({data.size()});
        for (std::size_t i = 0; i < data.size(); ++i) y(i) = data.y(i, 0);
        prior::GpRegression gp = baselines::nngp_regression_baseline(
            data.x, y, grid, depth, cfg.get_double("prior.sigma_w2", 2.0),
            cfg.get_double("prior.sigma_b2", 0.01), noise_var);
        mean = gp.mean;
        for (std::size_t i = 0; i < grid_n; ++i)
          stddev(i) = std::sqrt(gp.variance(i) + noise_var);
      } else {
        FittedModel model = fit_regression(method, cfg, data, seed);
        auto fs = draw_functions(model, grid, pred_samples, seed);
        eval::PredictiveSummary p = eval::regression_predictive(fs, noise_var);
        mean = p.mean;
        for (std::size_t i = 0; i < grid_n; ++i)
          stddev(i) = std::sqrt(p.variance(i));
      }
      for (std::size_t i = 0; i < grid_n; ++i)
        pred_csv << method << "," << seed << ","
                 << io::format_double(grid(i, 0)) << ","
                 << io::format_double(mean(i)) << ","
                 << io::format_double(stddev(i)) << "\n";
    }
  }
  io::write_text_file(outdir + "/dataset.csv", data_csv.str());
  io::write_text_file(outdir + "/predictions.csv", pred_csv.str());
  std::cout << "regress1d: wrote " << outdir << "/predictions.csv\n";
  return 0;
}

namespace {

struct FoldMetrics {
  double nll = 0.0;
  double rmse = 0.0;
};

// Standard-normalize by train-fold statistics; metrics are reported in the
// original target scale (inverse transform for RMSE, density correction for
// NLL).
FoldMetrics evaluate_fold(const std::string& method, const Config& cfg,
                          const nd::Tensor& train_x, const nd::Tensor& train_y,
                          const nd::Tensor& test_x, const nd::Tensor& test_y,
                          std::uint64_t seed) {
  const std::size_t d = train_x.cols();
  const std::size_t n = train_x.rows();
  const double noise_var = cfg.get_double("train.noise_var", 0.05);

  nd::Tensor mu({d}), sd({d});
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < n; ++i) mu(j) += train_x(i, j) / double(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double c = train_x(i, j) - mu(j);
      sd(j) += c * c / double(n);
    }
    sd(j) = std::sqrt(sd(j));
    if (sd(j) < 1e-12) sd(j) = 1.0;
  }
  double ymu = 0.0, ysd = 0.0;
  for (std::size_t i = 0; i < n; ++i) ymu += train_y(i) / double(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = train_y(i) - ymu;
    ysd += c * c / double(n);
  }
  ysd = std::sqrt(ysd);
  if (ysd < 1e-12) ysd = 1.0;

  auto norm_x = [&](const nd::Tensor& x) {
    nd::Tensor out = x;
    for (std::size_t i = 0; i < out.rows(); ++i)
      for (std::size_t j = 0; j < d; ++j) out(i, j) = (out(i, j) - mu(j)) / sd(j);
    return out;
  };
  const nd::Tensor trx = norm_x(train_x);
  const nd::Tensor tex = norm_x(test_x);
  nd::Tensor tr_y({n, 1});
  for (std::size_t i = 0; i < n; ++i) tr_y(i, 0) = (train_y(i) - ymu) / ysd;
  nd::Tensor te_y({test_y.size()});
  for (std::size_t i = 0; i < te_y.size(); ++i)
    te_y(i) = (test_y(i) - ymu) / ysd;

  FoldMetrics out;
  if (method == "nngp") {
    const std::size_t depth = cfg.get_sizes("model.hidden", {64}).size();
    nd::Tensor y({n});
    for (std::size_t i = 0; i < n; ++i) y(i) = tr_y(i, 0);
    prior::GpRegression gp = baselines::nngp_regression_baseline(
        trx, y, tex, depth, cfg.get_double("prior.sigma_w2", 2.0),
        cfg.get_double("prior.sigma_b2", 0.01), noise_var);
    double nll = 0.0;
    for (std::size_t i = 0; i < te_y.size(); ++i) {
      const double var = gp.variance(i) + noise_var;
      const double dmean = te_y(i) - gp.mean(i);
      nll += 0.5 * std::log(2.0 * M_PI * var) + dmean * dmean / (2.0 * var);
    }
    out.nll = nll / double(te_y.size()) + std::log(ysd);
    out.rmse = eval::rmse(gp.mean, te_y) * ysd;
    return out;
  }

  train::Batch data;
  data.x = trx;
  data.y = tr_y;
  FittedModel model = fit_regression(method, cfg, data, seed);
  auto fs = draw_functions(model, tex,
                           cfg.get_size("predictive.samples", 1000), seed + 1);
  eval::PredictiveSummary p = eval::regression_predictive(fs, noise_var);
  out.nll = eval::regression_nll(fs, te_y, noise_var) + std::log(ysd);
  out.rmse = eval::rmse(p.mean, te_y) * ysd;
  return out;
}

}  // namespace

int run_uci(const Config& cfg) {
  const std::string outdir = prepare_outdir(cfg);
  write_manifest(cfg, outdir);
  const auto paths = cfg.get_strings("data.paths", {});
  if (paths.empty()) {
    std::cerr << "uci: data.paths must list at least one csv file\n";
    return 2;
  }
  const auto methods = cfg.get_strings("methods", {"degp", "de"});
  const std::size_t folds = cfg.get_size("data.folds", 5);
  const std::uint64_t seed = cfg.get_u64s("seeds", {0})[0];

  std::ostringstream folds_csv;
  folds_csv << "dataset,method,fold,nll,rmse\n";
  json summary;

  for (const std::string& path : paths) {
    const nd::Tensor table = io::read_numeric_csv(path);
    const std::size_t rows = table.rows();
    const std::size_t cols = table.cols();
    const std::size_t target =
        cfg.has("data.target_col") ? cfg.get_size("data.target_col", cols - 1)
                                   : cols - 1;
    const std::string name = std::filesystem::path(path).stem().string();

    // deterministic fold assignment
    std::vector<std::size_t> order(rows);
    for (std::size_t i = 0; i < rows; ++i) order[i] = i;
    nd::Rng fold_rng(seed ^ 0xf01d);
    fold_rng.shuffle(order);

    std::map<std::string, std::vector<FoldMetrics>> per_method;
    for (std::size_t k = 0; k < folds; ++k) {
      std::vector<std::size_t> tr_idx, te_idx;
      for (std::size_t i = 0; i < rows; ++i)
        (i % folds == k ? te_idx : tr_idx).push_back(order[i]);

      auto split = [&](const std::vector<std::size_t>& idx, nd::Tensor& x,
                       nd::Tensor& y) {
        x = nd::Tensor({idx.size(), cols - 1});
        y = nd::Tensor({idx.size()});
        for (std::size_t i = 0; i < idx.size(); ++i) {
          std::size_t jj = 0;
          for (std::size_t j = 0; j < cols; ++j) {
            if (j == target) continue;
            x(i, jj++) = table(idx[i], j);
          }
          y(i) = table(idx[i], target);
        }
      };
      nd::Tensor trx, tr_y, tex, te_y;
      split(tr_idx, trx, tr_y);
      split(te_idx, tex, te_y);

      for (const std::string& method : methods) {
        FoldMetrics m =
            evaluate_fold(method, cfg, trx, tr_y, tex, te_y, seed + k);
        per_method[method].push_back(m);
        folds_csv << name << "," << method << "," << k << ","
                  << io::format_double(m.nll) << ","
                  << io::format_double(m.rmse) << "\n";
      }
    }

    for (const auto& [method, ms] : per_method) {
      double nll = 0.0, r = 0.0;
      for (const auto& m : ms) {
        nll += m.nll / double(ms.size());
        r += m.rmse / double(ms.size());
      }
      summary[name][method]["nll_mean"] = nll;
      summary[name][method]["rmse_mean"] = r;
    }
    if (summary[name].contains("degp") && summary[name].contains("de")) {
      const double gap = double(summary[name]["degp"]["nll_mean"]) -
                         double(summary[name]["de"]["nll_mean"]);
      summary[name]["degp_minus_de_nll"] = gap;
      summary[name]["direction"] = gap <= 0.05 ? "pass" : "soft-fail";
    }
  }
  io::write_text_file(outdir + "/folds.csv", folds_csv.str());
  io::write_text_file(outdir + "/summary.json", summary.dump(2) + "\n");
  std::cout << "uci: wrote " << outdir << "/summary.json\n";
  return 0;
}

int run_classify_synth(const Config& cfg) {
  const std::string outdir = prepare_outdir(cfg);
  write_manifest(cfg, outdir);
  const std::uint64_t seed = cfg.get_u64s("seeds", {0})[0];
  const std::size_t classes = cfg.get_size("classify.classes", 3);
  const std::size_t train_n = cfg.get_size("classify.train_n", 120);
  const std::size_t test_n = cfg.get_size("classify.test_n", 240);
  const std::size_t ood_n = cfg.get_size("classify.ood_n", 120);
  const double blob_sd = cfg.get_double("classify.blob_sd", 0.6);
  const double radius = cfg.get_double("classify.radius", 2.0);
  const double ood_radius = cfg.get_double("classify.ood_radius", 6.0);
  const auto methods = cfg.get_strings("methods", {"degp", "de", "rde"});

  auto blob = [&](std::size_t n, nd::Rng& rng, train::Batch& b) {
    b.x = nd::Tensor({n, 2});
    b.labels.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = i % classes;
      const double angle = 2.0 * M_PI * double(k) / double(classes);
      b.x(i, 0) = radius * std::cos(angle) + blob_sd * rng.normal();
      b.x(i, 1) = radius * std::sin(angle) + blob_sd * rng.normal();
      b.labels.push_back(k);
    }
  };
  nd::Rng rng(seed ^ 0xc1a55);
  train::Batch train_set, test_set;
  blob(train_n, rng, train_set);
  blob(test_n, rng, test_set);
  nd::Tensor ood({ood_n, 2});
  for (std::size_t i = 0; i < ood_n; ++i) {
    const double angle = rng.uniform(0.0, 2.0 * M_PI);
    const double r = ood_radius * (0.9 + 0.2 * rng.uniform());
    ood(i, 0) = r * std::cos(angle);
    ood(i, 1) = r * std::sin(angle);
  }

  json metrics;
  std::ostringstream curve_csv;
  curve_csv << "method,tau,error,count\n";
  const std::size_t pred_samples = cfg.get_size("predictive.samples", 1000);

  for (const std::string& method : methods) {
    nets::EnsembleSpec spec = model_spec(cfg, 2, classes);
    train::TrainConfig tc = train_config(cfg, seed, 2, true);
    nets::EnsembleWeights ens = init_ensemble(spec, seed * 31 + 5);
    train::TemperatureParam temp;
    double temperature = 1.0;
    bool gp = false;
    if (method == "degp") {
      prior::McNnGpPrior mc(prior_spec(cfg, 2));
      train::train(ens, train_set, mc, tc, &temp);
      temperature = temp.temperature();
      gp = true;
    } else if (method == "de") {
      tc.train_temperature = false;
      baselines::train_de(ens, train_set, tc);
    } else if (method == "rde") {
      tc.train_temperature = false;
      baselines::train_rde(ens, train_set, tc,
                           cfg.get_double("train.weight_decay", 0.1));
    } else {
      throw std::invalid_argument("unknown classify method: " + method);
    }

    FittedModel model{method, ens, gp, tc.lambda_fraction, temperature};
    auto sample_probs = [&](const nd::Tensor& x) {
      auto fs = draw_functions(model, x, pred_samples, seed + 3);
      return eval::classification_predictive(fs, temperature);
    };
    eval::PredictiveSummary p_test = sample_probs(test_set.x);
    eval::PredictiveSummary p_ood = sample_probs(ood);

    eval::ClassificationMetrics m =
        eval::classification_metrics(p_test.mean, test_set.labels);
    metrics[method]["nll"] = m.nll;
    metrics[method]["accuracy"] = m.accuracy;
    metrics[method]["ece"] = m.ece;
    metrics[method]["temperature"] = temperature;

    // error-vs-uncertainty over the combined pool; OOD counts as wrong
    std::vector<int> wrong;
    nd::Tensor unc({test_n + ood_n});
    for (std::size_t i = 0; i < test_n; ++i) {
      std::size_t arg = 0;
      for (std::size_t j = 1; j < classes; ++j)
        if (p_test.mean(i, j) > p_test.mean(i, arg)) arg = j;
      wrong.push_back(arg == test_set.labels[i] ? 0 : 1);
      unc(i) = p_test.epistemic(i);
    }
    for (std::size_t i = 0; i < ood_n; ++i) {
      wrong.push_back(1);
      unc(test_n + i) = p_ood.epistemic(i);
    }
    std::vector<double> taus;
    for (int t = 0; t <= 20; ++t) taus.push_back(double(t) / 20.0);
    auto curve = eval::error_vs_uncertainty(wrong, unc, taus);
    for (const auto& pt : curve) {
      curve_csv << method << "," << io::format_double(pt.tau) << ",";
      if (pt.error) curve_csv << io::format_double(*pt.error);
      curve_csv << "," << pt.count << "\n";
    }
  }
  io::write_text_file(outdir + "/metrics.json", metrics.dump(2) + "\n");
  io::write_text_file(outdir + "/curve.csv", curve_csv.str());
  std::cout << "classify-synth: wrote " << outdir << "/metrics.json\n";
  return 0;
}

int run_bandit(const Config& cfg) {
  const std::string outdir = prepare_outdir(cfg);
  write_manifest(cfg, outdir);
  const auto seeds = cfg.get_u64s("seeds", {0, 1, 2, 3, 4});
  const auto methods = cfg.get_strings("methods", {"degp", "de", "uniform"});
  const std::size_t rounds = cfg.get_size("bandit.rounds", 2000);

  std::unique_ptr<bandit::Env> env;
  if (cfg.has("bandit.csv")) {
    env = std::make_unique<bandit::TableEnv>(cfg.get("bandit.csv", ""));
  } else {
    env = std::make_unique<bandit::WheelEnv>(
        cfg.get_double("bandit.delta", 0.5),
        cfg.get_double("bandit.noise_sd", 0.05));
  }

  std::vector<bandit::NamedAgentConfig> agents;
  for (const std::string& method : methods) {
    bandit::AgentConfig ac;
    ac.model = model_spec(cfg, env->context_dim(), env->arms());
    ac.prior = prior_spec(cfg, env->context_dim());
    ac.retrain = train_config(cfg, 0, env->context_dim(), false);
    ac.lambda_fraction = ac.retrain.lambda_fraction;
    ac.retrain_every = cfg.get_size("bandit.retrain_every", 50);
    if (method == "degp") ac.policy = bandit::Policy::kGpSample;
    else if (method == "de") ac.policy = bandit::Policy::kRandomMember;
    else if (method == "uniform") ac.policy = bandit::Policy::kUniform;
    else if (method == "oracle") ac.policy = bandit::Policy::kOracleGreedy;
    else throw std::invalid_argument("unknown bandit method: " + method);
    agents.push_back({method, ac});
  }

  const auto traces = bandit::run_experiment(*env, agents, rounds, seeds);

  std::ostringstream rewards_csv;
  rewards_csv << "method,seed,round,reward_cum\n";
  for (const auto& t : traces)
    for (std::size_t r = 0; r < t.cumulative.size(); ++r)
      rewards_csv << t.agent << "," << t.seed << "," << (r + 1) << ","
                  << io::format_double(t.cumulative[r]) << "\n";
  io::write_text_file(outdir + "/rewards.csv", rewards_csv.str());

  json summary;
  for (const std::string& method : methods) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& t : traces)
      if (t.agent == method) {
        total += t.cumulative.back();
        ++count;
      }
    summary[method]["mean_cumulative_reward"] = total / double(count);
  }
  io::write_text_file(outdir + "/summary.json", summary.dump(2) + "\n");
  std::cout << "bandit: wrote " << outdir << "/rewards.csv\n";
  return 0;
}

int run_kernel_check(const Config& cfg) {
  const std::string outdir = prepare_outdir(cfg);
  write_manifest(cfg, outdir);
  const std::uint64_t seed = cfg.get_u64s("seeds", {0})[0];
  nd::Rng rng(seed ^ 0xc4ec);
  json report;
  bool all_pass = true;

  auto record = [&](const std::string& name, double value, double tol,
                    bool pass) {
    json entry;
    entry["name"] = name;
    entry["value"] = value;
    entry["tolerance"] = tol;
    entry["pass"] = pass;
    report["checks"].push_back(entry);
    all_pass = all_pass && pass;
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << name << ": " << value
              << " (tol " << tol << ")\n";
  };

  {  // structured KL vs dense oracle
    const std::size_t instances = cfg.get_size("kernel.instances", 200);
    const std::size_t max_n = cfg.get_size("kernel.max_n", 12);
    const std::size_t max_c = cfg.get_size("kernel.max_c", 4);
    const std::size_t max_m = cfg.get_size("kernel.max_m", 8);
    double worst = 0.0;
    for (std::size_t it = 0; it < instances; ++it) {
      const std::size_t n = 1 + rng.index(max_n);
      const std::size_t c = 1 + rng.index(max_c);
      const std::size_t m = 1 + rng.index(max_m);
      nd::Tensor l({n, n});
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) l(i, j) = 0.3 * rng.normal();
        l(i, i) = 0.6 + rng.uniform();
      }
      const nd::Tensor base = nd::matmul(l, l, false, true);
      const nd::Tensor mean = rng.normal_tensor({n * c});
      const nd::Tensor gc = rng.normal_tensor({n * c, m});
      const double lambda = std::pow(10.0, rng.uniform(-4.0, 0.0));
      const gauss::PriorFactor pf = gauss::factor_kron_prior(base, c);
      const double fast = gauss::kl_structured(mean, gc, lambda, pf);
      const gauss::GaussianMeasure q{mean, gauss::LowRankDiag{gc, lambda}};
      const gauss::GaussianMeasure p{nd::Tensor({n * c}),
                                     gauss::KronIdentity{base, c}};
      const double slow = gauss::kl_dense(q, p);
      worst = std::max(worst,
                       std::abs(fast - slow) / std::max(1.0, std::abs(slow)));
    }
    record("structured_kl_max_rel_err", worst, 1e-8, worst < 1e-8);
  }

  {  // determinant lemma correctness
    const std::size_t instances = cfg.get_size("kernel.logdet_instances", 100);
    double worst = 0.0;
    for (std::size_t it = 0; it < instances; ++it) {
      const std::size_t d = 1 + rng.index(32);
      const std::size_t m = 1 + rng.index(8);
      const nd::Tensor gc = rng.normal_tensor({d, m});
      const double lambda = std::pow(10.0, rng.uniform(-4.0, 0.0));
      const double fast = nd::lowrank_logdet(gc, lambda);
      nd::Tensor k = nd::matmul(gc, gc, false, true, 1.0 / double(m));
      for (std::size_t i = 0; i < d; ++i) k(i, i) += lambda;
      const double slow = nd::logdet_psd(k);
      worst = std::max(worst,
                       std::abs(fast - slow) / std::max(1.0, std::abs(slow)));
    }
    record("lowrank_logdet_max_rel_err", worst, 1e-9, worst < 1e-9);
  }

  {  // determinant lemma speedup at production size
    const std::size_t d = cfg.get_size("kernel.timing_d", 2560);
    const std::size_t m = cfg.get_size("kernel.timing_m", 10);
    const nd::Tensor gc = rng.normal_tensor({d, m});
    const double lambda = 0.1;
    using clock = std::chrono::steady_clock;

    const auto t0 = clock::now();
    const double fast = nd::lowrank_logdet(gc, lambda);
    const auto t1 = clock::now();
    nd::Tensor k = nd::matmul(gc, gc, false, true, 1.0 / double(m));
    for (std::size_t i = 0; i < d; ++i) k(i, i) += lambda;
    const auto t2 = clock::now();
    const double slow = nd::logdet_psd(k);
    const auto t3 = clock::now();

    const double fast_s = std::chrono::duration<double>(t1 - t0).count();
    const double dense_s = std::chrono::duration<double>(t3 - t2).count();
    const double speedup = dense_s / std::max(fast_s, 1e-9);
    record("lowrank_vs_dense_speedup", speedup, 10.0, speedup >= 10.0);
    record("lowrank_vs_dense_rel_err",
           std::abs(fast - slow) / std::max(1.0, std::abs(slow)), 1e-9,
           std::abs(fast - slow) / std::max(1.0, std::abs(slow)) < 1e-9);
    report["timing"]["lowrank_seconds"] = fast_s;
    report["timing"]["dense_seconds"] = dense_s;
    report["timing"]["dimension"] = d;
    report["timing"]["members"] = m;
  }

  {  // MC prior vs analytic arc-cosine kernel
    prior::PriorSpec ps;
    ps.input_dim = 2;
    ps.widths = {cfg.get_size("kernel.mc_width", 64)};
    ps.mc_samples = cfg.get_size("kernel.mc_s", 2000);
    ps.seed = seed + 1;
    prior::McNnGpPrior prior(ps);
    const std::size_t pairs = cfg.get_size("kernel.pairs", 50);
    nd::Tensor x = rng.uniform_tensor({2 * pairs, 2}, -2.0, 2.0);
    const nd::Tensor mc = prior.base(x);
    const nd::Tensor an = prior::arccos_kernel(x, x, 1, ps.sigma_w2, ps.sigma_b2);
    double worst = 0.0;
    for (std::size_t p = 0; p < pairs; ++p) {
      const std::size_t i = 2 * p, j = 2 * p + 1;
      worst = std::max(worst, std::abs(mc(i, j) - an(i, j)) /
                                  std::max(std::abs(an(i, j)), 1e-12));
    }
    record("mc_prior_max_rel_err", worst, 0.05, worst < 0.05);
  }

  {  // reparameterized sampling moments
    nd::Rng init(seed + 2);
    gp::FunctionBatch b;
    b.mean = init.normal_tensor({8});
    b.centered = init.normal_tensor({8, 4});
    b.lambda = 0.2;
    const nd::Tensor k = b.measure().dense_cov();
    const std::size_t u = 200000;
    nd::Rng srng(seed + 3);
    const nd::Tensor s = gp::sample_functions(b, u, srng);
    nd::Tensor mean({8});
    for (std::size_t i = 0; i < u; ++i)
      for (std::size_t j = 0; j < 8; ++j) mean(j) += s(i, j) / double(u);
    nd::Tensor cov({8, 8});
    for (std::size_t i = 0; i < u; ++i)
      for (std::size_t a = 0; a < 8; ++a)
        for (std::size_t c2 = 0; c2 < 8; ++c2)
          cov(a, c2) += (s(i, a) - mean(a)) * (s(i, c2) - mean(c2)) / double(u);
    const double rel =
        nd::frobenius_norm(nd::sub(cov, k)) / nd::frobenius_norm(k);
    record("sampling_cov_rel_frobenius_err", rel, 0.02, rel < 0.02);
  }

  report["all_pass"] = all_pass;
  io::write_text_file(outdir + "/report.json", report.dump(2) + "\n");
  std::cout << (all_pass ? "kernel-check: all checks passed\n"
                         : "kernel-check: FAILURES present\n");
  return all_pass ? 0 : 1;
}

}  // namespace degp::cli
