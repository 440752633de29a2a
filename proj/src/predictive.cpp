#include "degp/predictive.hpp"

#include <cmath>
#include <stdexcept>

namespace degp::eval {

std::vector<nd::Tensor> member_function_samples(const nets::EnsembleWeights& ens,
                                                const nd::Tensor& x) {
  return ensemble_forward(ens, x);
}

std::vector<nd::Tensor> gp_function_samples(const nets::EnsembleWeights& ens,
                                            const nd::Tensor& x,
                                            double lambda_fraction,
                                            std::size_t samples, nd::Rng& rng) {
  const gp::FunctionBatch b = gp::batch_at(ens, x, lambda_fraction);
  const nd::Tensor block = gp::sample_functions(b, samples, rng);
  const std::size_t n = x.rows();
  const std::size_t c = b.dim() / n;
  std::vector<nd::Tensor> fs;
  fs.reserve(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    nd::Tensor f({n, c});
    for (std::size_t i = 0; i < b.dim(); ++i) f(i) = block(s, i);
    fs.push_back(std::move(f));
  }
  return fs;
}

PredictiveSummary regression_predictive(const std::vector<nd::Tensor>& fs,
                                        double noise_var) {
  if (fs.empty()) throw std::invalid_argument("regression_predictive: no samples");
  const std::size_t n = fs[0].rows();
  nd::check_shape(fs[0].cols() == 1, "regression_predictive: C == 1");
  const double s = static_cast<double>(fs.size());

  PredictiveSummary out;
  out.sample_count = fs.size();
  out.mean = nd::Tensor({n});
  for (const auto& f : fs)
    for (std::size_t i = 0; i < n; ++i) out.mean(i) += f(i, 0) / s;

  // total variance = spread of the sample means + observation noise
  out.epistemic = nd::Tensor({n});
  for (const auto& f : fs)
    for (std::size_t i = 0; i < n; ++i) {
      const double d = f(i, 0) - out.mean(i);
      out.epistemic(i) += d * d / s;
    }
  out.variance = out.epistemic;
  for (std::size_t i = 0; i < n; ++i) out.variance(i) += noise_var;
  return out;
}

nd::Tensor softmax_rows(const nd::Tensor& logits, double temperature) {
  if (!(temperature > 0.0))
    throw std::invalid_argument("softmax_rows: temperature must be positive");
  nd::Tensor p = logits;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double mx = p(i, 0) / temperature;
    for (std::size_t j = 0; j < p.cols(); ++j)
      mx = std::max(mx, p(i, j) / temperature);
    double z = 0.0;
    for (std::size_t j = 0; j < p.cols(); ++j) {
      p(i, j) = std::exp(p(i, j) / temperature - mx);
      z += p(i, j);
    }
    for (std::size_t j = 0; j < p.cols(); ++j) p(i, j) /= z;
  }
  return p;
}

double entropy(const nd::Tensor& probs, std::size_t row) {
  double h = 0.0;
  for (std::size_t j = 0; j < probs.cols(); ++j) {
    const double p = probs(row, j);
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

nd::Tensor mutual_info(const std::vector<nd::Tensor>& prob_samples) {
  if (prob_samples.empty())
    throw std::invalid_argument("mutual_info: no samples");
  const std::size_t n = prob_samples[0].rows();
  const std::size_t c = prob_samples[0].cols();
  const double s = static_cast<double>(prob_samples.size());

  nd::Tensor mean({n, c});
  for (const auto& p : prob_samples) {
    nd::check_shape(p.rows() == n && p.cols() == c, "mutual_info sample shapes");
    for (std::size_t i = 0; i < p.size(); ++i) mean(i) += p(i) / s;
  }
  nd::Tensor mi({n});
  for (std::size_t i = 0; i < n; ++i) {
    double mean_entropy = 0.0;
    for (const auto& p : prob_samples) mean_entropy += entropy(p, i) / s;
    mi(i) = std::max(0.0, entropy(mean, i) - mean_entropy);
  }
  return mi;
}

PredictiveSummary classification_predictive(const std::vector<nd::Tensor>& fs,
                                            double temperature) {
  if (fs.empty())
    throw std::invalid_argument("classification_predictive: no samples");
  std::vector<nd::Tensor> probs;
  probs.reserve(fs.size());
  for (const auto& f : fs) probs.push_back(softmax_rows(f, temperature));

  const std::size_t n = fs[0].rows();
  const std::size_t c = fs[0].cols();
  PredictiveSummary out;
  out.sample_count = fs.size();
  out.mean = nd::Tensor({n, c});
  for (const auto& p : probs)
    for (std::size_t i = 0; i < p.size(); ++i)
      out.mean(i) += p(i) / static_cast<double>(fs.size());
  out.epistemic = mutual_info(probs);
  return out;
}

double regression_nll(const std::vector<nd::Tensor>& fs, const nd::Tensor& y,
                      double noise_var) {
  if (fs.empty()) throw std::invalid_argument("regression_nll: no samples");
  const std::size_t n = y.size();
  const double log_s = std::log(static_cast<double>(fs.size()));
  const double log_norm = -0.5 * std::log(2.0 * M_PI * noise_var);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -1e300;
    std::vector<double> terms(fs.size());
    for (std::size_t s = 0; s < fs.size(); ++s) {
      const double d = y(i) - fs[s](i, 0);
      terms[s] = log_norm - d * d / (2.0 * noise_var);
      mx = std::max(mx, terms[s]);
    }
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - mx);
    total += -(mx + std::log(acc) - log_s);
  }
  return total / static_cast<double>(n);
}

void normalize_epistemic(std::vector<PredictiveSummary*> pool) {
  double mx = 0.0;
  for (const auto* s : pool) mx = std::max(mx, nd::max_abs(s->epistemic));
  for (auto* s : pool) {
    s->epistemic_norm = s->epistemic;
    if (mx > 0.0)
      for (std::size_t i = 0; i < s->epistemic_norm.size(); ++i)
        s->epistemic_norm(i) /= mx;
  }
}

}  // namespace degp::eval
