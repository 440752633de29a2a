#include "degp/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace degp::eval {

ClassificationMetrics classification_metrics(
    const nd::Tensor& probs, const std::vector<std::size_t>& labels,
    std::size_t bins) {
  const std::size_t n = probs.rows();
  const std::size_t c = probs.cols();
  nd::check_shape(labels.size() == n, "classification_metrics labels");
  if (n == 0) throw std::invalid_argument("classification_metrics: empty");

  ClassificationMetrics out;
  std::vector<double> bin_conf(bins, 0.0), bin_acc(bins, 0.0);
  std::vector<std::size_t> bin_count(bins, 0);

  for (std::size_t i = 0; i < n; ++i) {
    std::size_t arg = 0;
    for (std::size_t j = 1; j < c; ++j)
      if (probs(i, j) > probs(i, arg)) arg = j;
    const double conf = probs(i, arg);
    const bool correct = arg == labels[i];
    out.accuracy += correct ? 1.0 : 0.0;
    out.nll -= std::log(std::max(probs(i, labels[i]), 1e-300));
    std::size_t b = static_cast<std::size_t>(conf * static_cast<double>(bins));
    if (b >= bins) b = bins - 1;  // conf == 1.0 lands in the top bin
    bin_conf[b] += conf;
    bin_acc[b] += correct ? 1.0 : 0.0;
    ++bin_count[b];
  }
  out.accuracy /= static_cast<double>(n);
  out.nll /= static_cast<double>(n);
  for (std::size_t b = 0; b < bins; ++b) {
    if (bin_count[b] == 0) continue;
    const double w = static_cast<double>(bin_count[b]) / static_cast<double>(n);
    const double acc = bin_acc[b] / static_cast<double>(bin_count[b]);
    const double conf = bin_conf[b] / static_cast<double>(bin_count[b]);
    out.ece += w * std::abs(acc - conf);
  }
  return out;
}

double rmse(const nd::Tensor& predicted, const nd::Tensor& truth) {
  nd::check_shape(predicted.size() == truth.size(), "rmse");
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted(i) - truth(i);
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(predicted.size()));
}

std::vector<CurvePoint> error_vs_uncertainty(const std::vector<int>& wrong,
                                             const nd::Tensor& uncertainty,
                                             const std::vector<double>& taus) {
  const std::size_t n = wrong.size();
  nd::check_shape(uncertainty.size() == n, "error_vs_uncertainty");
  double mx = 0.0;
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, uncertainty(i));

  std::vector<CurvePoint> curve;
  curve.reserve(taus.size());
  for (double tau : taus) {
    CurvePoint pt;
    pt.tau = tau;
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = mx > 0.0 ? uncertainty(i) / mx : 0.0;
      if (u <= tau) {
        err += wrong[i];
        ++pt.count;
      }
    }
    if (pt.count > 0) pt.error = err / static_cast<double>(pt.count);
    curve.push_back(pt);
  }
  return curve;
}

}  // namespace degp::eval
