#include "degp/prior_kernel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "degp/linalg.hpp"
#include "degp/rng.hpp"

namespace degp::prior {

void PriorSpec::validate() const {
  if (input_dim == 0) throw std::invalid_argument("PriorSpec: input_dim >= 1");
  if (mc_samples == 0) throw std::invalid_argument("PriorSpec: S >= 1");
  if (!(sigma_w2 > 0.0) || !(sigma_b2 >= 0.0))
    throw std::invalid_argument("PriorSpec: bad variances");
  for (std::size_t w : widths)
    if (w == 0) throw std::invalid_argument("PriorSpec: zero width");
}

namespace {
nets::MlpSpec projector_spec(const PriorSpec& spec) {
  // The projector is the hidden stack; the readout is analytic, so the
  // MlpSpec output layer is a placeholder never evaluated.
  nets::MlpSpec p;
  p.input_dim = spec.input_dim;
  p.hidden = spec.widths;
  p.output_dim = 1;
  p.activation = nets::Activation::kRelu;
  return p;
}
}  // namespace

McNnGpPrior::McNnGpPrior(PriorSpec spec)
    : spec_(std::move(spec)), projector_(projector_spec(spec_)) {
  spec_.validate();
  nd::Rng rng(spec_.seed ^ 0x70726921ULL);
  const std::size_t draws = spec_.widths.empty() ? 1 : spec_.mc_samples;
  for (std::size_t s = 0; s < draws; ++s)
    draws_.push_back(nets::sample_gaussian_weights(projector_, spec_.sigma_w2,
                                                   spec_.sigma_b2, rng));
}

nd::Tensor McNnGpPrior::features(std::size_t s, const nd::Tensor& x) const {
  if (spec_.widths.empty()) return x;  // identity projector
  return nets::forward_features(projector_, draws_.at(s), x);
}

nd::Tensor McNnGpPrior::base(const nd::Tensor& x) const {
  nd::check_shape(x.cols() == spec_.input_dim, "prior base input width");
  const std::size_t n = x.rows();
  const std::size_t draws = draws_.size();
  nd::Tensor k_hat({n, n});
  for (std::size_t s = 0; s < draws; ++s) {
    const nd::Tensor h = features(s, x);
    nd::matmul_acc(h, h, k_hat, false, true,
                   1.0 / (static_cast<double>(draws) *
                          static_cast<double>(spec_.feature_dim())));
  }
  nd::Tensor b({n, n});
  for (std::size_t i = 0; i < b.size(); ++i)
    b(i) = spec_.sigma_w2 * k_hat(i) + spec_.sigma_b2;
  return b;
}

gauss::PriorFactor prior_base(const McNnGpPrior& prior, const nd::Tensor& x,
                              std::size_t outputs) {
  nd::Tensor b = prior.base(x);
  try {
    return gauss::factor_kron_prior(b, outputs);
  } catch (const nd::NotPositiveDefinite&) {
    double mean_diag = 0.0;
    for (std::size_t i = 0; i < b.rows(); ++i) mean_diag += b(i, i);
    mean_diag /= static_cast<double>(b.rows());
    for (std::size_t i = 0; i < b.rows(); ++i) b(i, i) += 1e-8 * mean_diag;
    return gauss::factor_kron_prior(std::move(b), outputs);
  }
}

nd::Tensor arccos_kernel(const nd::Tensor& xa, const nd::Tensor& xb,
                         std::size_t depth, double sigma_w2, double sigma_b2) {
  nd::check_shape(xa.cols() == xb.cols(), "arccos_kernel input widths");
  const double d = static_cast<double>(xa.cols());
  const std::size_t na = xa.rows();
  const std::size_t nb = xb.rows();

  nd::Tensor kxy = nd::matmul(xa, xb, false, true, sigma_w2 / d);
  for (std::size_t i = 0; i < kxy.size(); ++i) kxy(i) += sigma_b2;
  nd::Tensor kxx({na});
  nd::Tensor kyy({nb});
  for (std::size_t i = 0; i < na; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < xa.cols(); ++j) s += xa(i, j) * xa(i, j);
    kxx(i) = sigma_w2 * s / d + sigma_b2;
  }
  for (std::size_t i = 0; i < nb; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < xb.cols(); ++j) s += xb(i, j) * xb(i, j);
    kyy(i) = sigma_w2 * s / d + sigma_b2;
  }

  for (std::size_t level = 0; level < depth; ++level) {
    nd::Tensor next({na, nb});
    for (std::size_t i = 0; i < na; ++i) {
      for (std::size_t j = 0; j < nb; ++j) {
        const double norm = std::sqrt(kxx(i) * kyy(j));
        double cosv = norm > 0.0 ? kxy(i, j) / norm : 0.0;
        cosv = std::min(1.0, std::max(-1.0, cosv));
        const double theta = std::acos(cosv);
        next(i, j) = sigma_w2 / (2.0 * std::numbers::pi) * norm *
                         (std::sin(theta) +
                          (std::numbers::pi - theta) * std::cos(theta)) +
                     sigma_b2;
      }
    }
    // Diagonal recursion: theta = 0 gives K <- sigma_w^2/2 K + sigma_b^2.
    for (std::size_t i = 0; i < na; ++i)
      kxx(i) = sigma_w2 / 2.0 * kxx(i) + sigma_b2;
    for (std::size_t j = 0; j < nb; ++j)
      kyy(j) = sigma_w2 / 2.0 * kyy(j) + sigma_b2;
    kxy = std::move(next);
  }
  return kxy;
}

GpRegression exact_gp_regression(const nd::Tensor& k_train,
                                 const nd::Tensor& k_cross,
                                 const nd::Tensor& k_test_diag,
                                 const nd::Tensor& y, double noise_var) {
  const std::size_t n = k_train.rows();
  const std::size_t t = k_test_diag.size();
  nd::check_shape(k_train.cols() == n, "exact_gp_regression: K square");
  nd::check_shape(k_cross.rows() == n && k_cross.cols() == t,
                  "exact_gp_regression: K_cross n x t");
  nd::check_shape(y.size() == n, "exact_gp_regression: targets");

  nd::Tensor ky = k_train;
  for (std::size_t i = 0; i < n; ++i) ky(i, i) += noise_var;
  const nd::Tensor l = nd::cholesky(ky);
  const nd::Tensor alpha = nd::chol_solve(l, y);

  GpRegression out;
  out.mean = nd::matmul(k_cross.reshaped({n, t}), alpha.reshaped({n, 1}), true,
                        false)
                 .reshaped({t});
  const nd::Tensor q = nd::solve_lower(l, k_cross);  // n x t
  out.variance = nd::Tensor({t});
  for (std::size_t j = 0; j < t; ++j) {
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) quad += q(i, j) * q(i, j);
    double v = k_test_diag(j) - quad;
    if (v < 0.0) {
      v = 0.0;
      ++out.clamped;
    }
    out.variance(j) = v;
  }
  return out;
}

}  // namespace degp::prior
