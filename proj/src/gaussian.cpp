#include "degp/gaussian.hpp"

#include <cmath>
#include <stdexcept>

#include "degp/linalg.hpp"

namespace degp::gauss {

nd::Tensor GaussianMeasure::dense_cov() const {
  const std::size_t d = dim();
  if (const auto* lr = std::get_if<LowRankDiag>(&cov)) {
    nd::Tensor k({d, d});
    if (lr->centered.size() > 0)
      nd::matmul_acc(lr->centered, lr->centered, k, false, true,
                     1.0 / static_cast<double>(lr->centered.cols()));
    for (std::size_t i = 0; i < d; ++i) k(i, i) += lr->lambda;
    return k;
  }
  if (const auto* kr = std::get_if<KronIdentity>(&cov)) {
    const std::size_t n = kr->base.rows();
    const std::size_t c = kr->outputs;
    nd::check_shape(n * c == d, "KronIdentity dimension");
    nd::Tensor k({d, d});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t o = 0; o < c; ++o) k(i * c + o, j * c + o) = kr->base(i, j);
    return k;
  }
  return std::get<DenseCov>(cov).cov;
}

double kl_dense(const GaussianMeasure& q, const GaussianMeasure& p) {
  if (q.dim() != p.dim())
    throw std::invalid_argument("kl_dense: dimension mismatch");
  const std::size_t d = q.dim();
  const nd::Tensor kq = q.dense_cov();
  const nd::Tensor kp = p.dense_cov();
  const nd::Tensor lp = nd::cholesky(kp);
  const double logdet_p = nd::chol_logdet(lp);
  const double logdet_q = nd::logdet_psd(kq);

  // tr(Kp^{-1} Kq)
  const nd::Tensor solved = nd::chol_solve(lp, kq);
  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += solved(i, i);

  const nd::Tensor diff = nd::sub(q.mean, p.mean);
  const double quad = nd::dot(diff, nd::chol_solve(lp, diff));

  return 0.5 * (trace + quad - static_cast<double>(d) + logdet_p - logdet_q);
}

PriorFactor factor_kron_prior(nd::Tensor base, std::size_t outputs) {
  PriorFactor f;
  f.chol = nd::cholesky(base);
  f.base = std::move(base);
  f.logdet = nd::chol_logdet(f.chol);
  f.trace_inv = nd::trace_inverse(f.chol);
  f.outputs = outputs;
  return f;
}

nd::Tensor kron_apply_inverse(const PriorFactor& prior, const nd::Tensor& v) {
  const std::size_t n = prior.base.rows();
  const std::size_t c = prior.outputs;
  const bool vector_input = v.rank() == 1;
  const nd::Tensor v2 = vector_input ? v.reshaped({v.size(), 1}) : v;
  nd::check_shape(v2.rows() == n * c, "kron_apply_inverse rhs rows");
  const std::size_t k = v2.cols();
  nd::Tensor out =
      nd::chol_solve(prior.chol, v2.reshaped({n, c * k})).reshaped({n * c, k});
  return vector_input ? out.reshaped({v.size()}) : out;
}

namespace {
double kl_terms(double trace, double quad, double logdet_q,
                const PriorFactor& prior, std::size_t d) {
  const double logdet_p = static_cast<double>(prior.outputs) * prior.logdet;
  return 0.5 * (trace + quad - static_cast<double>(d) + logdet_p - logdet_q);
}
}  // namespace

double kl_structured(const nd::Tensor& m, const nd::Tensor& gc, double lambda,
                     const PriorFactor& prior) {
  const std::size_t d = prior.joint_dim();
  nd::check_shape(m.size() == d && gc.rows() == d, "kl_structured dimensions");
  const double mcount = static_cast<double>(gc.cols());
  const nd::Tensor z = kron_apply_inverse(prior, gc);
  const double trace =
      nd::dot(gc, z) / mcount +
      lambda * static_cast<double>(prior.outputs) * prior.trace_inv;
  const double quad = nd::dot(m, kron_apply_inverse(prior, m));
  const double logdet_q = nd::lowrank_logdet(gc, lambda);
  return kl_terms(trace, quad, logdet_q, prior, d);
}

nd::Var kl_structured(nd::Tape& tape, nd::Var m, nd::Var gc, double lambda,
                      const PriorFactor& prior) {
  const std::size_t d = prior.joint_dim();
  nd::check_shape(tape.value(m).size() == d && tape.value(gc).rows() == d,
                  "kl_structured dimensions");
  const double mcount = static_cast<double>(tape.value(gc).cols());
  nd::Var z = tape.kron_solve(prior.chol, prior.outputs, gc);
  nd::Var trace = tape.scale(dot(gc, z), 1.0 / mcount);
  nd::Var quad = dot(m, tape.kron_solve(prior.chol, prior.outputs, m));
  nd::Var logdet_q = tape.lowrank_logdet(gc, lambda);
  const double constant =
      lambda * static_cast<double>(prior.outputs) * prior.trace_inv -
      static_cast<double>(d) + static_cast<double>(prior.outputs) * prior.logdet;
  nd::Var shift = tape.constant(nd::Tensor::scalar(constant));
  return tape.scale(trace + quad + shift - logdet_q, 0.5);
}

}  // namespace degp::gauss
