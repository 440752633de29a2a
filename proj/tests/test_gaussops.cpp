#include <doctest.h>

#include <cmath>

#include "degp/gaussian.hpp"
#include "degp/linalg.hpp"
#include "degp/rng.hpp"
#include "fd_oracle.hpp"

using namespace degp;
using namespace degp::gauss;

namespace {

GaussianMeasure dense_normal(nd::Tensor mean, nd::Tensor cov) {
  return {std::move(mean), DenseCov{std::move(cov)}};
}

// Random structured instance: q low-rank, p Kronecker with SPD base.
struct Instance {
  nd::Tensor mean, gc, base;
  double lambda;
  std::size_t c;
};

Instance random_instance(nd::Rng& rng, std::size_t n, std::size_t c,
                         std::size_t m) {
  Instance inst;
  inst.c = c;
  inst.mean = rng.normal_tensor({n * c});
  inst.gc = rng.normal_tensor({n * c, m});
  inst.lambda = std::pow(10.0, rng.uniform(-4.0, 0.0));
  nd::Tensor l({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) l(i, j) = 0.3 * rng.normal();
    l(i, i) = 0.6 + rng.uniform();
  }
  inst.base = nd::matmul(l, l, false, true);
  return inst;
}

double kl_dense_of(const Instance& inst) {
  GaussianMeasure q{inst.mean, LowRankDiag{inst.gc, inst.lambda}};
  GaussianMeasure p{nd::Tensor({inst.mean.size()}),
                    KronIdentity{inst.base, inst.c}};
  return kl_dense(q, p);
}

}  // namespace

TEST_CASE("kl_dense: identical distributions, mean shift, variance scale") {
  nd::Rng rng(1);
  nd::Tensor cov = nd::Tensor::identity(2);
  GaussianMeasure std2 = dense_normal(nd::Tensor({2}), cov);

  CHECK(std::abs(kl_dense(std2, std2)) < 1e-10);

  GaussianMeasure shifted = dense_normal(nd::Tensor::vec({3, 4}), cov);
  CHECK(kl_dense(shifted, std2) == doctest::Approx(12.5));

  GaussianMeasure wide = dense_normal(nd::Tensor({2}), nd::scale(cov, 2.0));
  CHECK(kl_dense(wide, std2) == doctest::Approx(1.0 - std::log(2.0)));
}

TEST_CASE("kl_structured: standard-normal fixed point") {
  // Gc = 0, m = 0, lambda = 1, B = I: q and p are both standard normals
  const std::size_t n = 3, c = 2;
  PriorFactor prior = factor_kron_prior(nd::Tensor::identity(n), c);
  nd::Tensor m({n * c});
  nd::Tensor gc({n * c, 4});
  CHECK(std::abs(kl_structured(m, gc, 1.0, prior)) < 1e-12);
}

TEST_CASE("kl_structured equals kl_dense on random instances") {
  nd::Rng rng(2);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t n = 1 + rng.index(12);
    const std::size_t c = 1 + rng.index(4);
    const std::size_t m = 1 + rng.index(8);
    Instance inst = random_instance(rng, n, c, m);
    PriorFactor prior = factor_kron_prior(inst.base, inst.c);
    const double fast = kl_structured(inst.mean, inst.gc, inst.lambda, prior);
    const double slow = kl_dense_of(inst);
    CHECK(std::abs(fast - slow) <= 1e-8 * std::max(1.0, std::abs(slow)));
    CHECK(fast >= -1e-9);  // nonnegativity
  }
}

TEST_CASE("kl_structured: quadratic growth in the mean") {
  nd::Rng rng(3);
  Instance inst = random_instance(rng, 6, 3, 4);
  PriorFactor prior = factor_kron_prior(inst.base, inst.c);
  const double base_kl = kl_structured(inst.mean, inst.gc, inst.lambda, prior);
  const double quad =
      0.5 * nd::dot(inst.mean, kron_apply_inverse(prior, inst.mean));
  const double doubled =
      kl_structured(nd::scale(inst.mean, 2.0), inst.gc, inst.lambda, prior);
  CHECK(doubled - base_kl == doctest::Approx(3.0 * quad).epsilon(1e-9));
}

TEST_CASE("kl_structured: lambda sweep stays on the dense oracle") {
  nd::Rng rng(4);
  Instance inst = random_instance(rng, 5, 2, 3);
  PriorFactor prior = factor_kron_prior(inst.base, inst.c);
  for (double lambda : {1e-4, 1e-3, 1e-2, 0.1, 0.5, 1.0}) {
    inst.lambda = lambda;
    const double fast = kl_structured(inst.mean, inst.gc, lambda, prior);
    const double slow = kl_dense_of(inst);
    CHECK(std::abs(fast - slow) <= 1e-8 * std::max(1.0, std::abs(slow)));
  }
}

TEST_CASE("kron_apply_inverse: identity base, C=1 solve, dense oracle") {
  nd::Rng rng(5);
  // B = I leaves the operand unchanged
  PriorFactor eye = factor_kron_prior(nd::Tensor::identity(4), 2);
  nd::Tensor v = rng.normal_tensor({8, 3});
  CHECK(nd::max_abs(nd::sub(kron_apply_inverse(eye, v), v)) < 1e-12);

  // C = 1 degenerates to an ordinary linear solve
  Instance inst = random_instance(rng, 5, 1, 2);
  PriorFactor prior = factor_kron_prior(inst.base, 1);
  nd::Tensor rhs = rng.normal_tensor({5, 2});
  nd::Tensor got = kron_apply_inverse(prior, rhs);
  CHECK(nd::max_abs(nd::sub(nd::matmul(inst.base, got), rhs)) < 1e-9);

  // dense Kronecker materialization oracle, n=5, C=2
  Instance kron = random_instance(rng, 5, 2, 2);
  PriorFactor pf = factor_kron_prior(kron.base, 2);
  GaussianMeasure p{nd::Tensor({10}), KronIdentity{kron.base, 2}};
  nd::Tensor dense = p.dense_cov();
  nd::Tensor x = rng.normal_tensor({10, 1});
  nd::Tensor via_struct = kron_apply_inverse(pf, x);
  nd::Tensor recovered = nd::matmul(dense, via_struct);
  CHECK(nd::max_abs(nd::sub(recovered, x)) < 1e-10);
}

TEST_CASE("kl_structured gradients match finite differences") {
  nd::Rng rng(6);
  Instance inst = random_instance(rng, 4, 2, 3);
  PriorFactor prior = factor_kron_prior(inst.base, inst.c);

  auto eval = [&]() {
    return kl_structured(inst.mean, inst.gc, inst.lambda, prior);
  };
  auto fd = testutil::finite_diff({&inst.mean, &inst.gc}, eval, 1e-4);

  nd::Tape tape;
  nd::Var m = tape.leaf(inst.mean);
  nd::Var gc = tape.leaf(inst.gc);
  nd::Var kl = kl_structured(tape, m, gc, inst.lambda, prior);
  CHECK(tape.value(kl).item() == doctest::Approx(eval()).epsilon(1e-12));
  tape.backward(kl);
  CHECK(testutil::max_rel_err({tape.grad(m), tape.grad(gc)}, fd, 1e-6) < 1e-4);
}

TEST_CASE("kl_dense rejects mismatched dimensions and non-PD priors") {
  GaussianMeasure q = dense_normal(nd::Tensor({2}), nd::Tensor::identity(2));
  GaussianMeasure p3 = dense_normal(nd::Tensor({3}), nd::Tensor::identity(3));
  CHECK_THROWS_AS(kl_dense(q, p3), std::invalid_argument);

  nd::Tensor indefinite = nd::Tensor::matrix(2, 2, {1, 2, 2, 1});
  GaussianMeasure bad = dense_normal(nd::Tensor({2}), indefinite);
  CHECK_THROWS_AS(kl_dense(q, bad), nd::NotPositiveDefinite);
}
