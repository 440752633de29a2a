#include <doctest.h>

#include <cmath>

#include "degp/linalg.hpp"
#include "degp/posterior.hpp"
#include "fd_oracle.hpp"

using namespace degp;
using namespace degp::gp;

TEST_CASE("mean_and_center: single member and mirrored pair") {
  // M = 1: the centered block is the zero column
  nd::Tensor raw1 = nd::Tensor::matrix(1, 3, {1, 2, 3});
  auto [m1, gc1] = mean_and_center(raw1);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(m1(j) == raw1(0, j));
    CHECK(gc1(j, 0) == 0.0);
  }

  // M = 2 with g1 = -g2: mean zero, columns are [g1, -g1]
  nd::Tensor raw2 = nd::Tensor::matrix(2, 2, {3, -1, -3, 1});
  auto [m2, gc2] = mean_and_center(raw2);
  CHECK(m2(0) == 0.0);
  CHECK(m2(1) == 0.0);
  CHECK(gc2(0, 0) == 3.0);
  CHECK(gc2(0, 1) == -3.0);
  CHECK(gc2(1, 0) == -1.0);
  CHECK(gc2(1, 1) == 1.0);
}

TEST_CASE("mean_and_center: (1/M) Gc Gc^T matches the covariance formula") {
  nd::Rng rng(5);
  nd::Tensor raw = rng.normal_tensor({5, 8});
  auto [mean, gc] = mean_and_center(raw);
  nd::Tensor k = nd::matmul(gc, gc, false, true, 1.0 / 5.0);
  // direct summation oracle
  for (std::size_t a = 0; a < 8; ++a) {
    for (std::size_t b = 0; b < 8; ++b) {
      double cov = 0.0;
      for (std::size_t i = 0; i < 5; ++i)
        cov += (raw(i, a) - mean(a)) * (raw(i, b) - mean(b));
      cov /= 5.0;
      CHECK(k(a, b) == doctest::Approx(cov).epsilon(1e-12));
    }
  }
}

TEST_CASE("centering removes one rank: Gc maps the uniform direction to zero") {
  nd::Rng rng(6);
  for (int rep = 0; rep < 5; ++rep) {
    const std::size_t m = 2 + rng.index(6);
    auto [mean, gc] = mean_and_center(rng.normal_tensor({m, 7}));
    (void)mean;
    // ||Gc v|| with v the unit uniform vector bounds the least singular value
    nd::Tensor v({m, 1}, 1.0 / std::sqrt(static_cast<double>(m)));
    CHECK(nd::max_abs(nd::matmul(gc, v)) < 1e-12);
  }
}

TEST_CASE("additive-constant equivariance") {
  nd::Rng rng(7);
  nd::Tensor raw = rng.normal_tensor({4, 6});
  auto [m0, gc0] = mean_and_center(raw);
  nd::Tensor shifted = raw;
  nd::Tensor c = rng.normal_tensor({6});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 6; ++j) shifted(i, j) += c(j);
  auto [m1, gc1] = mean_and_center(shifted);
  for (std::size_t j = 0; j < 6; ++j)
    CHECK(m1(j) == doctest::Approx(m0(j) + c(j)).epsilon(1e-12));
  CHECK(nd::max_abs(nd::sub(gc0, gc1)) < 1e-12);
}

TEST_CASE("lambda_from_trace: floor, hand case, linear scaling") {
  nd::Tensor zero({2, 1});
  CHECK(lambda_from_trace(zero, 0.05) == kLambdaFloor);

  nd::Tensor gc = nd::Tensor::matrix(2, 1, {3, 4});
  CHECK(lambda_from_trace(gc, 0.05) == doctest::Approx(0.625));
  // fraction scales lambda linearly (regression default 1e-4)
  CHECK(lambda_from_trace(gc, 1e-4) ==
        doctest::Approx(0.625 * 1e-4 / 0.05).epsilon(1e-12));
}

TEST_CASE("posterior_at: M=1 collapses to N(g1, lambda I)") {
  nets::EnsembleSpec spec;
  spec.net = nets::MlpSpec{1, {4}, 2};
  spec.members = 1;
  nets::EnsembleWeights ens = init_ensemble(spec, 3);
  nd::Rng rng(4);
  nd::Tensor x = rng.normal_tensor({3, 1});

  gauss::GaussianMeasure q = posterior_at(ens, x, 0.05);
  nd::Tensor g1 = member_forward(ens, 0, x);
  for (std::size_t i = 0; i < q.mean.size(); ++i)
    CHECK(q.mean(i) == doctest::Approx(g1(i)));
  const auto& lr = std::get<gauss::LowRankDiag>(q.cov);
  CHECK(lr.lambda == kLambdaFloor);  // single member has zero spread
  nd::Tensor k = q.dense_cov();
  for (std::size_t i = 0; i < k.rows(); ++i)
    for (std::size_t j = 0; j < k.cols(); ++j)
      CHECK(k(i, j) == (i == j ? lr.lambda : 0.0));
}

TEST_CASE("posterior_at: dense covariance matches the definition and is PD") {
  nets::EnsembleSpec spec;
  spec.net = nets::MlpSpec{2, {8}, 3};
  spec.members = 4;
  nets::EnsembleWeights ens = init_ensemble(spec, 9);
  nd::Rng rng(10);
  nd::Tensor x = rng.normal_tensor({5, 2});

  FunctionBatch b = batch_at(ens, x, 0.05);
  nd::Tensor k = b.measure().dense_cov();
  nd::Tensor manual =
      nd::matmul(b.centered, b.centered, false, true, 1.0 / 4.0);
  for (std::size_t i = 0; i < k.rows(); ++i) manual(i, i) += b.lambda;
  CHECK(nd::max_abs(nd::sub(k, manual)) < 1e-14);

  CHECK_NOTHROW(nd::cholesky(k));  // PD by construction

  // kernel PSD: v^T K v > 0 for random v
  for (int rep = 0; rep < 10; ++rep) {
    nd::Tensor v = rng.normal_tensor({k.rows()});
    CHECK(nd::dot(v, nd::matmul(k, v.reshaped({k.rows(), 1})).reshaped(
                         {k.rows()})) > 0.0);
  }
}

TEST_CASE("sample_functions: collapsed batch returns the mean") {
  FunctionBatch b;
  b.mean = nd::Tensor::vec({1.0, -2.0, 0.5});
  b.centered = nd::Tensor({3, 2});
  b.lambda = kLambdaFloor;
  nd::Rng rng(11);
  nd::Tensor s = sample_functions(b, 50, rng);
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(std::abs(s(i, j) - b.mean(j)) < 1e-3);
}

TEST_CASE("sample_functions: deterministic given the stream") {
  nd::Rng rng_a = nd::Rng::stream(1, 2, 3);
  nd::Rng rng_b = nd::Rng::stream(1, 2, 3);
  FunctionBatch b;
  nd::Rng init(12);
  b.mean = init.normal_tensor({4});
  b.centered = init.normal_tensor({4, 3});
  b.lambda = 0.1;
  nd::Tensor sa = sample_functions(b, 7, rng_a);
  nd::Tensor sb = sample_functions(b, 7, rng_b);
  CHECK(nd::max_abs(nd::sub(sa, sb)) == 0.0);
}

TEST_CASE("sample_functions: empirical moments reproduce (m, K)") {
  nd::Rng init(13);
  FunctionBatch b;
  b.mean = init.normal_tensor({4});
  b.centered = init.normal_tensor({4, 3});
  b.lambda = 0.2;
  nd::Tensor k = b.measure().dense_cov();

  const std::size_t u = 200000;
  nd::Rng rng(14);
  nd::Tensor s = sample_functions(b, u, rng);

  nd::Tensor mean_hat({4});
  for (std::size_t i = 0; i < u; ++i)
    for (std::size_t j = 0; j < 4; ++j) mean_hat(j) += s(i, j);
  for (std::size_t j = 0; j < 4; ++j) mean_hat(j) /= static_cast<double>(u);

  nd::Tensor cov_hat({4, 4});
  for (std::size_t i = 0; i < u; ++i)
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t c = 0; c < 4; ++c)
        cov_hat(a, c) += (s(i, a) - mean_hat(a)) * (s(i, c) - mean_hat(c));
  for (std::size_t i = 0; i < 16; ++i) cov_hat(i) /= static_cast<double>(u);

  // moments within 2% relative Frobenius error
  CHECK(nd::frobenius_norm(nd::sub(cov_hat, k)) / nd::frobenius_norm(k) < 0.02);
  // mean within 3 sigma of the Monte Carlo error
  for (std::size_t j = 0; j < 4; ++j) {
    const double mc_sd = std::sqrt(k(j, j) / static_cast<double>(u));
    CHECK(std::abs(mean_hat(j) - b.mean(j)) < 3.0 * mc_sd);
  }
}

TEST_CASE("taped batch matches the value-level path and lambda is detached") {
  nets::EnsembleSpec spec;
  spec.net = nets::MlpSpec{1, {6}, 2};
  spec.members = 3;
  nets::EnsembleWeights ens = init_ensemble(spec, 21);
  nd::Rng rng(22);
  nd::Tensor x = rng.normal_tensor({4, 1});

  FunctionBatch ref = batch_at(ens, x, 0.05);

  nd::Tape tape;
  nets::TapedEnsemble te = lift(tape, ens);
  auto outs = ensemble_forward(tape, spec, te, tape.constant(x));
  TapedBatch tb = taped_batch(tape, outs, 0.05);
  CHECK(nd::max_abs(nd::sub(tape.value(tb.mean), ref.mean)) < 1e-14);
  CHECK(nd::max_abs(nd::sub(tape.value(tb.centered), ref.centered)) < 1e-14);
  CHECK(tb.lambda == doctest::Approx(ref.lambda));
}

TEST_CASE("taped sampling path: pathwise gradient matches finite differences") {
  nd::Rng init(23);
  nd::Tensor mean_val = init.normal_tensor({3});
  nd::Tensor gc_val = init.normal_tensor({3, 2});
  const double lambda = 0.15;
  const std::size_t u = 4;

  auto eval = [&]() {
    nd::Tape tape;
    TapedBatch b{tape.leaf(mean_val), tape.leaf(gc_val), lambda};
    nd::Rng rng = nd::Rng::stream(9, 0, 0);  // same noise across evaluations
    nd::Var s = sample_functions(tape, b, u, rng);
    nd::Var loss = sum(tape.square(s));
    return tape.value(loss).item();
  };
  auto fd = testutil::finite_diff({&mean_val, &gc_val}, eval, 1e-5);

  nd::Tape tape;
  TapedBatch b{tape.leaf(mean_val), tape.leaf(gc_val), lambda};
  nd::Rng rng = nd::Rng::stream(9, 0, 0);
  nd::Var s = sample_functions(tape, b, u, rng);
  nd::Var loss = sum(tape.square(s));
  tape.backward(loss);
  CHECK(testutil::max_rel_err({tape.grad(b.mean), tape.grad(b.centered)}, fd) <
        1e-5);
}
