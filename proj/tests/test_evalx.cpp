#include <doctest.h>

#include <cmath>

#include "degp/metrics.hpp"
#include "degp/predictive.hpp"
#include "degp/rng.hpp"

using namespace degp;
using namespace degp::eval;

TEST_CASE("posterior predictive: identical samples equal one likelihood pass") {
  nd::Rng rng(1);
  nd::Tensor f = rng.normal_tensor({5, 3});
  std::vector<nd::Tensor> fs{f, f, f};
  PredictiveSummary p = classification_predictive(fs, 1.0);
  nd::Tensor single = softmax_rows(f, 1.0);
  CHECK(nd::max_abs(nd::sub(p.mean, single)) < 1e-14);
  for (std::size_t i = 0; i < 5; ++i) CHECK(p.epistemic(i) == 0.0);

  // regression flavor: all mass at one function, variance = noise only
  nd::Tensor g = rng.normal_tensor({4, 1});
  PredictiveSummary r = regression_predictive({g, g}, 0.3);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(r.mean(i) == doctest::Approx(g(i, 0)));
    CHECK(r.variance(i) == doctest::Approx(0.3));
  }
}

TEST_CASE("posterior predictive: mirrored logits average to one half") {
  const double a = 2.3;
  nd::Tensor f1 = nd::Tensor::matrix(1, 2, {a, -a});
  nd::Tensor f2 = nd::Tensor::matrix(1, 2, {-a, a});
  PredictiveSummary p = classification_predictive({f1, f2}, 1.0);
  CHECK(p.mean(0, 0) == doctest::Approx(0.5));
  CHECK(p.mean(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("posterior predictive rows stay on the simplex") {
  nd::Rng rng(2);
  std::vector<nd::Tensor> fs;
  for (int s = 0; s < 7; ++s) fs.push_back(rng.normal_tensor({6, 4}));
  PredictiveSummary p = classification_predictive(fs, 0.7);
  for (std::size_t i = 0; i < 6; ++i) {
    double rowsum = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(p.mean(i, j) >= 0.0);
      rowsum += p.mean(i, j);
    }
    CHECK(std::abs(rowsum - 1.0) < 1e-8);
  }
}

TEST_CASE("regression mixture variance is spread of means plus noise") {
  // point-mass member predictions at -1 and +1: Var(means) = 1
  nd::Tensor f1 = nd::Tensor::matrix(1, 1, {-1.0});
  nd::Tensor f2 = nd::Tensor::matrix(1, 1, {1.0});
  PredictiveSummary p = regression_predictive({f1, f2}, 0.25);
  CHECK(p.mean(0) == doctest::Approx(0.0));
  CHECK(p.variance(0) == doctest::Approx(1.0 + 0.25));
  CHECK(p.epistemic(0) == doctest::Approx(1.0));
}

TEST_CASE("mutual information: closed forms") {
  nd::Tensor same = nd::Tensor::matrix(2, 3, {0.2, 0.5, 0.3, 0.2, 0.5, 0.3});
  nd::Tensor mi0 = mutual_info({same, same, same});
  CHECK(mi0(0) == doctest::Approx(0.0));
  CHECK(mi0(1) == doctest::Approx(0.0));

  // two one-hot rows: H(1/2,1/2) - 0 = log 2
  nd::Tensor h1 = nd::Tensor::matrix(1, 2, {1.0, 0.0});
  nd::Tensor h2 = nd::Tensor::matrix(1, 2, {0.0, 1.0});
  nd::Tensor mi = mutual_info({h1, h2});
  CHECK(mi(0) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("mutual information: direct entropy arithmetic oracle") {
  nd::Rng rng(3);
  // 4 samples of 1x3 simplex rows
  std::vector<nd::Tensor> ps;
  for (int s = 0; s < 4; ++s) {
    nd::Tensor p({1, 3});
    double z = 0.0;
    for (int j = 0; j < 3; ++j) {
      p(0, j) = rng.uniform(0.05, 1.0);
      z += p(0, j);
    }
    for (int j = 0; j < 3; ++j) p(0, j) /= z;
    ps.push_back(p);
  }
  nd::Tensor got = mutual_info(ps);

  double mean[3] = {0, 0, 0};
  for (const auto& p : ps)
    for (int j = 0; j < 3; ++j) mean[j] += p(0, j) / 4.0;
  auto ent = [](const double* p, int c) {
    double h = 0.0;
    for (int j = 0; j < c; ++j)
      if (p[j] > 0) h -= p[j] * std::log(p[j]);
    return h;
  };
  double mean_h = 0.0;
  for (const auto& p : ps) {
    double row[3] = {p(0, 0), p(0, 1), p(0, 2)};
    mean_h += ent(row, 3) / 4.0;
  }
  const double want = ent(mean, 3) - mean_h;
  CHECK(std::abs(got(0) - want) < 1e-12);

  // Jensen bounds
  CHECK(got(0) >= 0.0);
  CHECK(got(0) <= ent(mean, 3));
}

TEST_CASE("error_vs_uncertainty: full threshold recovers the error rate") {
  std::vector<int> wrong{1, 0, 0, 1, 0};
  nd::Tensor u = nd::Tensor::vec({0.9, 0.1, 0.2, 0.8, 0.3});
  auto curve = error_vs_uncertainty(wrong, u, {1.0});
  REQUIRE(curve.size() == 1);
  CHECK(curve[0].count == 5);
  CHECK(*curve[0].error == doctest::Approx(0.4));
}

TEST_CASE("error_vs_uncertainty: well-ranked uncertainty gives a monotone curve") {
  // errors concentrated at high uncertainty
  std::vector<int> wrong{0, 0, 0, 0, 1, 1};
  nd::Tensor u = nd::Tensor::vec({0.1, 0.2, 0.3, 0.4, 0.9, 1.0});
  std::vector<double> taus;
  for (int i = 0; i <= 10; ++i) taus.push_back(i / 10.0);
  auto curve = error_vs_uncertainty(wrong, u, taus);
  double prev = 0.0;
  for (const auto& pt : curve) {
    if (!pt.error) continue;
    CHECK(*pt.error >= prev - 1e-12);
    prev = *pt.error;
  }
}

TEST_CASE("error_vs_uncertainty: positive rescaling leaves the curve unchanged") {
  nd::Rng rng(4);
  std::vector<int> wrong;
  nd::Tensor u({20});
  for (int i = 0; i < 20; ++i) {
    wrong.push_back(rng.uniform() < 0.3 ? 1 : 0);
    u(i) = rng.uniform(0.0, 5.0);
  }
  std::vector<double> taus{0.2, 0.5, 0.8, 1.0};
  auto c1 = error_vs_uncertainty(wrong, u, taus);
  auto c2 = error_vs_uncertainty(wrong, nd::scale(u, 37.0), taus);
  for (std::size_t i = 0; i < taus.size(); ++i) {
    CHECK(c1[i].count == c2[i].count);
    if (c1[i].error) CHECK(*c1[i].error == doctest::Approx(*c2[i].error));
  }
}

TEST_CASE("error_vs_uncertainty: empty buckets are absent, not zero") {
  std::vector<int> wrong{1, 1};
  nd::Tensor u = nd::Tensor::vec({0.9, 1.0});
  auto curve = error_vs_uncertainty(wrong, u, {0.1, 1.0});
  CHECK(!curve[0].error.has_value());
  CHECK(curve[0].count == 0);
  CHECK(*curve[1].error == doctest::Approx(1.0));
}

TEST_CASE("metrics: calibrated and saturated cases") {
  // all predictions confidence 1.0 and correct: ECE 0, NLL 0
  nd::Tensor certain = nd::Tensor::matrix(3, 2, {1, 0, 1, 0, 0, 1});
  ClassificationMetrics m1 =
      classification_metrics(certain, {0, 0, 1});
  CHECK(m1.ece == doctest::Approx(0.0));
  CHECK(m1.nll == doctest::Approx(0.0));
  CHECK(m1.accuracy == doctest::Approx(1.0));

  // perfectly calibrated two-bin hand case: confidence 0.75 with 75% accuracy
  nd::Tensor p({4, 2});
  for (int i = 0; i < 4; ++i) {
    p(i, 0) = 0.75;
    p(i, 1) = 0.25;
  }
  ClassificationMetrics m2 = classification_metrics(p, {0, 0, 0, 1});
  CHECK(m2.ece == doctest::Approx(0.0));
  CHECK(m2.accuracy == doctest::Approx(0.75));
}

TEST_CASE("metrics: 4-point hand-built ECE arithmetic") {
  // bins of width 1/15: confidences 0.6 (bin 9) and 0.9 (bin 13)
  nd::Tensor p = nd::Tensor::matrix(4, 2, {0.6, 0.4,   //
                                           0.6, 0.4,   //
                                           0.9, 0.1,   //
                                           0.9, 0.1});
  // first 0.6 correct, second wrong; both 0.9 correct
  ClassificationMetrics m = classification_metrics(p, {0, 1, 0, 0});
  // bin(0.6): acc 0.5, conf 0.6, weight 1/2; bin(0.9): acc 1.0, conf 0.9, w 1/2
  const double want = 0.5 * std::abs(0.5 - 0.6) + 0.5 * std::abs(1.0 - 0.9);
  CHECK(m.ece == doctest::Approx(want).epsilon(1e-12));
  CHECK(m.accuracy == doctest::Approx(0.75));
  const double want_nll =
      -(std::log(0.6) + std::log(0.4) + 2.0 * std::log(0.9)) / 4.0;
  CHECK(m.nll == doctest::Approx(want_nll).epsilon(1e-12));
}

TEST_CASE("rmse and regression mixture nll") {
  nd::Tensor mean = nd::Tensor::vec({1.0, 2.0});
  nd::Tensor y = nd::Tensor::vec({1.5, 1.5});
  CHECK(rmse(mean, y) == doctest::Approx(0.5));

  // single sample: mixture NLL reduces to the gaussian closed form
  nd::Tensor f = nd::Tensor::matrix(2, 1, {1.0, 2.0});
  const double noise = 0.4;
  const double got = regression_nll({f}, y, noise);
  double want = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double d = y(i) - f(i, 0);
    want += 0.5 * std::log(2.0 * M_PI * noise) + d * d / (2.0 * noise);
  }
  CHECK(got == doctest::Approx(want / 2.0).epsilon(1e-12));
}

TEST_CASE("normalize_epistemic maps the pool into [0,1]") {
  PredictiveSummary a, b;
  a.epistemic = nd::Tensor::vec({0.5, 2.0});
  b.epistemic = nd::Tensor::vec({4.0, 1.0});
  normalize_epistemic({&a, &b});
  CHECK(a.epistemic_norm(1) == doctest::Approx(0.5));
  CHECK(b.epistemic_norm(0) == doctest::Approx(1.0));
  for (auto* s : {&a, &b})
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(s->epistemic_norm(i) >= 0.0);
      CHECK(s->epistemic_norm(i) <= 1.0);
    }
}

TEST_CASE("gp function samples have the right shapes and are seeded") {
  nets::EnsembleSpec spec;
  spec.net = nets::MlpSpec{1, {6}, 2};
  spec.members = 3;
  nets::EnsembleWeights ens = init_ensemble(spec, 5);
  nd::Rng rng(6);
  nd::Tensor x = rng.normal_tensor({4, 1});

  nd::Rng sa = nd::Rng::stream(1, 0, 7);
  nd::Rng sb = nd::Rng::stream(1, 0, 7);
  auto fa = gp_function_samples(ens, x, 0.05, 5, sa);
  auto fb = gp_function_samples(ens, x, 0.05, 5, sb);
  REQUIRE(fa.size() == 5);
  CHECK(fa[0].rows() == 4);
  CHECK(fa[0].cols() == 2);
  for (std::size_t s = 0; s < 5; ++s)
    CHECK(nd::max_abs(nd::sub(fa[s], fb[s])) == 0.0);
}
