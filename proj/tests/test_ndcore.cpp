#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "degp/linalg.hpp"
#include "degp/rng.hpp"
#include "degp/tape.hpp"
#include "degp/tensor.hpp"
#include "fd_oracle.hpp"

using namespace degp::nd;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  return rng.normal_tensor({r, c});
}

// Random SPD matrix L L^T with positive diagonal on L.
Tensor random_spd(std::size_t n, Rng& rng) {
  Tensor l({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) l(i, j) = 0.3 * rng.normal();
    l(i, i) = 0.5 + rng.uniform();
  }
  return matmul(l, l, false, true);
}

double dense_logdet_lowrank(const Tensor& gc, double lambda) {
  const std::size_t d = gc.rows();
  Tensor k = matmul(gc, gc, false, true, 1.0 / static_cast<double>(gc.cols()));
  for (std::size_t i = 0; i < d; ++i) k(i, i) += lambda;
  return logdet_psd(k);
}

}  // namespace

TEST_CASE("tensor basics and forward primitives") {
  Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4});
  Tensor id = Tensor::identity(2);
  Tensor prod = matmul(a, id);
  for (std::size_t i = 0; i < 4; ++i) CHECK(prod(i) == a(i));

  Tensor r = relu(Tensor::vec({-1, 0, 2}));
  CHECK(r(0) == 0.0);
  CHECK(r(1) == 0.0);
  CHECK(r(2) == 2.0);

  Tensor x = Tensor::vec({3, 4});
  CHECK(sum(hadamard(x, x)) == doctest::Approx(25.0));

  CHECK_THROWS_AS(matmul(Tensor::matrix(2, 3, std::vector<double>(6)),
                         Tensor::matrix(2, 2, std::vector<double>(4))),
                  std::invalid_argument);
  CHECK_THROWS_AS(add(Tensor::vec({1}), Tensor::vec({1, 2})),
                  std::invalid_argument);
}

TEST_CASE("backward: simple closed forms") {
  Tape tape;
  Var x = tape.leaf(Tensor::vec({3, 4}));
  Var loss = sum(tape.square(x));
  CHECK(tape.value(loss).item() == doctest::Approx(25.0));
  tape.backward(loss);
  Tensor g = tape.grad(x);
  CHECK(g(0) == doctest::Approx(6.0));
  CHECK(g(1) == doctest::Approx(8.0));
}

TEST_CASE("backward: gradient of constant is zero") {
  Tape tape;
  Var c = tape.constant(Tensor::vec({1, 2, 3}));
  Var x = tape.leaf(Tensor::vec({1, 2, 3}));
  Var loss = sum(tape.hadamard(c, x));
  tape.backward(loss);
  Tensor gc = tape.grad(c);
  for (std::size_t i = 0; i < gc.size(); ++i) CHECK(gc(i) == 0.0);
}

TEST_CASE("backward: non-scalar output rejected") {
  Tape tape;
  Var x = tape.leaf(Tensor::vec({1, 2}));
  Var y = tape.square(x);
  CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
}

TEST_CASE("backward: matmul trace composite vs finite differences") {
  Rng rng(7);
  Tensor w_val = random_matrix(3, 4, rng);
  Tensor x_val = random_matrix(4, 3, rng);

  auto eval = [&]() {
    // tr-like composite: sum(square(W X))
    Tensor prod = matmul(w_val, x_val);
    return sum(hadamard(prod, prod));
  };
  auto fd = testutil::finite_diff({&w_val, &x_val}, eval, 1e-5);

  Tape tape;
  Var w = tape.leaf(w_val);
  Var x = tape.leaf(x_val);
  Var loss = sum(tape.square(matmul(w, x)));
  tape.backward(loss);

  CHECK(testutil::max_rel_err({tape.grad(w), tape.grad(x)}, fd) < 1e-6);
}

TEST_CASE("backward: every primitive matches finite differences") {
  Rng rng(11);
  // a, b generic operands; p strictly positive for log; s scalar
  Tensor a_val = random_matrix(3, 4, rng);
  Tensor b_val = random_matrix(3, 4, rng);
  Tensor c_val = random_matrix(4, 2, rng);
  Tensor v_val = rng.normal_tensor({4});
  Tensor p_val = rng.uniform_tensor({3, 4}, 0.5, 2.0);
  Tensor s_val = Tensor::scalar(0.7 + rng.uniform());
  // keep relu inputs away from the kink
  for (std::size_t i = 0; i < a_val.size(); ++i)
    if (std::abs(a_val(i)) < 0.05) a_val(i) += 0.2;

  auto build = [&](Tape& tape, Var a, Var b, Var c, Var v, Var p, Var s) {
    Var t1 = sum(tape.square(matmul(tape.relu(a) + b, c)));
    Var t2 = sum(tape.log(p)) + sum(tape.exp(tape.scale(b, 0.3)));
    Var t3 = sum(tape.hadamard(a, b)) + dot(a, b);
    Var t4 = sum(tape.log_softmax_rows(tape.add_rowvec(a, v)));
    Var t5 = sum(tape.slice_cols(tape.concat_cols({a, b}), 2, 6));
    Var t6 = sum(tape.slice_rows(tape.concat_rows({a, b}), 1, 4));
    Var t7 = sum(tape.scale_by(tape.transpose(a), s));
    Var t8 = sum(tape.gather_cols(b, {1, 0, 3}));
    Var t9 = sum(tape.square(tape.reshape(c, {2, 4})));
    return t1 + t2 + t3 + t4 + t5 + (t6 + t7) + (t8 + t9);
  };

  auto eval = [&]() {
    Tape tape;
    Var loss = build(tape, tape.leaf(a_val), tape.leaf(b_val), tape.leaf(c_val),
                     tape.leaf(v_val), tape.leaf(p_val), tape.leaf(s_val));
    return tape.value(loss).item();
  };
  auto fd = testutil::finite_diff(
      {&a_val, &b_val, &c_val, &v_val, &p_val, &s_val}, eval, 1e-5);

  Tape tape;
  Var a = tape.leaf(a_val), b = tape.leaf(b_val), c = tape.leaf(c_val);
  Var v = tape.leaf(v_val), p = tape.leaf(p_val), s = tape.leaf(s_val);
  Var loss = build(tape, a, b, c, v, p, s);
  tape.backward(loss);
  auto got = {tape.grad(a), tape.grad(b), tape.grad(c),
              tape.grad(v), tape.grad(p), tape.grad(s)};
  CHECK(testutil::max_rel_err(got, fd) < 1e-5);
}

TEST_CASE("backward: kron_solve and lowrank_logdet match finite differences") {
  Rng rng(13);
  const std::size_t n = 4, c = 2, m = 3;
  Tensor base = random_spd(n, rng);
  Tensor base_chol = cholesky(base);
  Tensor gc_val = random_matrix(n * c, m, rng);
  const double lambda = 0.37;

  auto eval = [&]() {
    Tape tape;
    Var gc = tape.leaf(gc_val);
    Var solved = tape.kron_solve(base_chol, c, gc);
    Var loss = dot(gc, solved) + tape.lowrank_logdet(gc, lambda);
    return tape.value(loss).item();
  };
  auto fd = testutil::finite_diff({&gc_val}, eval, 1e-5);

  Tape tape;
  Var gc = tape.leaf(gc_val);
  Var solved = tape.kron_solve(base_chol, c, gc);
  Var loss = dot(gc, solved) + tape.lowrank_logdet(gc, lambda);
  tape.backward(loss);
  CHECK(testutil::max_rel_err({tape.grad(gc)}, fd) < 1e-5);
}

TEST_CASE("cholesky: identity and small fixed case") {
  Tensor id3 = Tensor::identity(3);
  Tensor l = cholesky(id3);
  for (std::size_t i = 0; i < 9; ++i) CHECK(l(i) == doctest::Approx(id3(i)));

  Tensor a = Tensor::matrix(2, 2, {4, 2, 2, 3});
  Tensor la = cholesky(a);
  Tensor rec = matmul(la, la, false, true);
  CHECK(max_abs(sub(rec, a)) < 1e-12);
}

TEST_CASE("cholesky: indefinite matrix reports failing pivot") {
  Tensor a = Tensor::matrix(2, 2, {1, 2, 2, 1});  // eigenvalues 3, -1
  CHECK_THROWS_AS(cholesky(a), NotPositiveDefinite);
  try {
    cholesky(a);
  } catch (const NotPositiveDefinite& e) {
    CHECK(e.index == 1);
  }
}

TEST_CASE("cholesky: random round trips") {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 1 + rng.index(10);
    Tensor a = random_spd(n, rng);
    Tensor l = cholesky(a);
    Tensor rec = matmul(l, l, false, true);
    CHECK(max_abs(sub(rec, a)) < 1e-10 * std::max(1.0, max_abs(a)));
  }
}

TEST_CASE("triangular and cholesky solves") {
  Rng rng(5);
  Tensor a = random_spd(6, rng);
  Tensor l = cholesky(a);
  Tensor b = random_matrix(6, 2, rng);
  Tensor x = chol_solve(l, b);
  CHECK(max_abs(sub(matmul(a, x), b)) < 1e-9);

  // trace_inverse against a brute-force inverse
  Tensor inv = chol_solve(l, Tensor::identity(6));
  double tr = 0.0;
  for (std::size_t i = 0; i < 6; ++i) tr += inv(i, i);
  CHECK(trace_inverse(l) == doctest::Approx(tr).epsilon(1e-10));
}

TEST_CASE("lowrank_logdet: pure jitter case") {
  Tensor gc({4, 2});  // zeros
  CHECK(lowrank_logdet(gc, 0.5) == doctest::Approx(4.0 * std::log(0.5)));
  CHECK_THROWS_AS(lowrank_logdet(gc, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(lowrank_logdet(gc, -1.0), std::invalid_argument);
}

TEST_CASE("lowrank_logdet: equals dense log-determinant") {
  Rng rng(17);
  Tensor gc = random_matrix(12, 3, rng);
  const double got = lowrank_logdet(gc, 0.1);
  const double want = dense_logdet_lowrank(gc, 0.1);
  CHECK(std::abs(got - want) / std::abs(want) < 1e-9);

  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t d = 1 + rng.index(32);
    const std::size_t m = 1 + rng.index(8);
    const double lambda = std::pow(10.0, rng.uniform(-4.0, 0.0));
    Tensor g = random_matrix(d, m, rng);
    const double lr = lowrank_logdet(g, lambda);
    const double dn = dense_logdet_lowrank(g, lambda);
    CHECK(std::abs(lr - dn) <= 1e-9 * std::max(1.0, std::abs(dn)));
  }
}

TEST_CASE("rng streams are deterministic and disjoint") {
  Rng a = Rng::stream(42, 3, 1);
  Rng b = Rng::stream(42, 3, 1);
  Rng c = Rng::stream(42, 4, 1);
  for (int i = 0; i < 10; ++i) {
    const auto av = a.next_u64();
    CHECK(av == b.next_u64());
    CHECK(av != c.next_u64());
  }
}

TEST_CASE("rng normal moments") {
  Rng rng(123);
  const int n = 200000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s1 += x;
    s2 += x * x;
  }
  CHECK(std::abs(s1 / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}
