#include "degp/tensor.hpp"

#include <cblas.h>

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace degp::nd {

namespace {
std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_product(shape_))
    throw std::invalid_argument("Tensor: data length does not match shape");
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::vec(std::vector<double> v) {
  std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t r, std::size_t c, std::vector<double> data) {
  return Tensor({r, c}, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

Tensor Tensor::zeros_like(const Tensor& t) { return Tensor(t.shape()); }

std::size_t Tensor::rows() const {
  if (rank() == 2) return shape_[0];
  if (rank() == 1) return shape_[0];
  if (rank() == 0) return 1;
  throw std::invalid_argument("Tensor::rows: rank > 2");
}

std::size_t Tensor::cols() const {
  if (rank() == 2) return shape_[1];
  if (rank() <= 1) return 1;
  throw std::invalid_argument("Tensor::cols: rank > 2");
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("Tensor::item: size != 1");
  return data_[0];
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  if (shape_product(shape) != size())
    throw std::invalid_argument("Tensor::reshaped: element count mismatch");
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape_.size(); ++i)
    os << shape_[i] << (i + 1 < shape_.size() ? "," : "");
  os << ")";
  return os.str();
}

void check_shape(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("shape mismatch: " + what);
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_shape(a.same_shape(b), "add " + a.shape_str() + " vs " + b.shape_str());
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out(i) += b(i);
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_shape(a.same_shape(b), "sub " + a.shape_str() + " vs " + b.shape_str());
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out(i) -= b(i);
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out(i) *= c;
  return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  check_shape(a.same_shape(b), "hadamard " + a.shape_str() + " vs " + b.shape_str());
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out(i) *= b(i);
  return out;
}

void matmul_acc(const Tensor& a, const Tensor& b, Tensor& c, bool trans_a,
                bool trans_b, double alpha) {
  check_shape(a.rank() <= 2 && b.rank() <= 2, "matmul operands must be rank <= 2");
  const std::size_t m = trans_a ? a.cols() : a.rows();
  const std::size_t k = trans_a ? a.rows() : a.cols();
  const std::size_t kb = trans_b ? b.cols() : b.rows();
  const std::size_t n = trans_b ? b.rows() : b.cols();
  check_shape(k == kb, "matmul inner " + a.shape_str() + " x " + b.shape_str());
  check_shape(c.rows() == m && c.cols() == n, "matmul output buffer");
  if (m == 0 || n == 0) return;
  if (k == 0) return;  // product is zero; buffer untouched (C += 0)
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m),
              static_cast<int>(n), static_cast<int>(k), alpha, a.data(),
              static_cast<int>(a.cols()), b.data(), static_cast<int>(b.cols()),
              1.0, c.data(), static_cast<int>(n));
}

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b,
              double alpha) {
  const std::size_t m = trans_a ? a.cols() : a.rows();
  const std::size_t n = trans_b ? b.rows() : b.cols();
  Tensor c({m, n});
  matmul_acc(a, b, c, trans_a, trans_b, alpha);
  return c;
}

Tensor transpose(const Tensor& a) {
  check_shape(a.rank() == 2, "transpose needs rank 2");
  Tensor out({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Tensor relu(const Tensor& a) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out(i) < 0.0) out(i) = 0.0;
  return out;
}

double sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.flat()) s += v;
  return s;
}

double dot(const Tensor& a, const Tensor& b) {
  check_shape(a.size() == b.size(), "dot");
  return cblas_ddot(static_cast<int>(a.size()), a.data(), 1, b.data(), 1);
}

double max_abs(const Tensor& a) {
  double m = 0.0;
  for (double v : a.flat()) m = std::max(m, std::abs(v));
  return m;
}

double frobenius_norm(const Tensor& a) { return std::sqrt(dot(a, a)); }

Tensor col_sum(const Tensor& a) {
  Tensor out({a.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j) += a(i, j);
  return out;
}

}  // namespace degp::nd
