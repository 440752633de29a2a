#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace degp::nd {

/// Dense row-major tensor of doubles. Everything the trainer touches is
/// rank 0..2; rank-1 tensors act as column vectors in matmul contexts.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, double fill);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor vec(std::vector<double> v);
  static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> data);
  static Tensor identity(std::size_t n);
  static Tensor zeros_like(const Tensor& t);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Rank <= 2 views: a vector counts as a single column.
  std::size_t rows() const;
  std::size_t cols() const;

  double& operator()(std::size_t i) { return data_[i]; }
  double operator()(std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  /// Value of a one-element tensor.
  double item() const;

  /// Same data, new shape (sizes must agree).
  Tensor reshaped(std::vector<std::size_t> shape) const;

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;

  std::string shape_str() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// ---- value-level arithmetic -------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor hadamard(const Tensor& a, const Tensor& b);

/// C = alpha * op(A) * op(B). Rank-2 operands only.
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false,
              bool trans_b = false, double alpha = 1.0);

/// C += alpha * op(A) * op(B), accumulating into an existing buffer.
void matmul_acc(const Tensor& a, const Tensor& b, Tensor& c, bool trans_a = false,
                bool trans_b = false, double alpha = 1.0);

Tensor transpose(const Tensor& a);
Tensor relu(const Tensor& a);
double sum(const Tensor& a);
double dot(const Tensor& a, const Tensor& b);
double max_abs(const Tensor& a);
double frobenius_norm(const Tensor& a);

/// Column sums of a matrix, as a rank-1 tensor of length cols.
Tensor col_sum(const Tensor& a);

void check_shape(bool ok, const std::string& what);

}  // namespace degp::nd
