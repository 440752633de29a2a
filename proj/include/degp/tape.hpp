#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "degp/tensor.hpp"

namespace degp::nd {

class Tape;

/// Handle to a node on a tape. Cheap to copy; owns nothing.
struct Var {
  Tape* tape = nullptr;
  std::int32_t id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

/// Reverse-mode tape at matrix-operation granularity. Nodes are recorded in
/// topological order by construction; backward visits them exactly once in
/// reverse. One training step owns one tape (single-threaded).
class Tape {
 public:
  /// Differentiable input.
  Var leaf(Tensor v);
  /// Non-differentiable input; ops on constants fold to constants.
  Var constant(Tensor v);

  const Tensor& value(Var v) const;
  std::size_t node_count() const { return nodes_.size(); }

  // -- primitives -------------------------------------------------------
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  /// a[m x n] + row vector b[n], broadcast over rows.
  Var add_rowvec(Var a, Var b);
  /// a[m x n] .* row vector b[n], broadcast over rows.
  Var mul_rowvec(Var a, Var b);
  Var scale(Var a, double c);
  /// Elementwise product of a with a one-element node s.
  Var scale_by(Var a, Var s);
  Var hadamard(Var a, Var b);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var reshape(Var a, std::vector<std::size_t> shape);
  Var relu(Var a);
  Var square(Var a);
  Var exp(Var a);
  Var log(Var a);
  /// Sum of all elements, as a rank-0 node.
  Var sum(Var a);
  /// sum(a .* b) fused, as a rank-0 node.
  Var dot(Var a, Var b);
  /// Rowwise log softmax of a[m x C].
  Var log_softmax_rows(Var a);
  Var slice_cols(Var a, std::size_t c0, std::size_t c1);
  Var slice_rows(Var a, std::size_t r0, std::size_t r1);
  Var concat_cols(const std::vector<Var>& parts);
  Var concat_rows(const std::vector<Var>& parts);
  /// out[i] = a(i, idx[i]) as a column vector.
  Var gather_cols(Var a, std::vector<std::size_t> idx);
  /// (B^{-1} (x) I_c) v for v[n*c x k], given the Cholesky factor of B.
  /// B carries no gradient; v does.
  Var kron_solve(Tensor base_chol, std::size_t c, Var v);
  /// logdet((1/M) Gc Gc^T + lambda I) with closed-form adjoint w.r.t. Gc.
  Var lowrank_logdet(Var gc, double lambda);

  /// Reverse pass from a rank-0/one-element output.
  void backward(Var output);

  /// Adjoint of a node after backward(); zeros if the node was not reached.
  Tensor grad(Var v) const;

 private:
  struct Node {
    Tensor value;
    bool needs_grad = false;
    std::vector<std::int32_t> parents;
    // Pulls this node's adjoint into its parents' adjoints.
    std::function<void(Tape&, std::int32_t)> pull;
  };

  Var record(Tensor value, std::vector<std::int32_t> parents,
             std::function<void(Tape&, std::int32_t)> pull);
  bool any_needs_grad(const std::vector<std::int32_t>& parents) const;
  const Tensor& adjoint(std::int32_t id) const { return adjoints_[id]; }
  Tensor& adjoint_buffer(std::int32_t id);
  void accum(std::int32_t id, const Tensor& delta);

  std::vector<Node> nodes_;
  std::vector<Tensor> adjoints_;
};

// Ergonomic wrappers; all operands must live on the same tape.
inline Var operator+(Var a, Var b) { return a.tape->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape->sub(a, b); }
inline Var operator*(double c, Var a) { return a.tape->scale(a, c); }
inline Var matmul(Var a, Var b) { return a.tape->matmul(a, b); }
inline Var sum(Var a) { return a.tape->sum(a); }
inline Var dot(Var a, Var b) { return a.tape->dot(a, b); }

}  // namespace degp::nd
