#include "degp/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "degp/linalg.hpp"

namespace degp::nd {

namespace {
void check_same_tape(Var a, Var b) {
  if (a.tape != b.tape)
    throw std::invalid_argument("tape op: operands on different tapes");
}
}  // namespace

Var Tape::record(Tensor value, std::vector<std::int32_t> parents,
                 std::function<void(Tape&, std::int32_t)> pull) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = any_needs_grad(parents);
  if (n.needs_grad) {
    n.parents = std::move(parents);
    n.pull = std::move(pull);
  }
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

bool Tape::any_needs_grad(const std::vector<std::int32_t>& parents) const {
  for (std::int32_t p : parents)
    if (nodes_[p].needs_grad) return true;
  return false;
}

Var Tape::leaf(Tensor v) {
  Node n;
  n.value = std::move(v);
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::constant(Tensor v) {
  Node n;
  n.value = std::move(v);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

const Tensor& Tape::value(Var v) const { return nodes_.at(v.id).value; }

Tensor& Tape::adjoint_buffer(std::int32_t id) {
  if (adjoints_[id].empty()) adjoints_[id] = Tensor(nodes_[id].value.shape());
  return adjoints_[id];
}

void Tape::accum(std::int32_t id, const Tensor& delta) {
  if (!nodes_[id].needs_grad) return;
  Tensor& buf = adjoint_buffer(id);
  for (std::size_t i = 0; i < buf.size(); ++i) buf(i) += delta(i);
}

Var Tape::add(Var a, Var b) {
  check_same_tape(a, b);
  return record(nd::add(value(a), value(b)), {a.id, b.id},
                [a = a.id, b = b.id](Tape& t, std::int32_t self) {
                  t.accum(a, t.adjoint(self));
                  t.accum(b, t.adjoint(self));
                });
}

Var Tape::sub(Var a, Var b) {
  check_same_tape(a, b);
  return record(nd::sub(value(a), value(b)), {a.id, b.id},
                [a = a.id, b = b.id](Tape& t, std::int32_t self) {
                  t.accum(a, t.adjoint(self));
                  t.accum(b, nd::scale(t.adjoint(self), -1.0));
                });
}

Var Tape::add_rowvec(Var a, Var b) {
  check_same_tape(a, b);
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  check_shape(bv.size() == av.cols(), "add_rowvec");
  Tensor out = av;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += bv(j);
  return record(std::move(out), {a.id, b.id},
                [a = a.id, b = b.id](Tape& t, std::int32_t self) {
                  const Tensor& ybar = t.adjoint(self);
                  t.accum(a, ybar);
                  t.accum(b, col_sum(ybar));
                });
}

Var Tape::mul_rowvec(Var a, Var b) {
  check_same_tape(a, b);
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  check_shape(bv.size() == av.cols(), "mul_rowvec");
  Tensor out = av;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) *= bv(j);
  return record(std::move(out), {a.id, b.id},
                [a = a.id, b = b.id](Tape& t, std::int32_t self) {
                  const Tensor& ybar = t.adjoint(self);
                  const Tensor& av = t.nodes_[a].value;
                  const Tensor& bv = t.nodes_[b].value;
                  if (t.nodes_[a].needs_grad) {
                    Tensor d = ybar;
                    for (std::size_t i = 0; i < d.rows(); ++i)
                      for (std::size_t j = 0; j < d.cols(); ++j) d(i, j) *= bv(j);
                    t.accum(a, d);
                  }
                  if (t.nodes_[b].needs_grad) {
                    Tensor d({bv.size()});
                    for (std::size_t i = 0; i < av.rows(); ++i)
                      for (std::size_t j = 0; j < av.cols(); ++j)
                        d(j) += ybar(i, j) * av(i, j);
                    t.accum(b, d);
                  }
                });
}

Var Tape::scale(Var a, double c) {
  return record(nd::scale(value(a), c), {a.id},
                [a = a.id, c](Tape& t, std::int32_t self) {
                  t.accum(a, nd::scale(t.adjoint(self), c));
                });
}

Var Tape::scale_by(Var a, Var s) {
  check_same_tape(a, s);
  const double sv = value(s).item();
  return record(nd::scale(value(a), sv), {a.id, s.id},
                [a = a.id, s = s.id, sv](Tape& t, std::int32_t self) {
                  const Tensor& ybar = t.adjoint(self);
                  t.accum(a, nd::scale(ybar, sv));
                  t.accum(s, Tensor::scalar(nd::dot(ybar, t.nodes_[a].value)));
                });
}

Var Tape::hadamard(Var a, Var b) {
  check_same_tape(a, b);
  return record(nd::hadamard(value(a), value(b)), {a.id, b.id},
                [a = a.id, b = b.id](Tape& t, std::int32_t self) {
                  const Tensor& ybar = t.adjoint(self);
                  t.accum(a, nd::hadamard(ybar, t.nodes_[b].value));
                  t.accum(b, nd::hadamard(ybar, t.nodes_[a].value));
                });
}

Var Tape::matmul(Var a, Var b) {
  check_same_tape(a, b);
  return record(
      nd::matmul(value(a), value(b)), {a.id, b.id},
      [a = a.id, b = b.id](Tape& t, std::int32_t self) {
        const Tensor& ybar = t.adjoint(self);
        if (t.nodes_[a].needs_grad)
          matmul_acc(ybar, t.nodes_[b].value, t.adjoint_buffer(a), false, true);
        if (t.nodes_[b].needs_grad)
          matmul_acc(t.nodes_[a].value, ybar, t.adjoint_buffer(b), true, false);
      });
}

Var Tape::transpose(Var a) {
  return record(nd::transpose(value(a)), {a.id},
                [a = a.id](Tape& t, std::int32_t self) {
                  t.accum(a, nd::transpose(t.adjoint(self)));
                });
}

Var Tape::reshape(Var a, std::vector<std::size_t> shape) {
  auto old_shape = value(a).shape();
  return record(value(a).reshaped(std::move(shape)), {a.id},
                [a = a.id, old_shape](Tape& t, std::int32_t self) {
                  t.accum(a, t.adjoint(self).reshaped(old_shape));
                });
}

Var Tape::relu(Var a) {
  return record(nd::relu(value(a)), {a.id},
                [a = a.id](Tape& t, std::int32_t self) {
                  const Tensor& av = t.nodes_[a].value;
                  Tensor d = t.adjoint(self);
                  for (std::size_t i = 0; i < d.size(); ++i)
                    if (av(i) <= 0.0) d(i) = 0.0;
                  t.accum(a, d);
                });
}

Var Tape::square(Var a) {
  return record(nd::hadamard(value(a), value(a)), {a.id},
                [a = a.id](Tape& t, std::int32_t self) {
                  t.accum(a, nd::scale(nd::hadamard(t.adjoint(self),
                                                    t.nodes_[a].value),
                                       2.0));
                });
}

Var Tape::exp(Var a) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out(i) = std::exp(out(i));
  return record(std::move(out), {a.id},
                [a = a.id](Tape& t, std::int32_t self) {
                  t.accum(a, nd::hadamard(t.adjoint(self), t.nodes_[self].value));
                });
}

Var Tape::log(Var a) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out(i) = std::log(out(i));
  return record(std::move(out), {a.id},
                [a = a.id](Tape& t, std::int32_t self) {
                  const Tensor& av = t.nodes_[a].value;
                  Tensor d = t.adjoint(self);
                  for (std::size_t i = 0; i < d.size(); ++i) d(i) /= av(i);
                  t.accum(a, d);
                });
}

Var Tape::sum(Var a) {
  return record(Tensor::scalar(nd::sum(value(a))), {a.id},
                [a = a.id](Tape& t, std::int32_t self) {
                  const double ybar = t.adjoint(self).item();
                  t.accum(a, Tensor(t.nodes_[a].value.shape(), ybar));
                });
}

Var Tape::dot(Var a, Var b) {
  check_same_tape(a, b);
  return record(Tensor::scalar(nd::dot(value(a), value(b))), {a.id, b.id},
                [a = a.id, b = b.id](Tape& t, std::int32_t self) {
                  const double ybar = t.adjoint(self).item();
                  t.accum(a, nd::scale(t.nodes_[b].value, ybar));
                  t.accum(b, nd::scale(t.nodes_[a].value, ybar));
                });
}

Var Tape::log_softmax_rows(Var a) {
  const Tensor& av = value(a);
  check_shape(av.rank() == 2, "log_softmax_rows needs a matrix");
  Tensor out = av;
  for (std::size_t i = 0; i < av.rows(); ++i) {
    double mx = av(i, 0);
    for (std::size_t j = 1; j < av.cols(); ++j) mx = std::max(mx, av(i, j));
    double lse = 0.0;
    for (std::size_t j = 0; j < av.cols(); ++j) lse += std::exp(av(i, j) - mx);
    lse = mx + std::log(lse);
    for (std::size_t j = 0; j < av.cols(); ++j) out(i, j) -= lse;
  }
  return record(std::move(out), {a.id},
                [a = a.id](Tape& t, std::int32_t self) {
                  // d/da = ybar - softmax(a) * rowsum(ybar); softmax = exp(value)
                  const Tensor& y = t.nodes_[self].value;
                  const Tensor& ybar = t.adjoint(self);
                  Tensor d = ybar;
                  for (std::size_t i = 0; i < y.rows(); ++i) {
                    double rs = 0.0;
                    for (std::size_t j = 0; j < y.cols(); ++j) rs += ybar(i, j);
                    for (std::size_t j = 0; j < y.cols(); ++j)
                      d(i, j) -= std::exp(y(i, j)) * rs;
                  }
                  t.accum(a, d);
                });
}

Var Tape::slice_cols(Var a, std::size_t c0, std::size_t c1) {
  const Tensor& av = value(a);
  check_shape(av.rank() == 2 && c0 <= c1 && c1 <= av.cols(), "slice_cols");
  Tensor out({av.rows(), c1 - c0});
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = c0; j < c1; ++j) out(i, j - c0) = av(i, j);
  return record(std::move(out), {a.id},
                [a = a.id, c0](Tape& t, std::int32_t self) {
                  const Tensor& ybar = t.adjoint(self);
                  if (!t.nodes_[a].needs_grad) return;
                  Tensor& buf = t.adjoint_buffer(a);
                  for (std::size_t i = 0; i < ybar.rows(); ++i)
                    for (std::size_t j = 0; j < ybar.cols(); ++j)
                      buf(i, c0 + j) += ybar(i, j);
                });
}

Var Tape::slice_rows(Var a, std::size_t r0, std::size_t r1) {
  const Tensor& av = value(a);
  check_shape(av.rank() == 2 && r0 <= r1 && r1 <= av.rows(), "slice_rows");
  Tensor out({r1 - r0, av.cols()});
  for (std::size_t i = r0; i < r1; ++i)
    for (std::size_t j = 0; j < av.cols(); ++j) out(i - r0, j) = av(i, j);
  return record(std::move(out), {a.id},
                [a = a.id, r0](Tape& t, std::int32_t self) {
                  const Tensor& ybar = t.adjoint(self);
                  if (!t.nodes_[a].needs_grad) return;
                  Tensor& buf = t.adjoint_buffer(a);
                  for (std::size_t i = 0; i < ybar.rows(); ++i)
                    for (std::size_t j = 0; j < ybar.cols(); ++j)
                      buf(r0 + i, j) += ybar(i, j);
                });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
  const std::size_t rows = value(parts[0]).rows();
  std::size_t cols = 0;
  std::vector<std::int32_t> ids;
  std::vector<std::size_t> widths;
  for (Var p : parts) {
    check_same_tape(parts[0], p);
    const Tensor& pv = value(p);
    check_shape(pv.rows() == rows, "concat_cols row count");
    ids.push_back(p.id);
    widths.push_back(pv.cols());
    cols += pv.cols();
  }
  Tensor out({rows, cols});
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& pv = value(p);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < pv.cols(); ++j) out(i, off + j) = pv(i, j);
    off += pv.cols();
  }
  return record(std::move(out), ids,
                [ids, widths](Tape& t, std::int32_t self) {
                  const Tensor& ybar = t.adjoint(self);
                  std::size_t off = 0;
                  for (std::size_t k = 0; k < ids.size(); ++k) {
                    if (t.nodes_[ids[k]].needs_grad) {
                      Tensor& buf = t.adjoint_buffer(ids[k]);
                      for (std::size_t i = 0; i < buf.rows(); ++i)
                        for (std::size_t j = 0; j < widths[k]; ++j)
                          buf(i, j) += ybar(i, off + j);
                    }
                    off += widths[k];
                  }
                });
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
  const std::size_t cols = value(parts[0]).cols();
  std::size_t rows = 0;
  std::vector<std::int32_t> ids;
  std::vector<std::size_t> heights;
  for (Var p : parts) {
    check_same_tape(parts[0], p);
    const Tensor& pv = value(p);
    check_shape(pv.cols() == cols, "concat_rows col count");
    ids.push_back(p.id);
    heights.push_back(pv.rows());
    rows += pv.rows();
  }
  Tensor out({rows, cols});
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& pv = value(p);
    for (std::size_t i = 0; i < pv.rows(); ++i)
      for (std::size_t j = 0; j < cols; ++j) out(off + i, j) = pv(i, j);
    off += pv.rows();
  }
  return record(std::move(out), ids,
                [ids, heights](Tape& t, std::int32_t self) {
                  const Tensor& ybar = t.adjoint(self);
                  std::size_t off = 0;
                  for (std::size_t k = 0; k < ids.size(); ++k) {
                    if (t.nodes_[ids[k]].needs_grad) {
                      Tensor& buf = t.adjoint_buffer(ids[k]);
                      for (std::size_t i = 0; i < heights[k]; ++i)
                        for (std::size_t j = 0; j < buf.cols(); ++j)
                          buf(i, j) += ybar(off + i, j);
                    }
                    off += heights[k];
                  }
                });
}

Var Tape::gather_cols(Var a, std::vector<std::size_t> idx) {
  const Tensor& av = value(a);
  check_shape(av.rank() == 2 && idx.size() == av.rows(), "gather_cols");
  Tensor out({av.rows(), 1});
  for (std::size_t i = 0; i < av.rows(); ++i) {
    if (idx[i] >= av.cols())
      throw std::invalid_argument("gather_cols: index out of range");
    out(i, 0) = av(i, idx[i]);
  }
  return record(std::move(out), {a.id},
                [a = a.id, idx = std::move(idx)](Tape& t, std::int32_t self) {
                  const Tensor& ybar = t.adjoint(self);
                  if (!t.nodes_[a].needs_grad) return;
                  Tensor& buf = t.adjoint_buffer(a);
                  for (std::size_t i = 0; i < idx.size(); ++i)
                    buf(i, idx[i]) += ybar(i, 0);
                });
}

namespace {
Tensor kron_solve_value(const Tensor& base_chol, std::size_t c, const Tensor& v) {
  const std::size_t n = base_chol.rows();
  const std::size_t k = v.cols();
  check_shape(v.rows() == n * c, "kron_solve: rhs rows must equal n*c");
  // Row index (i, out) with out fastest: (B^{-1} (x) I_c) v is a plain solve
  // on the n x (c*k) reshape.
  const Tensor wide = v.reshaped({n, c * k});
  return chol_solve(base_chol, wide).reshaped({n * c, k});
}
}  // namespace

Var Tape::kron_solve(Tensor base_chol, std::size_t c, Var v) {
  const Tensor& vv = value(v);
  const bool vector_input = vv.rank() == 1;
  const Tensor v2 = vector_input ? vv.reshaped({vv.size(), 1}) : vv;
  Tensor out = kron_solve_value(base_chol, c, v2);
  if (vector_input) out = out.reshaped({vv.size()});
  return record(std::move(out), {v.id},
                [v = v.id, base_chol = std::move(base_chol), c,
                 vector_input](Tape& t, std::int32_t self) {
                  // B^{-1} (x) I is symmetric, so the pullback is the same solve.
                  const Tensor& ybar = t.adjoint(self);
                  const Tensor y2 = vector_input
                                        ? ybar.reshaped({ybar.size(), 1})
                                        : ybar;
                  Tensor d = kron_solve_value(base_chol, c, y2);
                  if (vector_input) d = d.reshaped({ybar.size()});
                  t.accum(v, d);
                });
}

Var Tape::lowrank_logdet(Var gc, double lambda) {
  return record(Tensor::scalar(nd::lowrank_logdet(value(gc), lambda)), {gc.id},
                [gc = gc.id, lambda](Tape& t, std::int32_t self) {
                  const double ybar = t.adjoint(self).item();
                  t.accum(gc, nd::scale(lowrank_logdet_grad(t.nodes_[gc].value,
                                                            lambda),
                                        ybar));
                });
}

void Tape::backward(Var output) {
  if (output.tape != this) throw std::invalid_argument("backward: foreign node");
  const Node& out = nodes_.at(output.id);
  if (out.value.size() != 1)
    throw std::invalid_argument("backward: output must be a scalar node");
  adjoints_.assign(nodes_.size(), Tensor());
  adjoints_[output.id] = Tensor(out.value.shape(), 1.0);
  for (std::int32_t i = output.id; i >= 0; --i) {
    if (adjoints_[i].empty() || !nodes_[i].pull) continue;
    nodes_[i].pull(*this, i);
  }
}

Tensor Tape::grad(Var v) const {
  const Node& node = nodes_.at(v.id);
  if (static_cast<std::size_t>(v.id) < adjoints_.size() &&
      !adjoints_[v.id].empty())
    return adjoints_[v.id];
  return Tensor(node.value.shape());
}

}  // namespace degp::nd
