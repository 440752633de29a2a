#pragma once

// Central finite-difference oracle used across the test suites. Lives in test
// code only; nothing in the library depends on it.

#include <functional>
#include <vector>

#include "degp/tensor.hpp"

namespace testutil {

/// Central finite differences of eval() w.r.t. every element of every tensor
/// in params. eval must read the tensors through the given pointers.
inline std::vector<degp::nd::Tensor> finite_diff(
    const std::vector<degp::nd::Tensor*>& params,
    const std::function<double()>& eval, double step) {
  std::vector<degp::nd::Tensor> grads;
  for (degp::nd::Tensor* p : params) {
    degp::nd::Tensor g(p->shape());
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double saved = (*p)(i);
      (*p)(i) = saved + step;
      const double up = eval();
      (*p)(i) = saved - step;
      const double down = eval();
      (*p)(i) = saved;
      g(i) = (up - down) / (2.0 * step);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

/// Largest relative error between two gradient sets, with an absolute floor
/// so entries near zero do not blow up the ratio.
inline double max_rel_err(const std::vector<degp::nd::Tensor>& a,
                          const std::vector<degp::nd::Tensor>& b,
                          double floor = 1e-8) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t i = 0; i < a[k].size(); ++i) {
      const double denom =
          std::max({std::abs(a[k](i)), std::abs(b[k](i)), floor});
      worst = std::max(worst, std::abs(a[k](i) - b[k](i)) / denom);
    }
  }
  return worst;
}

}  // namespace testutil
