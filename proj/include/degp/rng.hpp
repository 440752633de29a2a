#pragma once

#include <cstdint>
#include <vector>

#include "degp/tensor.hpp"

namespace degp::nd {

/// Deterministic xoshiro256++ generator with explicit transforms, so the same
/// (seed, step, purpose) triple yields the same draws on any platform and
/// regardless of how work is scheduled.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent stream keyed by (seed, step, purpose). Used by the trainer
  /// so every consumer owns a private stream instead of sharing a cursor.
  static Rng stream(std::uint64_t seed, std::uint64_t step, std::uint64_t purpose);

  std::uint64_t next_u64();

  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);

  /// Standard normal via Box-Muller (no library distribution, for portability).
  double normal();

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n);

  Tensor normal_tensor(std::vector<std::size_t> shape);
  Tensor uniform_tensor(std::vector<std::size_t> shape, double lo, double hi);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace degp::nd
