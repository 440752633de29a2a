#include "degp/rng.hpp"

#include <cmath>
#include <numbers>

namespace degp::nd {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t x = seed;
  for (auto& s : s_) s = splitmix64(x);
}

Rng Rng::stream(std::uint64_t seed, std::uint64_t step, std::uint64_t purpose) {
  // Mix the triple through splitmix so nearby keys land far apart.
  std::uint64_t x = seed;
  std::uint64_t a = splitmix64(x);
  x ^= step * 0x9e3779b97f4a7c15ULL;
  std::uint64_t b = splitmix64(x);
  x ^= purpose * 0xd1342543de82ef95ULL;
  std::uint64_t c = splitmix64(x);
  return Rng(a ^ rotl(b, 17) ^ rotl(c, 43));
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::size_t Rng::index(std::size_t n) {
  // Rejection sampling keeps the index exactly uniform.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return static_cast<std::size_t>(x % n);
}

Tensor Rng::normal_tensor(std::vector<std::size_t> shape) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t(i) = normal();
  return t;
}

Tensor Rng::uniform_tensor(std::vector<std::size_t> shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t(i) = uniform(lo, hi);
  return t;
}

}  // namespace degp::nd
