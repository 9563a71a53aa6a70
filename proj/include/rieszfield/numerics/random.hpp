#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace rieszfield {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seed for the index-th child stream of `parent`.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  return mix64(mix64(parent) ^ mix64(index + 0x632BE59BD9B4E019ull));
}

/**
 * Deterministic stream of standard normal variates.
 *
 * Uniforms come from a counter-based generator (the i-th uniform is a pure
 * function of seed and i); normals use the Marsaglia polar method, which
 * yields pairs. The stream is single-owner: use derive_seed for independent
 * streams on other threads.
 */
class GaussianStream {
public:
  explicit GaussianStream(std::uint64_t seed) : seed_(seed), key_(mix64(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t position() const noexcept { return counter_; }

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    for (;;) {
      const double u = 2.0 * uniform() - 1.0;
      const double v = 2.0 * uniform() - 1.0;
      const double s = u * u + v * v;
      if (s >= 1.0 || s == 0.0) continue;
      const double f = std::sqrt(-2.0 * std::log(s) / s);
      spare_ = v * f;
      has_spare_ = true;
      return u * f;
    }
  }

  Eigen::VectorXd draw(Eigen::Index n) {
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = next();
    return out;
  }

  /// Uniform in [0,1) with 53 random bits.
  double uniform() {
    const std::uint64_t bits = mix64(key_ ^ mix64(counter_++));
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

private:

  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rieszfield
