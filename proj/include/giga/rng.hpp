#pragma once

// Counter-based pseudo-random streams built on the SplitMix64 finalizer.
// Each stream is addressed by (seed, stream, substream), so Monte Carlo
// trials draw identical numbers regardless of how work is scheduled
// across threads.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>

namespace giga {

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0,
                      std::uint64_t substream = 0) {
    key_ = mix64(seed + kGamma);
    key_ = mix64(key_ ^ mix64(stream + kGamma));
    key_ = mix64(key_ ^ mix64(substream + kGamma));
  }

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGamma); }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n).
  int next_index(int n) {
    const int i = static_cast<int>(next_double() * n);
    return i < n ? i : n - 1;
  }

  // Standard normal via Box-Muller; draws two uniforms per pair.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 =
        static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(phi);
    have_spare_ = true;
    return r * std::cos(phi);
  }

  // Circularly symmetric complex Gaussian with E|z|^2 = variance.
  std::complex<double> next_complex_gaussian(double variance) {
    const double s = std::sqrt(variance / 2.0);
    const double re = s * next_gaussian();
    const double im = s * next_gaussian();
    return {re, im};
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace giga
