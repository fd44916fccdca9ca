#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>

namespace oamtopo {

/// SplitMix64 output function (Steele, Lea & Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Order-sensitive hash of a list of 64-bit words. Used for per-sample seeds.
constexpr std::uint64_t seed_hash(std::initializer_list<std::uint64_t> words) noexcept {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t w : words) h = mix64(h ^ mix64(w));
  return h;
}

/// Counter-based SplitMix64 stream: the i-th draw is mix64(key + i * 0x9e3779b97f4a7c15).
/// Every screen, noise field and weight init in the project draws from this generator,
/// so outputs are reproducible from a 64-bit key alone.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t key) noexcept : state_(key) {}

  std::uint64_t next() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; pairs are consumed in order.
  double normal() noexcept;

  /// Complex value whose real and imaginary parts are independent N(0, 1).
  std::complex<double> complex_normal() noexcept {
    const double re = normal();
    const double im = normal();
    return {re, im};
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept { return n == 0 ? 0 : next() % n; }

 private:
  std::uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace oamtopo
