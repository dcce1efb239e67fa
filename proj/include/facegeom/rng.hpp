// Deterministic random number generation.
//
// std::mt19937 + std::uniform_*_distribution is not bit-stable across
// standard libraries, so every randomized routine in this project draws from
// this splitmix64 generator instead. The k-th draw after seeding depends only
// on (seed, k), which makes sampling sequences reproducible everywhere.
#pragma once

#include <cmath>
#include <cstdint>

namespace facegeom {

class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed = 0) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Unbiased uniform integer in [0, n). n must be positive.
  uint64_t next_index(uint64_t n) {
    const uint64_t limit = ~0ull - ~0ull % n;
    uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double next_range(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Standard normal via Box-Muller. Always consumes exactly two draws; no
  // cached spare, so interleaving with other calls stays reproducible.
  double next_gaussian() {
    double u1 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
  }

 private:
  uint64_t state_;
};

}  // namespace facegeom
