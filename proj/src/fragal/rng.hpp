#pragma once

// Deterministic random source. The engine is std::mt19937_64 (fully
// specified by the standard); all value transforms are implemented here
// rather than with std::*_distribution, whose output is
// implementation-defined. This is what makes study outputs byte-identical
// across platforms and thread counts.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "math2.hpp"

namespace fragal {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derives a well-separated child seed from (seed, stream, index) so that
/// replications and strategies get disjoint streams by construction.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64(s);
  s ^= stream * 0xD1342543DE82EF95ULL;
  std::uint64_t b = splitmix64(s);
  s ^= index * 0xAF251AF3B0F025B5ULL;
  std::uint64_t c = splitmix64(s);
  return a ^ (b + 0x9E3779B97F4A7C15ULL) ^ (c << 1);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0,1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0,1), never exactly 0 (safe for log / quantile transforms).
  double uniform_open() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal by inverse CDF; one engine draw per variate.
  double normal01() { return normal_quantile(uniform_open()); }

  double normal(double mean, double sd) { return mean + sd * normal01(); }

  /// Index in [0, n) from cumulative weights (cumsum normalized to end at
  /// total). Binary search on a single uniform draw.
  std::size_t categorical_from_cdf(const std::vector<double>& cdf) {
    if (cdf.empty()) throw std::invalid_argument("categorical: empty cdf");
    const double u = uniform01() * cdf.back();
    std::size_t lo = 0, hi = cdf.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (cdf[mid] <= u)
        lo = mid + 1;
      else
        hi = mid;
    }
    return lo;
  }

  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n = 0");
    // Rejection-free modulo bias is negligible for n << 2^64, but stay exact.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return static_cast<std::size_t>(v % n);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fragal
