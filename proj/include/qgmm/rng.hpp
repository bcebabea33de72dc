#pragma once

#include <cstdint>
#include <random>

#include "qgmm/normal.hpp"

namespace qgmm {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Substream seed for (seed, index): hash-combined so parallel workers get
// decorrelated, reproducible streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

// Deterministic RNG stream. mt19937_64 output is pinned by the standard and
// the uniform/normal transforms below avoid implementation-defined
// distributions, so identical seeds give identical draws everywhere.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  static RngStream derive(std::uint64_t seed, std::uint64_t index) {
    return RngStream(derive_seed(seed, index));
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform strictly inside (0, 1): 53 mantissa bits, half-ulp offset.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inverse-CDF normal keeps replications bit-reproducible.
  double normal(double mean = 0.0, double sd = 1.0) {
    return mean + sd * normal_quantile(uniform());
  }

  int uniform_int(int n) {  // in [0, n)
    return static_cast<int>(gen_() % static_cast<std::uint64_t>(n));
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace qgmm
