#ifndef SURVBENCH_RNG_HPP
#define SURVBENCH_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

#include "survbench/common.hpp"

namespace survbench {

// std::mt19937_64 output is pinned by the standard, but the standard
// distributions are not. All sampling below is spelled out explicitly so that
// identical seeds give identical streams on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on the open interval (0,1); never returns an exact 0 or 1,
  /// so logs and inverse transforms are always finite.
  Scalar uniform01() {
    const std::uint64_t bits = engine_() >> 11;  // 53 bits
    return (static_cast<Scalar>(bits) + 0.5) * 0x1.0p-53;
  }

  Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, bound) by rejection, bias-free.
  std::uint64_t uniform_int(std::uint64_t bound) {
    if (bound == 0) throw ValidationError("uniform_int: bound must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  Scalar normal() {
    // Box-Muller, one value per pair of uniforms; draw order stays simple.
    const Scalar u1 = uniform01();
    const Scalar u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  int bernoulli(Scalar p) { return uniform01() < p ? 1 : 0; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_int(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Derives independent sub-stream seeds from (seed, tag) pairs (splitmix64 mix).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace survbench

#endif
