#pragma once

#include <bit>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace sagelink {

/// Deterministic random source. mt19937_64 is fully specified by the
/// standard; the mappings below avoid std::uniform_*_distribution, whose
/// output is implementation-defined and would break cross-compiler
/// reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random mantissa bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, bound) via mask rejection. bound must be > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t mask = std::bit_ceil(bound) - 1;
    std::uint64_t v = next() & mask;
    while (v >= bound) v = next() & mask;
    return v;
  }

  /// Fisher-Yates; consumes one draw per position, order independent of the
  /// element type.
  template <class T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 finaliser over (base, stream); distinct streams give
/// independent-looking seeds from one base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace sagelink
