#pragma once

#include <cmath>
#include <cstdint>

#include "hyperpair/types.hpp"

namespace hyperpair {

// Deterministic 64-bit generator (splitmix64). Chosen over std::mt19937_64
// distributions because count simulation promises bit-identical output
// across platforms and library versions; distribution algorithms in the
// standard library are implementation-defined.
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1) with 53 significant bits.
  double uniform01() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

// Stream for one record of a seeded run. Multiplication by an odd constant
// is a bijection of the index, and the splitmix output function is a
// bijection of the state, so distinct records never share a stream seed.
inline SplitMix64 record_stream(std::uint64_t seed, std::uint64_t record_index) noexcept {
  SplitMix64 g(seed + 0x9E3779B97F4A7C15ull * (record_index + 1));
  return SplitMix64(g.next());
}

namespace detail {

// Product-of-uniforms inversion; exact for any mean with exp(-mean)
// representable as a positive double.
inline std::int64_t poisson_small(double mean, SplitMix64& rng) {
  const double limit = std::exp(-mean);
  std::int64_t k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= rng.uniform01();
  } while (p > limit);
  return k - 1;
}

}  // namespace detail

// Exact Poisson sampling for arbitrary mean: sums of independent Poisson
// draws are Poisson, so large means are split into chunks whose exp(-mean)
// stays far above the double underflow threshold.
inline std::int64_t poisson(double mean, SplitMix64& rng) {
  if (!std::isfinite(mean)) throw ValidationError("poisson: mean must be finite");
  if (mean <= 0.0) return 0;
  constexpr double kChunk = 500.0;  // exp(-500) ~ 7e-218
  std::int64_t total = 0;
  while (mean > kChunk) {
    total += detail::poisson_small(kChunk, rng);
    mean -= kChunk;
  }
  return total + detail::poisson_small(mean, rng);
}

}  // namespace hyperpair
