// Copyright 2026 the eqsw authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic random-number kernel. SplitMix64 for the integer stream
// and Box-Muller for normals, implemented here rather than through
// <random> distributions so that every platform, standard library, and
// thread count produces the same draws for the same seed.
#pragma once

#include <cstdint>
#include <cmath>

namespace eqsw {

/// SplitMix64 engine. Cheap to construct, so replicate/resample streams
/// are made by deriving a fresh seed per index instead of jumping.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0,1) with 53 random bits.
  double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; caches the second draw of each pair.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Uniform integer in [0, bound) by rejection, bias-free.
  std::uint64_t uniform_int(std::uint64_t bound) {
    std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Derives an independent stream seed from (seed, index). Used for
/// replicate and bootstrap streams so parallel execution order cannot
/// change any draw.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t index) {
  // One SplitMix64 scramble of the index offset by the seed.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace eqsw
