#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "kernet/types.hpp"

namespace kernet::rng {

// Counter-based generator: every draw is a pure function of (seed, stream, index),
// so any draw can be produced independently of the others and results never
// depend on evaluation order or thread count.

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// splitmix64 finalizer
inline std::uint64_t mix(std::uint64_t z) {
  z += kGolden;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Named sub-streams so independent uses of one seed never collide.
enum Stream : std::uint64_t {
  kInputs = 1,
  kNoise = 2,
  kShuffle = 3,
  kHoldout = 4,
  kMonteCarlo = 5,
  kUnlabeled = 6,
  kPartition = 7,
};

inline std::uint64_t bits(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return mix(mix(mix(seed) ^ (stream + kGolden)) ^ (index + kGolden));
}

/// Uniform draw in (0, 1].
inline double u01(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return static_cast<double>((bits(seed, stream, index) >> 11) + 1) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on two counter draws.
inline double gaussian(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  const double u1 = u01(seed, stream, 2 * index);
  const double u2 = u01(seed, stream, 2 * index + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Uniform integer in [0, bound), bound >= 1.
inline std::uint64_t below(std::uint64_t seed, std::uint64_t stream, std::uint64_t index,
                           std::uint64_t bound) {
  const unsigned __int128 wide =
      static_cast<unsigned __int128>(bits(seed, stream, index)) * bound;
  return static_cast<std::uint64_t>(wide >> 64);
}

/// Fisher-Yates permutation of {0, ..., n-1} keyed by seed.
inline std::vector<Index> shuffled_indices(Index n, std::uint64_t seed) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(
        below(seed, kShuffle, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  return perm;
}

/// n uniform points inside a box, row-major over (point, coordinate).
inline Points uniform_points(const Box& box, Index n, std::uint64_t seed,
                             std::uint64_t stream = kInputs) {
  const Index p = box.dim();
  Points pts(n, p);
  for (Index i = 0; i < n; ++i) {
    for (Index d = 0; d < p; ++d) {
      const double u = u01(seed, stream, static_cast<std::uint64_t>(i * p + d));
      pts(i, d) = box.lo(d) + u * (box.hi(d) - box.lo(d));
    }
  }
  return pts;
}

}  // namespace kernet::rng
