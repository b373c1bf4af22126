#pragma once

#include <cstdint>
#include <random>

#include "mrcg/operator.hpp"

namespace mrcg {

/// Uniform double in [-1, 1) from the top 53 bits of one mt19937_64 draw.
/// Unlike std::uniform_real_distribution the mapping is fixed, so sequences
/// are identical across standard libraries.
inline double uniform_pm1(std::mt19937_64& rng) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return 2.0 * u - 1.0;
}

/// Standard normal via Box-Muller over uniform_pm1-style draws.
double standard_normal(std::mt19937_64& rng);

/// n entries of uniform_pm1 from a generator seeded with `seed`.
Vector random_vector(std::size_t n, std::uint64_t seed);

}  // namespace mrcg
