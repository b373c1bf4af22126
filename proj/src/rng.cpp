#include "mrcg/rng.hpp"

#include <cmath>
#include <numbers>

namespace mrcg {

double standard_normal(std::mt19937_64& rng) {
  double u1 = 0.0;
  do {
    u1 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  } while (u1 == 0.0);
  const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Vector random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Vector v(n);
  for (double& x : v) x = uniform_pm1(rng);
  return v;
}

}  // namespace mrcg
