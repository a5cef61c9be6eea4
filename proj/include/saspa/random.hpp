#pragma once

// Deterministic sampling helpers built directly on std::mt19937_64 output.
// The std distributions are implementation-defined, which would break
// byte-identical outputs across standard libraries.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace saspa::detail {

/// Uniform double in [0, 1) from the top 53 bits.
inline double unit_uniform(std::mt19937_64 &rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal draw (Box-Muller, one value per call).
inline double standard_normal(std::mt19937_64 &rng) {
  const double u1 = 1.0 - unit_uniform(rng); // (0, 1]
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T> &v, std::mt19937_64 &rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

} // namespace saspa::detail
