#pragma once

#include <bit>
#include <cmath>
#include <numbers>
#include <cstdint>
#include <initializer_list>

namespace pagkit {

// SplitMix64 finalizer; used to derive independent stream seeds from
// (global seed, task key) so results do not depend on scheduling order.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = mix64(base);
  for (const auto k : keys) h = mix64(h ^ k);
  return h;
}

inline std::uint64_t seed_key(double value) { return std::bit_cast<std::uint64_t>(value); }

// Draws defined bit-for-bit on top of the engine output, unlike the
// implementation-specific std distributions.
template <typename Engine>
double uniform01(Engine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename Engine>
double standard_normal(Engine& rng) {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace pagkit
