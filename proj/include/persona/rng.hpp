#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace persona {

using Rng = std::mt19937_64;

/// Seed for the stream identified by (seed, a, b). Work items keyed by a
/// counter get the same stream regardless of which worker runs them.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

inline Rng make_rng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0) {
  return Rng(derive_seed(seed, a, b));
}

std::vector<int> random_permutation(Rng& rng, int n);

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

}  // namespace persona
