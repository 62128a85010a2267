#pragma once

#include <cstdint>
#include <random>

namespace cflow {

using Rng = std::mt19937_64;

// Independent generator for a (seed, stream) pair. Streams keep unrelated
// consumers (shuffles, noise, init) from perturbing each other.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

}  // namespace cflow
