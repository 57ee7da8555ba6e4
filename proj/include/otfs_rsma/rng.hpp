// SPDX-License-Identifier: Apache-2.0
//
// Counter-based seed splitting. Every random stream in the simulator is
// addressed by (master seed, tag, indices...), so adding a strategy or a
// power point never shifts the draws seen by another one.

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

#include "otfs_rsma/types.hpp"

namespace otfs_rsma {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives a child seed from a parent and a path of counters.
inline std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(parent);
  for (std::uint64_t p : path) s = splitmix64(s ^ splitmix64(p + 0x632BE59BD9B4E019ULL));
  return s;
}

using Rng = std::mt19937_64;

/// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
inline cplx complex_normal(Rng& rng, double variance) {
  std::normal_distribution<double> nd(0.0, std::sqrt(variance / 2.0));
  const double re = nd(rng);
  const double im = nd(rng);
  return {re, im};
}

}  // namespace otfs_rsma
