// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace corpg {

using Rng = std::mt19937_64;

// Offsets added to the master seed for each consumer.
namespace seed_offset {
inline constexpr std::uint64_t noiser = 1000;
inline constexpr std::uint64_t oracle = 2000;
inline constexpr std::uint64_t init = 3000;
inline constexpr std::uint64_t shuffle = 4000;
inline constexpr std::uint64_t dropout = 5000;
inline constexpr std::uint64_t sampling = 6000;
}  // namespace seed_offset

inline double uniform01(Rng& rng) {
  // 53 random bits -> [0, 1); stable across standard libraries.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
}

// Fisher-Yates with uniform_index, so permutations do not depend on the
// standard library's shuffle implementation.
template <class T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index(rng, i)]);
  }
}

}  // namespace corpg
