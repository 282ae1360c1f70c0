#pragma once

#include <cstdint>
#include <random>

#include "gwheat/hash.hpp"

namespace gwheat {

using Rng = std::mt19937_64;

// One generator per (seed, stream) pair; streams never share state, so
// results do not depend on how work is scheduled across workers.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return Rng(derive_seed(seed, stream));
}

inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace gwheat
