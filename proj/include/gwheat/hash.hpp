#pragma once

// Stable 64-bit hashing used to address the lazily generated trees.
//
// Every vertex carries a key that is a pure function of (seed, path):
//
//   key(root)      = mix64(seed ^ kRootSalt)
//   key(x . i)     = mix64(key(x) + i * kGolden)          (i is 1-based)
//   uniform(x)     = (mix64(key(x) ^ kSampleSalt) >> 11) * 2^-53
//
// where mix64 is the splitmix64 finalizer. The child count of x is drawn by
// feeding uniform(x) to the offspring sampler, so expansion order never
// changes the tree. Replicate seeds are derived with derive_seed().

#include <cstdint>

namespace gwheat {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
inline constexpr std::uint64_t kRootSalt = 0x6a09e667f3bcc909ULL;
inline constexpr std::uint64_t kSampleSalt = 0xbb67ae8584caa73bULL;
inline constexpr std::uint64_t kStreamSalt = 0x3c6ef372fe94f82bULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t root_key(std::uint64_t seed) noexcept {
  return mix64(seed ^ kRootSalt);
}

constexpr std::uint64_t child_key(std::uint64_t parent_key,
                                  std::uint32_t index) noexcept {
  return mix64(parent_key + static_cast<std::uint64_t>(index) * kGolden);
}

// Uniform double in [0, 1) attached to a vertex key.
constexpr double key_uniform(std::uint64_t key) noexcept {
  return static_cast<double>(mix64(key ^ kSampleSalt) >> 11) * 0x1.0p-53;
}

// Independent seed for replicate / stream `index` under `master`.
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::uint64_t index) noexcept {
  return mix64(mix64(master ^ kStreamSalt) + (index + 1) * kGolden);
}

}  // namespace gwheat
