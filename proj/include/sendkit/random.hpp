#pragma once

#include <cstdint>
#include <random>

namespace sendkit {

/// splitmix64 finalizer. Used to derive independent sub-seeds from (seed, stream)
/// so parallel or reordered work stays schedule-independent.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix_seed(mix_seed(seed) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t sub) noexcept {
  return derive_seed(derive_seed(seed, stream), sub);
}

using Rng = std::mt19937_64;

}  // namespace sendkit
