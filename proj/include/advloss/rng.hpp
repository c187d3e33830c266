#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace advloss {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent substreams.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed for the substream identified by `keys` under `seed`. Results depend only
// on the key path, never on scheduling or partitioning.
constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                    std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t h = mix64(seed);
  for (auto k : keys) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

// Stream tags for derive_seed.
namespace stream {
inline constexpr std::uint64_t attack = 1;
inline constexpr std::uint64_t fitness_slice = 2;
inline constexpr std::uint64_t probe = 3;
inline constexpr std::uint64_t breeding = 4;
inline constexpr std::uint64_t init = 5;
inline constexpr std::uint64_t training = 6;
inline constexpr std::uint64_t data = 7;
}  // namespace stream

}  // namespace advloss
