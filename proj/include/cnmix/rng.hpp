#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace cnmix {

/// SplitMix64 step. Only used for seed derivation, never as the
/// simulation generator itself.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d4a66395881effull;
  return z ^ (z >> 31);
}

/// Stable derivation of an independent stream seed from a base seed and a
/// list of salts (start index, benchmark cell hash, replicate, ...).
/// The mapping is fixed: reordering or omitting a salt changes the result.
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> salts) {
  std::uint64_t s = base ^ 0x2545f4914f6cdd1dull;
  std::uint64_t acc = splitmix64(s);
  for (std::uint64_t salt : salts) {
    s ^= salt + 0x9e3779b97f4a7c15ull + (acc << 6) + (acc >> 2);
    acc = splitmix64(s);
  }
  return acc;
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64(seed);
}

}  // namespace cnmix
