#pragma once

#include <cstdint>
#include <random>

namespace mmu {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent stream seeds and for
// stable integer hashing (e.g. concept -> class).
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// A generator for a named sub-stream of `seed`. Distinct tags give
// statistically independent streams.
inline Rng make_stream(std::uint64_t seed, std::uint64_t tag) {
  return Rng(mix64(seed ^ mix64(tag)));
}

}  // namespace mmu
