#pragma once

#include <cstdint>
#include <random>

namespace sasmc {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; a bijective 64-bit mix.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for the stream identified by (master, iteration, item, tag). Streams
// are a pure function of these counters, so parallel work can draw from them
// in any order and still reproduce the same result.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t iteration,
                                    std::uint64_t item, std::uint64_t tag = 0) noexcept {
  return mix64(mix64(mix64(mix64(master) ^ iteration) ^ item) ^ tag);
}

inline Rng make_stream(std::uint64_t master, std::uint64_t iteration, std::uint64_t item,
                       std::uint64_t tag = 0) {
  return Rng(stream_seed(master, iteration, item, tag));
}

// Uniform double in [0, 1).
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace sasmc
