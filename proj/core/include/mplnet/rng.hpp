#pragma once

#include <cstdint>
#include <random>

namespace mplnet {

/// splitmix64 finalizer; good avalanche, used to derive stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Named sub-stream tags so independent phases never share a stream.
enum class rng_stream : std::uint64_t {
  sampler_row = 1,
  kmeans = 2,
  graph = 3,
  means = 4,
  scaling = 5,
  calibration = 6,
  subsample = 7,
  generic = 8,
};

/// Deterministic engine for (seed, stream, index). Row-level work derives
/// its engine from the row index so results are schedule-independent.
inline std::mt19937_64 make_engine(std::uint64_t seed, rng_stream stream,
                                   std::uint64_t index = 0) {
  std::uint64_t s = mix64(seed);
  s = mix64(s ^ static_cast<std::uint64_t>(stream));
  s = mix64(s ^ index);
  return std::mt19937_64(s);
}

}  // namespace mplnet
