#pragma once

#include <cstdint>
#include <random>

namespace neuronml {

// All randomness flows through named streams derived from one root seed.
// Streams are decorrelated by hashing the seed together with small stream
// tags (iteration index, task index, purpose tag), so independent parts of
// a run can be replayed or parallelised without sharing generator state.

/// splitmix64 finalizer; good avalanche, cheap, and stable across platforms.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return mix_seed(a ^ mix_seed(b));
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix_seed(mix_seed(a, b), c);
}

/// Generator for a named sub-stream of `seed`.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t tag) {
  return std::mt19937_64(mix_seed(seed, tag));
}

inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t tag,
                                   std::uint64_t index) {
  return std::mt19937_64(mix_seed(seed, tag, index));
}

// Stream tags.  Arbitrary distinct constants; never reuse one for a new
// purpose or old runs stop being replayable.
inline constexpr std::uint64_t kStreamInit = 0x01;
inline constexpr std::uint64_t kStreamTasks = 0x02;
inline constexpr std::uint64_t kStreamEval = 0x03;

}  // namespace neuronml
