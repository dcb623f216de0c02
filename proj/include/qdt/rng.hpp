#pragma once

#include <cstdint>
#include <random>

namespace qdt {

// Counter-based stream derivation: every (seed, trial, stage) triple owns an
// independent generator, so parallel trials are reproducible regardless of
// scheduling or thread count.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_id(std::uint64_t seed, std::uint64_t trial,
                               std::uint64_t stage) {
  return splitmix64(splitmix64(splitmix64(seed) ^ trial) ^ stage);
}

inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t trial,
                                   std::uint64_t stage) {
  return std::mt19937_64(stream_id(seed, trial, stage));
}

namespace stage {
constexpr std::uint64_t probes = 101;
constexpr std::uint64_t counts = 202;
constexpr std::uint64_t cv_split = 303;
constexpr std::uint64_t unitary = 404;
constexpr std::uint64_t perturb = 505;
}  // namespace stage

}  // namespace qdt
