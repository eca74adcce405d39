#pragma once

#include <cstdint>
#include <random>

namespace btmc {

using Rng = std::mt19937_64;

// splitmix64 finalizer, used to decorrelate seed material before it reaches
// an engine.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic stream id from a master seed plus integer labels.  Distinct
// label tuples give decorrelated streams, so concurrent workers can each own
// one without coordination.
template <class... Labels>
constexpr std::uint64_t derive_stream(std::uint64_t master, Labels... labels) {
  std::uint64_t h = mix64(master);
  ((h = mix64(h ^ mix64(static_cast<std::uint64_t>(labels)))), ...);
  return h;
}

inline Rng make_rng(std::uint64_t stream_id) { return Rng(stream_id); }

}  // namespace btmc
