#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace twinlink {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent stream seed from a base seed and any number of keys
// (stream id, tick, record index, ...). Pure function of its inputs.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = mix64(base);
  for (auto k : keys) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

// Named stream ids so independent consumers never share a sequence.
enum class Stream : std::uint64_t {
  kGust = 1,
  kCommandLink = 2,
  kTelemetryLink = 3,
  kRadio = 4,
  kMeasurementNoise = 5,
  kTrialSpeeds = 6,
};

inline Rng make_rng(std::uint64_t base, Stream stream, std::uint64_t index = 0) {
  return Rng{derive_seed(base, {static_cast<std::uint64_t>(stream), index})};
}

}  // namespace twinlink
