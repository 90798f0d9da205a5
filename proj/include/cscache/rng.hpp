#pragma once

#include <cstdint>
#include <random>

namespace cscache {

// Every stochastic object draws from its own stream so a sweep can vary one
// factor (e.g. the anchor draw) while all other draws stay fixed.
enum class Stream : std::uint64_t {
  kDeployment = 1,
  kSourcePlacement = 2,
  kSourceMeans = 3,
  kInnovations = 4,
  kMarkovStates = 5,
  kMarkovChain = 6,
  kSampling = 7,
  kAnchors = 8,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream,
                                 std::uint64_t index = 0) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
  return splitmix64(h ^ index);
}

inline std::mt19937_64 make_stream(std::uint64_t seed, Stream stream,
                                   std::uint64_t index = 0) {
  return std::mt19937_64(derive_seed(seed, stream, index));
}

}  // namespace cscache
