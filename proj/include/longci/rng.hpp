#pragma once

#include <cstdint>
#include <random>

namespace longci {

/// splitmix64 finalizer; used to derive independent substream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Named stream domains so that, e.g., subject draws and bootstrap
/// resampling never share a substream even with equal indices.
enum class Stream : std::uint64_t {
  Params = 1,
  Subject = 2,
  Truth = 3,
  Replicate = 4,
  Bootstrap = 5,
  Mdp = 6,
};

constexpr std::uint64_t substream_seed(std::uint64_t root, Stream domain,
                                       std::uint64_t index) {
  return mix64(mix64(root ^ mix64(static_cast<std::uint64_t>(domain))) + index);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t root, Stream domain, std::uint64_t index) {
  return Rng(substream_seed(root, domain, index));
}

}  // namespace longci
