#ifndef STE_RNG_HPP
#define STE_RNG_HPP

#include <cstdint>
#include <random>

namespace ste {

/// Identifies an independent, reproducible random stream. Realization i of
/// a Monte Carlo run uses stream_id = base + i.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  RngStream with_offset(std::uint64_t i) const noexcept { return {seed, stream_id + i}; }

  std::mt19937_64 engine() const { return std::mt19937_64(mix(seed, stream_id)); }

  static constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) noexcept {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
  }
};

}  // namespace ste

#endif  // STE_RNG_HPP
