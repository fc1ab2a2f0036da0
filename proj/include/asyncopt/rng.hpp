#pragma once

// Counter-based randomness. Every draw is a pure function of
// (seed, stream, counter), so samples can be produced by any thread in any
// order and still be reproducible.

#include <cstddef>
#include <cstdint>
#include <limits>

namespace asyncopt {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream,
                                            std::uint64_t counter) noexcept {
  return splitmix64(splitmix64(splitmix64(seed) ^ (stream * 0xd1b54a32d192ed03ULL)) ^ counter);
}

__extension__ using uint128_t = unsigned __int128;

/// Maps 64 random bits to [0, n) by multiply-shift.
inline constexpr std::size_t bounded(std::uint64_t bits, std::size_t n) noexcept {
  return static_cast<std::size_t>((static_cast<uint128_t>(bits) * n) >> 64);
}

inline constexpr double unit_double(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

namespace streams {
inline constexpr std::uint64_t kSamples = 1;
inline constexpr std::uint64_t kSchedule = 2;
inline constexpr std::uint64_t kData = 3;
inline constexpr std::uint64_t kStart = 4;
}  // namespace streams

/// Index of the hyperedge (or coordinate) drawn for global sample `i`.
inline std::size_t draw_sample(std::uint64_t seed, std::uint64_t i, std::size_t n) noexcept {
  return bounded(counter_hash(seed, streams::kSamples, i), n);
}

/// SplitMix64 as a UniformRandomBitGenerator, for use with <random>
/// distributions where a sequential stream is natural.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

}  // namespace asyncopt
