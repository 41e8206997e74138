#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., Random123).
//
// Every random draw in the simulator is a pure function of
// (seed, domain, stream, index), so any partition of a run into chunks,
// processed in any order, reproduces the sequential result exactly.
//
// Counter layout: word0/word1 = low/high 32 bits of the index,
// word2 = domain tag, word3 = stream id. Key = low/high 32 bits of the seed.

#include <array>
#include <cstdint>

namespace qkd {

using PhiloxWords = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;
inline constexpr int kPhiloxRounds = 10;

PhiloxWords philox4x32(PhiloxWords counter, PhiloxKey key);

// Domain tags for the counter's third word.
enum class RandomDomain : std::uint32_t {
  session_pulse = 0,
  fringe_scan = 1,
};

inline PhiloxKey philox_key(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

inline PhiloxWords philox_counter(std::uint64_t index, RandomDomain domain,
                                  std::uint32_t stream) {
  return {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
          static_cast<std::uint32_t>(domain), stream};
}

// 60-bit uniform integer built from words 2 and 3; compared against
// floor(p * 2^60) thresholds.
inline std::uint64_t uniform60(const PhiloxWords& w) {
  return (static_cast<std::uint64_t>(w[2] >> 4) << 32) | w[3];
}

inline constexpr double kTwo60 = 1152921504606846976.0;
inline constexpr double kTwo32 = 4294967296.0;

// floor(p * 2^60), with p clamped to [0, 1].
std::uint64_t probability_threshold60(double p);

}  // namespace qkd
