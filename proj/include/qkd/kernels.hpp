#pragma once

// Inner loops of the Monte Carlo. Each kernel has a scalar reference
// implementation and, where the CPU supports it, an AVX2 variant; variants
// produce bit-identical results and are selected at runtime.

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "qkd/philox.hpp"

namespace qkd {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa);
bool isa_available(Isa isa);
// Fastest available variant; QKD_FORCE_SCALAR=1 in the environment pins the
// scalar path.
Isa best_isa();
std::vector<Isa> available_isas();

inline constexpr int kMaxPhotonLevels = 63;

// Integer thresholds that turn one Philox block into one pulse:
//   word0            intensity class (decoy iff word0 < decoy_threshold)
//   word1            photon number by inversion against poisson_thresholds
//   word2 bits 0..1  Alice phase index, bits 2..3 Bob phase index
//   word2 >> 4, word3  60-bit uniform compared against click_thresholds
struct PulseTables {
  std::uint64_t decoy_threshold = 0;
  int photon_levels = 0;  // photon counts are capped at this value
  // [class][k] = round(P(N <= k) * 2^32); class 0 signal, 1 decoy.
  std::array<std::array<std::uint64_t, kMaxPhotonLevels>, 2> poisson_thresholds{};
  // [(class * 4 + phase_diff) * (photon_levels + 1) + photons]
  std::vector<std::uint64_t> click_thresholds;

  std::uint64_t click_threshold(int cls, int phase_diff, int photons) const {
    return click_thresholds[static_cast<std::size_t>((cls * 4 + phase_diff) * (photon_levels + 1) + photons)];
  }
};

struct PulseDraw {
  int cls;         // 0 signal, 1 decoy
  int photons;
  int alice;       // phase index, phase = index * pi/2
  int bob;
  int phase_diff;  // (alice - bob) mod 4
  bool clicked;
};

PulseDraw decode_pulse(const PulseTables& tables, const PhiloxWords& words);

// Outcome code of a pulse: bit 0 class, bits 1..2 min(photons, 3),
// bit 3 clicked, bits 4..5 phase difference index.
inline constexpr int kPulseCodes = 64;
using PulseHistogram = std::array<std::uint64_t, kPulseCodes>;

inline int pulse_code(const PulseDraw& d) {
  const int bin = d.photons < 3 ? d.photons : 3;
  return d.cls | (bin << 1) | (d.clicked ? 8 : 0) | (d.phase_diff << 4);
}

// Adds the outcome codes of pulses [first, first + count) to `hist`.
void accumulate_pulses(Isa isa, const PulseTables& tables, std::uint64_t seed,
                       std::uint64_t first, std::uint64_t count, PulseHistogram& hist);

// Number of indices in [first, first + count) whose 60-bit uniform falls
// below threshold60.
std::uint64_t count_bernoulli(Isa isa, std::uint64_t seed, RandomDomain domain,
                              std::uint32_t stream, std::uint64_t first,
                              std::uint64_t count, std::uint64_t threshold60);

namespace detail {
void accumulate_pulses_scalar(const PulseTables&, std::uint64_t, std::uint64_t,
                              std::uint64_t, PulseHistogram&);
std::uint64_t count_bernoulli_scalar(std::uint64_t, RandomDomain, std::uint32_t,
                                     std::uint64_t, std::uint64_t, std::uint64_t);
void accumulate_pulses_avx2(const PulseTables&, std::uint64_t, std::uint64_t,
                            std::uint64_t, PulseHistogram&);
std::uint64_t count_bernoulli_avx2(std::uint64_t, RandomDomain, std::uint32_t,
                                   std::uint64_t, std::uint64_t, std::uint64_t);
}  // namespace detail

}  // namespace qkd
