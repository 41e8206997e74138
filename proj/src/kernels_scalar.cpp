#include "qkd/kernels.hpp"

namespace qkd {

PulseDraw decode_pulse(const PulseTables& tables, const PhiloxWords& w) {
  PulseDraw d{};
  d.cls = w[0] < tables.decoy_threshold ? 1 : 0;
  const auto& thresholds = tables.poisson_thresholds[static_cast<std::size_t>(d.cls)];
  for (int k = 0; k < tables.photon_levels; ++k) {
    if (w[1] >= thresholds[static_cast<std::size_t>(k)]) ++d.photons;
  }
  d.alice = static_cast<int>(w[2] & 3u);
  d.bob = static_cast<int>((w[2] >> 2) & 3u);
  d.phase_diff = (d.alice - d.bob) & 3;
  d.clicked = uniform60(w) < tables.click_threshold(d.cls, d.phase_diff, d.photons);
  return d;
}

namespace detail {

void accumulate_pulses_scalar(const PulseTables& tables, std::uint64_t seed,
                              std::uint64_t first, std::uint64_t count,
                              PulseHistogram& hist) {
  const PhiloxKey key = philox_key(seed);
  for (std::uint64_t i = first; i < first + count; ++i) {
    const PhiloxWords w =
        philox4x32(philox_counter(i, RandomDomain::session_pulse, 0), key);
    ++hist[static_cast<std::size_t>(pulse_code(decode_pulse(tables, w)))];
  }
}

std::uint64_t count_bernoulli_scalar(std::uint64_t seed, RandomDomain domain,
                                     std::uint32_t stream, std::uint64_t first,
                                     std::uint64_t count, std::uint64_t threshold60) {
  const PhiloxKey key = philox_key(seed);
  std::uint64_t hits = 0;
  for (std::uint64_t i = first; i < first + count; ++i) {
    if (uniform60(philox4x32(philox_counter(i, domain, stream), key)) < threshold60) ++hits;
  }
  return hits;
}

}  // namespace detail
}  // namespace qkd
