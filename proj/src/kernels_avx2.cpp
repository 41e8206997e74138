// AVX2 variants of the Monte Carlo kernels. Four counters are processed per
// vector, one per 64-bit lane, with each Philox word held in the low half of
// its lane so that _mm256_mul_epu32 yields the full 32x32->64 product.

#include <immintrin.h>

#include "qkd/kernels.hpp"

namespace qkd::detail {
namespace {

struct Philox4Lanes {
  __m256i w0, w1, w2, w3;
};

struct RoundKeys {
  __m256i k0[kPhiloxRounds];
  __m256i k1[kPhiloxRounds];

  explicit RoundKeys(PhiloxKey key) {
    for (int r = 0; r < kPhiloxRounds; ++r) {
      if (r > 0) {
        key[0] += kPhiloxW0;
        key[1] += kPhiloxW1;
      }
      k0[r] = _mm256_set1_epi64x(key[0]);
      k1[r] = _mm256_set1_epi64x(key[1]);
    }
  }
};

inline Philox4Lanes philox_lanes(__m256i index, std::uint32_t domain,
                                 std::uint32_t stream, const RoundKeys& keys) {
  const __m256i low32 = _mm256_set1_epi64x(0xffffffffLL);
  const __m256i m0 = _mm256_set1_epi64x(kPhiloxM0);
  const __m256i m1 = _mm256_set1_epi64x(kPhiloxM1);
  __m256i c0 = _mm256_and_si256(index, low32);
  __m256i c1 = _mm256_srli_epi64(index, 32);
  __m256i c2 = _mm256_set1_epi64x(domain);
  __m256i c3 = _mm256_set1_epi64x(stream);
  for (int r = 0; r < kPhiloxRounds; ++r) {
    const __m256i p0 = _mm256_mul_epu32(c0, m0);
    const __m256i p1 = _mm256_mul_epu32(c2, m1);
    const __m256i n0 = _mm256_xor_si256(_mm256_xor_si256(_mm256_srli_epi64(p1, 32), c1), keys.k0[r]);
    const __m256i n1 = _mm256_and_si256(p1, low32);
    const __m256i n2 = _mm256_xor_si256(_mm256_xor_si256(_mm256_srli_epi64(p0, 32), c3), keys.k1[r]);
    const __m256i n3 = _mm256_and_si256(p0, low32);
    c0 = n0;
    c1 = n1;
    c2 = n2;
    c3 = n3;
  }
  return {c0, c1, c2, c3};
}

inline __m256i uniform60_lanes(const Philox4Lanes& w) {
  return _mm256_or_si256(_mm256_slli_epi64(_mm256_srli_epi64(w.w2, 4), 32), w.w3);
}

}  // namespace

void accumulate_pulses_avx2(const PulseTables& tables, std::uint64_t seed,
                            std::uint64_t first, std::uint64_t count,
                            PulseHistogram& hist) {
  const RoundKeys keys(philox_key(seed));
  const int levels = tables.photon_levels;
  const __m256i decoy_thr = _mm256_set1_epi64x(static_cast<long long>(tables.decoy_threshold));
  const __m256i three = _mm256_set1_epi64x(3);
  const __m256i one = _mm256_set1_epi64x(1);
  const __m256i row_stride = _mm256_set1_epi64x(levels + 1);
  const __m256i lane_offsets = _mm256_setr_epi64x(0, 1, 2, 3);
  const auto* click_table = reinterpret_cast<const long long*>(tables.click_thresholds.data());

  __m256i signal_thr[kMaxPhotonLevels];
  __m256i decoy_thr_k[kMaxPhotonLevels];
  for (int k = 0; k < levels; ++k) {
    signal_thr[k] = _mm256_set1_epi64x(static_cast<long long>(tables.poisson_thresholds[0][static_cast<std::size_t>(k)]));
    decoy_thr_k[k] = _mm256_set1_epi64x(static_cast<long long>(tables.poisson_thresholds[1][static_cast<std::size_t>(k)]));
  }

  const std::uint64_t vector_count = count / 4 * 4;
  alignas(32) long long codes[4];
  for (std::uint64_t i = 0; i < vector_count; i += 4) {
    const __m256i index =
        _mm256_add_epi64(_mm256_set1_epi64x(static_cast<long long>(first + i)), lane_offsets);
    const Philox4Lanes w = philox_lanes(index, 0, 0, keys);

    // cls = 1 (decoy) where word0 < decoy threshold.
    const __m256i is_decoy = _mm256_cmpgt_epi64(decoy_thr, w.w0);
    const __m256i cls = _mm256_and_si256(is_decoy, one);

    // photons = levels - #{k : word1 < threshold_k}
    __m256i photons = _mm256_set1_epi64x(levels);
    for (int k = 0; k < levels; ++k) {
      const __m256i thr = _mm256_blendv_epi8(signal_thr[k], decoy_thr_k[k], is_decoy);
      photons = _mm256_add_epi64(photons, _mm256_cmpgt_epi64(thr, w.w1));
    }

    const __m256i alice = _mm256_and_si256(w.w2, three);
    const __m256i bob = _mm256_and_si256(_mm256_srli_epi64(w.w2, 2), three);
    const __m256i diff = _mm256_and_si256(_mm256_sub_epi64(alice, bob), three);

    // Row index (cls * 4 + diff) * (levels + 1) + photons; the product stays
    // below 2^32 so the 32-bit multiply is exact.
    const __m256i row = _mm256_add_epi64(_mm256_slli_epi64(cls, 2), diff);
    const __m256i slot = _mm256_add_epi64(_mm256_mul_epu32(row, row_stride), photons);
    const __m256i thr = _mm256_i64gather_epi64(click_table, slot, 8);
    const __m256i clicked = _mm256_cmpgt_epi64(thr, uniform60_lanes(w));

    const __m256i bin = _mm256_blendv_epi8(photons, three, _mm256_cmpgt_epi64(photons, three));
    __m256i code = _mm256_or_si256(cls, _mm256_slli_epi64(bin, 1));
    code = _mm256_or_si256(code, _mm256_slli_epi64(_mm256_and_si256(clicked, one), 3));
    code = _mm256_or_si256(code, _mm256_slli_epi64(diff, 4));
    _mm256_store_si256(reinterpret_cast<__m256i*>(codes), code);
    ++hist[static_cast<std::size_t>(codes[0])];
    ++hist[static_cast<std::size_t>(codes[1])];
    ++hist[static_cast<std::size_t>(codes[2])];
    ++hist[static_cast<std::size_t>(codes[3])];
  }
  if (vector_count < count) {
    accumulate_pulses_scalar(tables, seed, first + vector_count, count - vector_count, hist);
  }
}

std::uint64_t count_bernoulli_avx2(std::uint64_t seed, RandomDomain domain,
                                   std::uint32_t stream, std::uint64_t first,
                                   std::uint64_t count, std::uint64_t threshold60) {
  const RoundKeys keys(philox_key(seed));
  const __m256i thr = _mm256_set1_epi64x(static_cast<long long>(threshold60));
  const __m256i lane_offsets = _mm256_setr_epi64x(0, 1, 2, 3);
  __m256i hits = _mm256_setzero_si256();

  const std::uint64_t vector_count = count / 4 * 4;
  for (std::uint64_t i = 0; i < vector_count; i += 4) {
    const __m256i index =
        _mm256_add_epi64(_mm256_set1_epi64x(static_cast<long long>(first + i)), lane_offsets);
    const Philox4Lanes w = philox_lanes(index, static_cast<std::uint32_t>(domain), stream, keys);
    hits = _mm256_sub_epi64(hits, _mm256_cmpgt_epi64(thr, uniform60_lanes(w)));
  }
  alignas(32) long long lanes[4];
  _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), hits);
  std::uint64_t total = static_cast<std::uint64_t>(lanes[0] + lanes[1] + lanes[2] + lanes[3]);
  if (vector_count < count) {
    total += count_bernoulli_scalar(seed, domain, stream, first + vector_count,
                                    count - vector_count, threshold60);
  }
  return total;
}

}  // namespace qkd::detail
