#include "qkd/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace qkd {

std::string_view to_string(Isa isa) {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(QKD_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

Isa best_isa() {
  const char* force = std::getenv("QKD_FORCE_SCALAR");
  if (force != nullptr && std::strcmp(force, "0") != 0 && *force != '\0') return Isa::scalar;
  return isa_available(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

std::vector<Isa> available_isas() {
  std::vector<Isa> out{Isa::scalar};
  if (isa_available(Isa::avx2)) out.push_back(Isa::avx2);
  return out;
}

void accumulate_pulses(Isa isa, const PulseTables& tables, std::uint64_t seed,
                       std::uint64_t first, std::uint64_t count, PulseHistogram& hist) {
#if defined(QKD_HAVE_AVX2_KERNELS)
  if (isa == Isa::avx2 && isa_available(Isa::avx2)) {
    detail::accumulate_pulses_avx2(tables, seed, first, count, hist);
    return;
  }
#endif
  (void)isa;
  detail::accumulate_pulses_scalar(tables, seed, first, count, hist);
}

std::uint64_t count_bernoulli(Isa isa, std::uint64_t seed, RandomDomain domain,
                              std::uint32_t stream, std::uint64_t first,
                              std::uint64_t count, std::uint64_t threshold60) {
#if defined(QKD_HAVE_AVX2_KERNELS)
  if (isa == Isa::avx2 && isa_available(Isa::avx2)) {
    return detail::count_bernoulli_avx2(seed, domain, stream, first, count, threshold60);
  }
#endif
  (void)isa;
  return detail::count_bernoulli_scalar(seed, domain, stream, first, count, threshold60);
}

}  // namespace qkd
