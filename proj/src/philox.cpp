#include "qkd/philox.hpp"

#include <algorithm>
#include <cmath>

namespace qkd {

PhiloxWords philox4x32(PhiloxWords c, PhiloxKey k) {
  for (int round = 0; round < kPhiloxRounds; ++round) {
    if (round > 0) {
      k[0] += kPhiloxW0;
      k[1] += kPhiloxW1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c[2];
    c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0],
         static_cast<std::uint32_t>(p1),
         static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1],
         static_cast<std::uint32_t>(p0)};
  }
  return c;
}

std::uint64_t probability_threshold60(double p) {
  p = std::clamp(p, 0.0, 1.0);
  return static_cast<std::uint64_t>(std::floor(p * kTwo60));
}

}  // namespace qkd
