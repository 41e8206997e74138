#include "qkd/reference_data.hpp"

#include <sstream>

#include "qkd/table_io.hpp"

namespace qkd {

namespace {

constexpr std::string_view kCsv =
    "# Measured decoy-state statistics of a single-detector phase-coding link,\n"
    "# mu = 0.6, nu = 0.2, 1e9 signal and 1e9 decoy pulses per length.\n"
    "# Rates are clicks per emitted pulse; QBERs are fractions of sifted bits.\n"
    "length_km,s_mu,e_mu,s_nu,e_nu\n"
    "123.6,3.8e-5,0.0199,1.36e-5,0.041\n"
    "108,7.1e-5,0.016,2.52e-5,0.027\n"
    "97,1.24e-4,0.015,4.3e-5,0.017\n"
    "83.7,1.57e-4,0.0145,5.28e-5,0.019\n"
    "62.1,2.88e-4,0.0108,1.08e-4,0.0225\n"
    "49.2,8.6e-4,0.0103,2.9e-4,0.020\n"
    ;

}  // namespace

std::string_view reference_measurements_csv() { return kCsv; }

std::vector<MeasuredStats> reference_measurements() {
  std::istringstream in{std::string(kCsv)};
  return read_measured_table(in, "reference_measurements.csv");
}

const LinkFit& reference_link_fit() {
  static const LinkFit fit = [] {
    const auto table = reference_measurements();
    return fit_link(table, ProtocolParams{});
  }();
  return fit;
}

}  // namespace qkd
