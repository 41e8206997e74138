#include "qkd/estimator.hpp"

#include <cmath>
#include <sstream>

namespace qkd {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::domain: return "domain error";
    case ErrorCode::statistics_insufficient: return "statistics insufficient";
    case ErrorCode::no_single_photon_bound: return "no single-photon bound";
    case ErrorCode::unidentifiable: return "unidentifiable";
    case ErrorCode::insufficient_scan_range: return "insufficient scan range";
    case ErrorCode::config_mismatch: return "configuration mismatch";
    case ErrorCode::parse: return "parse error";
    case ErrorCode::validation: return "validation error";
  }
  return "unknown error";
}

namespace {

bool is_fraction(double x) { return x >= 0.0 && x <= 1.0; }

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorCode::validation, what);
}

}  // namespace

void ProtocolParams::validate() const {
  if (!(nu > 0.0 && nu < mu)) invalid("protocol: require 0 < nu < mu");
  if (!(q > 0.0 && q <= 1.0)) invalid("protocol: require q in (0, 1]");
  if (!(f_ec >= 1.0)) invalid("protocol: require f_ec >= 1");
  if (!(u_alpha >= 0.0)) invalid("protocol: require u_alpha >= 0");
  if (!(n_mu >= 1.0) || !(n_nu >= 1.0)) invalid("protocol: require n_mu, n_nu >= 1");
}

void MeasuredStats::validate() const {
  if (!(length_km >= 0.0)) invalid("stats: length_km must be >= 0");
  if (!is_fraction(s_mu)) invalid("stats: s_mu must lie in [0, 1]");
  if (!is_fraction(e_mu)) invalid("stats: e_mu must lie in [0, 1]");
  if (!is_fraction(s_nu)) invalid("stats: s_nu must lie in [0, 1]");
  if (!is_fraction(e_nu)) invalid("stats: e_nu must lie in [0, 1]");
}

double binary_entropy(double p) {
  if (!is_fraction(p)) {
    throw Error(ErrorCode::domain, "binary_entropy: p outside [0, 1]");
  }
  if (p == 0.0 || p == 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

double s_nu_lower(double s_nu, double n_nu, double u_alpha) {
  if (!(n_nu >= 1.0) || !(u_alpha >= 0.0) || !(s_nu >= 0.0)) {
    throw Error(ErrorCode::domain, "s_nu_lower: invalid arguments");
  }
  if (!(s_nu * n_nu > 0.0)) {
    throw Error(ErrorCode::statistics_insufficient,
                "s_nu_lower: no decoy detections");
  }
  const double corrected = s_nu * (1.0 - u_alpha / std::sqrt(n_nu * s_nu));
  if (!(corrected > 0.0)) {
    std::ostringstream msg;
    msg << "s_nu_lower: " << n_nu * s_nu
        << " decoy detections are too few for u_alpha = " << u_alpha;
    throw Error(ErrorCode::statistics_insufficient, msg.str());
  }
  return corrected;
}

double s1_lower_bound(const ProtocolParams& params, const MeasuredStats& stats) {
  const double mu = params.mu;
  const double nu = params.nu;
  const double s_nu_l = s_nu_lower(stats.s_nu, params.n_nu, params.u_alpha);
  // Kept in the printed form, including (mu^2 - nu^2) / (mu^2 / 2).
  const double decoy_term = s_nu_l * std::exp(nu);
  const double signal_term = stats.s_mu * std::exp(mu) * (nu * nu) / (mu * mu);
  const double vacuum_term = stats.e_mu * stats.s_mu * std::exp(mu) *
                             (mu * mu - nu * nu) / (0.5 * mu * mu);
  return mu / (mu * nu - nu * nu) * (decoy_term - signal_term - vacuum_term);
}

double e1_upper_bound(const ProtocolParams& params, const MeasuredStats& stats,
                      double s1_lower) {
  if (!(s1_lower > 0.0)) {
    throw Error(ErrorCode::no_single_photon_bound,
                "e1_upper_bound: single-photon yield bound is not positive");
  }
  return stats.e_mu * stats.s_mu /
         (s1_lower * params.mu * std::exp(-params.mu));
}

double key_rate(const ProtocolParams& params, const MeasuredStats& stats,
                double s1_lower, double e1_upper) {
  const double ec_cost = stats.s_mu * params.f_ec * binary_entropy(stats.e_mu);
  const double single_photon = s1_lower * params.mu * std::exp(-params.mu) *
                               (1.0 - binary_entropy(e1_upper));
  return params.q * (-ec_cost + single_photon);
}

RowAnalysis analyze_row(const ProtocolParams& params, const MeasuredStats& stats) {
  RowAnalysis out;
  out.stats = stats;
  try {
    params.validate();
    stats.validate();

    SecurityBounds b;
    b.s_nu_lower = s_nu_lower(stats.s_nu, params.n_nu, params.u_alpha);
    b.s1_lower = s1_lower_bound(params, stats);
    if (b.s1_lower > 0.0) b.e1_upper = e1_upper_bound(params, stats, b.s1_lower);

    const bool credited = b.e1_upper.has_value() && *b.e1_upper < 0.5;
    b.r_lower = credited ? key_rate(params, stats, b.s1_lower, *b.e1_upper)
                         : key_rate(params, stats, 0.0, 0.0);
    b.secure = credited && b.r_lower > 0.0;
    out.bounds = b;
  } catch (const Error& e) {
    out.cause = e.code();
    out.message = e.what();
  }
  return out;
}

}  // namespace qkd
