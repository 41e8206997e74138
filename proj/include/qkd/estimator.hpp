#pragma once

// Two-intensity decoy-state security bounds: finite-size decoy correction,
// single-photon yield lower bound, single-photon error upper bound and the
// secure key rate lower bound. Everything here is a pure function.

#include <cstdint>
#include <optional>
#include <string>

#include "qkd/error.hpp"

namespace qkd {

struct ProtocolParams {
  double mu = 0.6;        // signal mean photon number
  double nu = 0.2;        // decoy mean photon number
  double q = 0.5;         // sifting factor, 1/2 for BB84
  double f_ec = 1.2;      // error-correction inefficiency
  double u_alpha = 10.0;  // statistical fluctuation multiplier
  double n_mu = 1e9;      // emitted signal pulses
  double n_nu = 1e9;      // emitted decoy pulses

  // Throws Error(validation) when an invariant is violated.
  void validate() const;
};

// One row of measured statistics. Rates are clicks per emitted pulse of the
// class; QBERs are fractions of sifted bits in error.
struct MeasuredStats {
  double length_km = 0.0;
  double s_mu = 0.0;
  double e_mu = 0.0;
  double s_nu = 0.0;
  double e_nu = 0.0;

  void validate() const;
  // s_mu > s_nu is expected for physical data with mu > nu; violations are
  // flagged by the caller, not rejected.
  bool gains_ordered() const { return s_mu > s_nu; }
};

struct SecurityBounds {
  double s_nu_lower = 0.0;
  double s1_lower = 0.0;
  // Absent when s1_lower <= 0: no single-photon error bound exists then.
  std::optional<double> e1_upper;
  double r_lower = 0.0;
  bool secure = false;
};

// Result of analysing one row: either bounds, or the cause of failure.
struct RowAnalysis {
  MeasuredStats stats;
  std::optional<SecurityBounds> bounds;
  std::optional<ErrorCode> cause;
  std::string message;

  bool ok() const { return bounds.has_value(); }
};

double binary_entropy(double p);

double s_nu_lower(double s_nu, double n_nu, double u_alpha);

double s1_lower_bound(const ProtocolParams& params, const MeasuredStats& stats);

double e1_upper_bound(const ProtocolParams& params, const MeasuredStats& stats,
                      double s1_lower);

// Literal key-rate expression; e1_upper must lie in [0, 1].
double key_rate(const ProtocolParams& params, const MeasuredStats& stats,
                double s1_lower, double e1_upper);

// Composes the bounds for one row. The single-photon term of the key rate is
// only credited when s1_lower > 0 and e1_upper < 1/2; otherwise r_lower is
// the bare error-correction cost, which keeps r_lower continuous across the
// point where the bound stops being useful.
RowAnalysis analyze_row(const ProtocolParams& params, const MeasuredStats& stats);

}  // namespace qkd
