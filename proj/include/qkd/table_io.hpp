#pragma once

// Header-bearing comma-delimited tables and flat key=value files.
// Lines starting with '#' are comments; blank lines are ignored.
// Numbers are written in shortest round-trip form.

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qkd/estimator.hpp"
#include "qkd/link_model.hpp"

namespace qkd {

std::string format_double(double value);

// Whole-field parse; throws Error(parse) naming source and line.
double parse_double(std::string_view text, std::string_view source, int line);

inline constexpr std::string_view kMeasuredColumns = "length_km,s_mu,e_mu,s_nu,e_nu";
inline constexpr std::string_view kBoundsColumns =
    "length_km,s_nu_lower,s1_lower,e1_upper,r_lower,secure,diagnostic";

// Columns may appear in any order but all five are required. Rows that
// break MeasuredStats invariants are rejected with their line number.
std::vector<MeasuredStats> read_measured_table(std::istream& in,
                                               std::string_view source = "input");
void write_measured_table(std::ostream& out, std::span<const MeasuredStats> rows);

struct BoundsRow {
  double length_km = 0.0;
  std::optional<double> s_nu_lower;
  std::optional<double> s1_lower;
  std::optional<double> e1_upper;
  std::optional<double> r_lower;
  bool secure = false;
  std::string diagnostic;  // "ok", a warning, or the failure cause

  friend bool operator==(const BoundsRow&, const BoundsRow&) = default;
};

BoundsRow to_bounds_row(const RowAnalysis& row);
void write_bounds_table(std::ostream& out, std::span<const BoundsRow> rows);
std::vector<BoundsRow> read_bounds_table(std::istream& in, std::string_view source = "input");

void write_sweep(std::ostream& out, const LengthSweep& sweep);

struct KeyValue {
  std::string key;
  std::string value;
  int line = 0;
};

std::vector<KeyValue> read_key_values(std::istream& in, std::string_view source = "input");

}  // namespace qkd
