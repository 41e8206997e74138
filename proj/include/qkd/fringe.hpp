#pragma once

// Active phase compensation: Bob scans his modulator phase against strong
// reference pulses, fits the single-detector fringe and places his four
// working points relative to the fitted constructive peak.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "qkd/kernels.hpp"
#include "qkd/link_model.hpp"

namespace qkd {

struct ScanCurve {
  std::vector<double> offsets;  // Bob phase settings, radians
  // Detected counts per setting. Sampled scans hold integers; noiseless
  // scans hold the expected counts.
  std::vector<double> counts;
  std::uint64_t pulses_per_point = 0;
  bool saturated = false;  // peak click probability >= 0.999

  // Throws insufficient_scan_range / validation on malformed curves.
  void validate() const;
};

struct ScanSettings {
  // 0 selects the intensity whose peak click probability is 1/2.
  double strong_mean_photons = 0.0;
  std::vector<double> offsets;  // empty selects default_scan_offsets()
  std::uint64_t pulses_per_point = 100'000;
  std::uint64_t seed = 1;
  double length_km = 0.0;
  double true_phase_zero = 0.0;  // offset of the constructive peak
  bool noiseless = false;
};

struct FringeFit {
  double amplitude = 0.0;       // mean click probability over the scan
  double visibility_est = 0.0;  // in [0, 1]
  double phase_zero = 0.0;      // in [0, 2pi)
  double residual = 0.0;        // RMS of click-fraction residuals
  double visibility_stderr = 0.0;
};

// n equally spaced offsets covering [0, 2pi).
std::vector<double> default_scan_offsets(int n = 64);

// Strong-pulse mean photon number whose peak click probability is `peak`.
double strong_mean_for_peak(const LinkModel& model, double length_km, double peak);

// Phase coverage of a grid including the final spacing; a full period for
// equally spaced grids over [0, 2pi).
double scan_coverage(const std::vector<double>& offsets);

ScanCurve simulate_scan(const LinkModel& model, const ScanSettings& settings,
                        Isa isa = best_isa());

// Fits a * (1 + v cos(phi - phi0)) to the mean detected photon number
// -ln(1 - f) of each point, which undoes the exponential saturation of the
// click law. Initialised from the first Fourier harmonic, refined by linear
// least squares on (a, a v cos phi0, a v sin phi0).
FringeFit fit_fringe(const ScanCurve& curve);

std::array<double, 4> working_points(const FringeFit& fit);

// Scan pulse slots divided by the key-session length in pulse slots.
double calibration_overhead(const ScanCurve& curve, double session_pulses);

double wrap_phase(double phase);  // into [0, 2pi)

void write_scan_curve(std::ostream& out, const ScanCurve& curve);
ScanCurve read_scan_curve(std::istream& in);

}  // namespace qkd
