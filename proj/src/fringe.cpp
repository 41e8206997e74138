#include "qkd/fringe.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

namespace qkd {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kMinScanPoints = 8;
constexpr double kSaturationPeak = 0.999;

}  // namespace

double wrap_phase(double phase) {
  double w = std::fmod(phase, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

std::vector<double> default_scan_offsets(int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(kTwoPi * i / n);
  return out;
}

double strong_mean_for_peak(const LinkModel& model, double length_km, double peak) {
  const double eta = transmittance(model, length_km);
  if (!(eta > 0.0) || !(peak > model.y0 && peak < 1.0)) {
    throw Error(ErrorCode::validation, "scan: peak click probability unreachable");
  }
  return 2.0 * std::log((1.0 - model.y0) / (1.0 - peak)) / (eta * (1.0 + model.visibility));
}

double scan_coverage(const std::vector<double>& offsets) {
  if (offsets.size() < 2) return 0.0;
  const double span = offsets.back() - offsets.front();
  return span + span / static_cast<double>(offsets.size() - 1);
}

void ScanCurve::validate() const {
  if (offsets.size() != counts.size()) {
    throw Error(ErrorCode::validation, "scan: offsets and counts differ in length");
  }
  for (std::size_t i = 1; i < offsets.size(); ++i) {
    if (!(offsets[i] > offsets[i - 1])) {
      throw Error(ErrorCode::validation, "scan: offsets must be strictly increasing");
    }
  }
  if (offsets.size() < static_cast<std::size_t>(kMinScanPoints) ||
      scan_coverage(offsets) < kTwoPi - 1e-9) {
    throw Error(ErrorCode::insufficient_scan_range,
                "scan: need at least 8 points covering a full 2pi period");
  }
  if (pulses_per_point < 1) throw Error(ErrorCode::validation, "scan: pulses_per_point must be >= 1");
  for (double c : counts) {
    if (!(c >= 0.0 && c <= static_cast<double>(pulses_per_point))) {
      throw Error(ErrorCode::validation, "scan: counts must lie in [0, pulses_per_point]");
    }
  }
}

ScanCurve simulate_scan(const LinkModel& model, const ScanSettings& settings, Isa isa) {
  model.validate();
  ScanCurve curve;
  curve.offsets = settings.offsets.empty() ? default_scan_offsets() : settings.offsets;
  curve.pulses_per_point = settings.pulses_per_point;
  curve.counts.assign(curve.offsets.size(), 0.0);
  // Validates the grid before any sampling.
  curve.validate();

  const double strong = settings.strong_mean_photons > 0.0
                            ? settings.strong_mean_photons
                            : strong_mean_for_peak(model, settings.length_km, 0.5);
  const auto n = static_cast<double>(settings.pulses_per_point);
  double peak = 0.0;
  for (std::size_t i = 0; i < curve.offsets.size(); ++i) {
    const double p = click_probability(model, strong, curve.offsets[i] - settings.true_phase_zero,
                                       settings.length_km);
    peak = std::max(peak, p);
    if (settings.noiseless) {
      curve.counts[i] = p * n;
    } else {
      curve.counts[i] = static_cast<double>(
          count_bernoulli(isa, settings.seed, RandomDomain::fringe_scan,
                          static_cast<std::uint32_t>(i), 0, settings.pulses_per_point,
                          probability_threshold60(p)));
    }
  }
  curve.saturated = peak >= kSaturationPeak;
  return curve;
}

FringeFit fit_fringe(const ScanCurve& curve) {
  curve.validate();
  const auto n_points = static_cast<Eigen::Index>(curve.offsets.size());
  const auto pulses = static_cast<double>(curve.pulses_per_point);

  Eigen::VectorXd fraction(n_points);
  Eigen::VectorXd y(n_points);
  Eigen::MatrixXd design(n_points, 3);
  for (Eigen::Index i = 0; i < n_points; ++i) {
    const double phi = curve.offsets[static_cast<std::size_t>(i)];
    fraction[i] = curve.counts[static_cast<std::size_t>(i)] / pulses;
    // A point that clicked on every pulse carries no finite photon number.
    const double f = std::min(fraction[i], 1.0 - 0.5 / pulses);
    y[i] = -std::log1p(-f);
    design.row(i) << 1.0, std::cos(phi), std::sin(phi);
  }

  // First-harmonic estimate; exact for equally spaced full-period grids.
  Eigen::Vector3d coef(y.mean(), 2.0 * design.col(1).dot(y) / static_cast<double>(n_points),
                       2.0 * design.col(2).dot(y) / static_cast<double>(n_points));
  // Linear least squares refinement; one Gauss-Newton step from the
  // harmonic estimate lands on the exact minimiser.
  const Eigen::Matrix3d normal = design.transpose() * design;
  const Eigen::Vector3d gradient = design.transpose() * (y - design * coef);
  coef += normal.ldlt().solve(gradient);

  FringeFit fit;
  fit.amplitude = fraction.mean();
  const double a = coef[0];
  const double harmonic = std::hypot(coef[1], coef[2]);
  if (a > 0.0) {
    // v = |harmonic| / a is never negative: a sign flip of v is absorbed
    // into phase_zero by atan2.
    fit.visibility_est = std::clamp(harmonic / a, 0.0, 1.0);
    fit.phase_zero = wrap_phase(std::atan2(coef[2], coef[1]));
  }

  const Eigen::VectorXd model_y = design * coef;
  double sq = 0.0;
  for (Eigen::Index i = 0; i < n_points; ++i) {
    const double r = fraction[i] - (1.0 - std::exp(-model_y[i]));
    sq += r * r;
  }
  fit.residual = std::sqrt(sq / static_cast<double>(n_points));

  const double dof = static_cast<double>(n_points - 3);
  const double sigma2 = (y - model_y).squaredNorm() / dof;
  if (a > 0.0 && harmonic > 0.0) {
    const Eigen::Matrix3d cov = sigma2 * normal.inverse();
    const Eigen::Vector3d grad(-harmonic / (a * a), coef[1] / (a * harmonic),
                               coef[2] / (a * harmonic));
    fit.visibility_stderr = std::sqrt(std::max(0.0, grad.dot(cov * grad)));
  } else if (a > 0.0) {
    fit.visibility_stderr = std::sqrt(sigma2 * 2.0 / static_cast<double>(n_points)) / a;
  }
  return fit;
}

std::array<double, 4> working_points(const FringeFit& fit) {
  std::array<double, 4> out{};
  for (int k = 0; k < 4; ++k) {
    out[static_cast<std::size_t>(k)] = wrap_phase(fit.phase_zero + k * std::numbers::pi / 2.0);
  }
  return out;
}

double calibration_overhead(const ScanCurve& curve, double session_pulses) {
  if (!(session_pulses > 0.0)) {
    throw Error(ErrorCode::validation, "overhead: session length must be positive");
  }
  return static_cast<double>(curve.offsets.size()) *
         static_cast<double>(curve.pulses_per_point) / session_pulses;
}

}  // namespace qkd
