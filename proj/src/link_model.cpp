#include "qkd/link_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace qkd {

void LinkModel::validate() const {
  auto fraction = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!(alpha_db_per_km >= 0.0)) {
    throw Error(ErrorCode::validation, "link: alpha_db_per_km must be >= 0");
  }
  if (!std::isfinite(excess_loss_db)) {
    throw Error(ErrorCode::validation, "link: excess_loss_db must be finite");
  }
  if (!fraction(eta_det)) throw Error(ErrorCode::validation, "link: eta_det must lie in [0, 1]");
  if (!fraction(y0)) throw Error(ErrorCode::validation, "link: y0 must lie in [0, 1]");
  if (!fraction(visibility)) {
    throw Error(ErrorCode::validation, "link: visibility must lie in [0, 1]");
  }
}

double transmittance(const LinkModel& model, double length_km) {
  const double loss_db = model.alpha_db_per_km * length_km + model.excess_loss_db;
  return std::clamp(model.eta_det * std::pow(10.0, -loss_db / 10.0), 0.0, 1.0);
}

double click_probability(const LinkModel& model, double mean_photons,
                         double phase_diff, double length_km) {
  const double eta = transmittance(model, length_km);
  const double fringe = 1.0 + model.visibility * std::cos(phase_diff);
  return 1.0 - (1.0 - model.y0) * std::exp(-eta * mean_photons * fringe / 2.0);
}

double click_probability_n(const LinkModel& model, int photons,
                           double phase_diff, double length_km) {
  const double eta = transmittance(model, length_km);
  const double per_photon =
      std::clamp(eta * (1.0 + model.visibility * std::cos(phase_diff)) / 2.0, 0.0, 1.0);
  return 1.0 - (1.0 - model.y0) * std::pow(1.0 - per_photon, photons);
}

double expected_gain(const LinkModel& model, double mean_photons, double length_km) {
  constexpr double half_pi = std::numbers::pi / 2.0;
  double sum = 0.0;
  for (int k = 0; k < 4; ++k) {
    sum += click_probability(model, mean_photons, k * half_pi, length_km);
  }
  return sum / 4.0;
}

double expected_qber(const LinkModel& model, double mean_photons, double length_km) {
  const double right = click_probability(model, mean_photons, 0.0, length_km);
  const double wrong = click_probability(model, mean_photons, std::numbers::pi, length_km);
  if (right + wrong == 0.0) return 0.0;
  return wrong / (right + wrong);
}

MeasuredStats expected_stats(const LinkModel& model, const ProtocolParams& params,
                             double length_km) {
  MeasuredStats s;
  s.length_km = length_km;
  s.s_mu = expected_gain(model, params.mu, length_km);
  s.e_mu = expected_qber(model, params.mu, length_km);
  s.s_nu = expected_gain(model, params.nu, length_km);
  s.e_nu = expected_qber(model, params.nu, length_km);
  return s;
}

}  // namespace qkd
