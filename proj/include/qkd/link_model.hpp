#pragma once

// Analytic model of the fiber link and the single-detector interferometric
// receiver: transmittance, per-phase click probability and the expected
// gain / QBER of a pulse class.

#include <span>
#include <vector>

#include "qkd/estimator.hpp"

namespace qkd {

struct LinkModel {
  double alpha_db_per_km = 0.2;
  double excess_loss_db = 0.0;
  double eta_det = 0.1;
  double y0 = 5e-7;
  double visibility = 0.99;

  void validate() const;
};

// eta_det * 10^(-(alpha * L + excess) / 10).
double transmittance(const LinkModel& model, double length_km);

// Poissonian click probability for a coherent pulse reaching the single
// detector at interferometer phase difference phase_diff.
double click_probability(const LinkModel& model, double mean_photons,
                         double phase_diff, double length_km);

// Click probability for exactly `photons` photons at the same phase; its
// Poisson mixture is click_probability.
double click_probability_n(const LinkModel& model, int photons,
                           double phase_diff, double length_km);

// Average over the four equiprobable phase differences {0, pi/2, pi, 3pi/2}.
double expected_gain(const LinkModel& model, double mean_photons, double length_km);

// Fraction of matched-basis clicks landing at the destructive phase.
double expected_qber(const LinkModel& model, double mean_photons, double length_km);

// Asymptotic statistics of a link at one length for both intensity classes.
MeasuredStats expected_stats(const LinkModel& model, const ProtocolParams& params,
                             double length_km);

struct FitResidual {
  double length_km = 0.0;
  double log_gain_mu = 0.0;  // ln(model / measured)
  double log_gain_nu = 0.0;
  double qber_mu = 0.0;      // model - measured
};

struct LinkFit {
  LinkModel model;
  double objective = 0.0;  // sum of squared residuals
  std::vector<FitResidual> residuals;
};

// Least-squares fit of attenuation, lumped loss and visibility to a
// measured table. y0 and eta_det are taken from `prior`; the lumped
// coupling is stored in excess_loss_db. Deterministic: a fixed grid search
// seeds a Levenberg-Marquardt refinement.
LinkFit fit_link(std::span<const MeasuredStats> table, const ProtocolParams& params,
                 const LinkModel& prior = LinkModel{});

// Objective used by fit_link, exposed for brute-force checks.
double link_fit_objective(std::span<const MeasuredStats> table,
                          const ProtocolParams& params, const LinkModel& model);

struct LengthSweep {
  std::vector<double> lengths;
  std::vector<double> rates;
  // Largest length with a positive rate; when the rate turns non-positive
  // inside the grid the crossing is refined by bisection.
  std::optional<double> cutoff_km;
  bool cutoff_bracketed = false;
};

// Key rate of the expected statistics at one length (the continuous r_lower
// of analyze_row). Non-analyzable rows yield the bare error-correction cost.
double expected_key_rate(const LinkModel& model, const ProtocolParams& params,
                         double length_km);

LengthSweep sweep_key_rate(const LinkModel& model, const ProtocolParams& params,
                           std::span<const double> grid);

// Uniform grid [start, stop] with the given step, endpoint included when it
// lands on the grid.
std::vector<double> length_grid(double start, double stop, double step);

}  // namespace qkd
