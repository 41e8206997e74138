#pragma once

// Pulse-level Monte Carlo of the single-detector two-intensity decoy BB84
// session with ground-truth photon-number bookkeeping.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "qkd/estimator.hpp"
#include "qkd/kernels.hpp"
#include "qkd/link_model.hpp"

namespace qkd {

struct SimConfig {
  std::uint64_t n_pulses = 10'000'000;
  double decoy_fraction = 0.5;
  std::uint64_t seed = 1;
  LinkModel link;
  ProtocolParams params;
  double length_km = 0.0;
  // Residual misalignment of Bob's working points relative to the true
  // fringe zero (radians); 0 for a perfectly calibrated receiver.
  double phase_error = 0.0;

  // Intensity means may be zero here; the estimator's ordering invariant is
  // enforced only when the statistics are analysed.
  void validate() const;
  // Fingerprint of everything except seed and n_pulses; tallies merge only
  // when their tags agree.
  std::uint64_t tag() const;
};

enum class IntensityClass { signal = 0, decoy = 1 };

struct PulseRecord {
  IntensityClass intensity_class;
  double alice_phase;
  double bob_phase;
  int photon_count;
  bool clicked;
  bool basis_matched;
  bool bit_error;
};

struct ClassCounts {
  std::uint64_t emitted = 0;
  std::uint64_t clicked = 0;
  std::uint64_t sifted = 0;
  std::uint64_t errors = 0;

  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

struct SimTally {
  std::uint64_t config_tag = 0;
  std::array<ClassCounts, 2> by_class{};           // signal, decoy
  std::array<ClassCounts, 4> signal_by_photons{};  // n = 0, 1, 2, >= 3

  bool empty() const { return by_class[0].emitted == 0 && by_class[1].emitted == 0; }
  std::uint64_t total_emitted() const { return by_class[0].emitted + by_class[1].emitted; }

  const ClassCounts& signal() const { return by_class[0]; }
  const ClassCounts& decoy() const { return by_class[1]; }

  friend bool operator==(const SimTally&, const SimTally&) = default;
};

SimTally tally_from_histogram(const PulseHistogram& hist, std::uint64_t config_tag);

PulseTables make_pulse_tables(const SimConfig& config);

// One pulse of the session, decoded with the scalar reference path.
PulseRecord sample_pulse(const SimConfig& config, const PulseTables& tables,
                         std::uint64_t index);

// Pulses [first, first + count) of the session defined by `config`.
SimTally run_range(const SimConfig& config, std::uint64_t first, std::uint64_t count,
                   Isa isa = best_isa());

// Empirical statistics of a tally (per emitted pulse / per sifted bit).
MeasuredStats measured_stats(const SimTally& tally, double length_km);

// Protocol parameters with pulse budgets taken from the tally.
ProtocolParams session_params(const ProtocolParams& base, const SimTally& tally);

struct SessionResult {
  SimTally tally;
  MeasuredStats stats;
};

SessionResult run_session(const SimConfig& config, Isa isa = best_isa());

// Splits the session into fixed-size chunks processed by `threads` workers;
// the result is identical to run_session for any thread count.
SessionResult run_session_parallel(const SimConfig& config, unsigned threads,
                                   Isa isa = best_isa());

// Field-wise sum; throws config_mismatch on differing tags (empty tallies
// merge with anything) and validation on an empty list.
SimTally merge_tallies(std::span<const SimTally> parts);

struct SoundnessReport {
  RowAnalysis analysis;
  std::optional<double> true_s1;  // single-photon yield
  std::optional<double> true_e1;  // error rate of sifted single-photon clicks
  bool s1_holds = true;
  std::optional<bool> e1_holds;  // absent when either side is unavailable
  // True when the estimator made no claim (statistics insufficient).
  bool vacuous = false;

  bool sound() const { return s1_holds && e1_holds.value_or(true); }
};

// Ground truth versus the estimator's bounds. The true single-photon
// quantity is the yield (clicks per emitted one-photon signal pulse), the
// quantity that the key rate scales by mu*exp(-mu).
SoundnessReport soundness_report(const SimTally& tally, const RowAnalysis& analysis);

// Plain-text key=value serialization.
void write_tally(std::ostream& out, const SimTally& tally);
SimTally read_tally(std::istream& in);

}  // namespace qkd
