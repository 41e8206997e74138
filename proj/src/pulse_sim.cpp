#include "qkd/pulse_sim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <thread>
#include <vector>

namespace qkd {
namespace {

constexpr double kMaxSimMeanPhotons = 20.0;
constexpr std::uint64_t kChunkPulses = std::uint64_t{1} << 22;

std::uint64_t fnv1a(std::uint64_t h, double value) {
  const auto bits = std::bit_cast<std::uint64_t>(value);
  for (int i = 0; i < 8; ++i) {
    h ^= (bits >> (8 * i)) & 0xffu;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

void SimConfig::validate() const {
  if (n_pulses < 1) throw Error(ErrorCode::validation, "simulate: n_pulses must be >= 1");
  if (!(decoy_fraction > 0.0 && decoy_fraction < 1.0)) {
    throw Error(ErrorCode::validation, "simulate: decoy_fraction must lie in (0, 1)");
  }
  for (double m : {params.mu, params.nu}) {
    if (!(m >= 0.0 && m <= kMaxSimMeanPhotons)) {
      throw Error(ErrorCode::validation, "simulate: mean photon numbers must lie in [0, 20]");
    }
  }
  if (!(length_km >= 0.0)) throw Error(ErrorCode::validation, "simulate: length_km must be >= 0");
  if (!std::isfinite(phase_error)) {
    throw Error(ErrorCode::validation, "simulate: phase_error must be finite");
  }
  link.validate();
}

std::uint64_t SimConfig::tag() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : {decoy_fraction, params.mu, params.nu, link.alpha_db_per_km,
                   link.excess_loss_db, link.eta_det, link.y0, link.visibility,
                   length_km, phase_error}) {
    h = fnv1a(h, v);
  }
  return h;
}

PulseTables make_pulse_tables(const SimConfig& config) {
  config.validate();
  PulseTables t;
  t.decoy_threshold =
      static_cast<std::uint64_t>(std::llround(config.decoy_fraction * kTwo32));

  const std::array<double, 2> means{config.params.mu, config.params.nu};
  int levels = 1;
  for (std::size_t cls = 0; cls < 2; ++cls) {
    auto& thresholds = t.poisson_thresholds[cls];
    thresholds.fill(static_cast<std::uint64_t>(kTwo32));
    double term = std::exp(-means[cls]);
    double cdf = 0.0;
    for (int k = 0; k < kMaxPhotonLevels; ++k) {
      if (k > 0) term *= means[cls] / k;
      cdf += term;
      const auto thr = static_cast<std::uint64_t>(std::llround(std::min(cdf, 1.0) * kTwo32));
      thresholds[static_cast<std::size_t>(k)] = thr;
      levels = std::max(levels, k + 1);
      if (thr >= static_cast<std::uint64_t>(kTwo32)) break;
    }
  }
  t.photon_levels = levels;

  t.click_thresholds.resize(static_cast<std::size_t>(2 * 4 * (levels + 1)));
  for (int cls = 0; cls < 2; ++cls) {
    for (int diff = 0; diff < 4; ++diff) {
      const double phase = diff * std::numbers::pi / 2.0 + config.phase_error;
      for (int n = 0; n <= levels; ++n) {
        const double p = click_probability_n(config.link, n, phase, config.length_km);
        t.click_thresholds[static_cast<std::size_t>((cls * 4 + diff) * (levels + 1) + n)] =
            probability_threshold60(p);
      }
    }
  }
  return t;
}

PulseRecord sample_pulse(const SimConfig& config, const PulseTables& tables,
                         std::uint64_t index) {
  const PhiloxWords w = philox4x32(
      philox_counter(index, RandomDomain::session_pulse, 0), philox_key(config.seed));
  const PulseDraw d = decode_pulse(tables, w);
  PulseRecord r{};
  r.intensity_class = d.cls == 1 ? IntensityClass::decoy : IntensityClass::signal;
  r.alice_phase = d.alice * std::numbers::pi / 2.0;
  r.bob_phase = d.bob * std::numbers::pi / 2.0;
  r.photon_count = d.photons;
  r.clicked = d.clicked;
  r.basis_matched = d.phase_diff % 2 == 0;
  // Phases {0, pi/2} carry bit 0, {pi, 3pi/2} bit 1.
  const int alice_bit = d.alice / 2;
  const int bob_bit = d.bob / 2;
  r.bit_error = r.clicked && r.basis_matched && alice_bit != bob_bit;
  return r;
}

SimTally tally_from_histogram(const PulseHistogram& hist, std::uint64_t config_tag) {
  SimTally t;
  t.config_tag = config_tag;
  for (int code = 0; code < kPulseCodes; ++code) {
    const std::uint64_t n = hist[static_cast<std::size_t>(code)];
    if (n == 0) continue;
    const int cls = code & 1;
    const int bin = (code >> 1) & 3;
    const bool clicked = (code & 8) != 0;
    const int diff = (code >> 4) & 3;
    const bool sifted = clicked && diff % 2 == 0;
    const bool error = sifted && diff == 2;

    auto add = [&](ClassCounts& c) {
      c.emitted += n;
      if (clicked) c.clicked += n;
      if (sifted) c.sifted += n;
      if (error) c.errors += n;
    };
    add(t.by_class[static_cast<std::size_t>(cls)]);
    if (cls == 0) add(t.signal_by_photons[static_cast<std::size_t>(bin)]);
  }
  return t;
}

SimTally run_range(const SimConfig& config, std::uint64_t first, std::uint64_t count,
                   Isa isa) {
  const PulseTables tables = make_pulse_tables(config);
  PulseHistogram hist{};
  accumulate_pulses(isa, tables, config.seed, first, count, hist);
  return tally_from_histogram(hist, config.tag());
}

MeasuredStats measured_stats(const SimTally& tally, double length_km) {
  auto ratio = [](std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  MeasuredStats s;
  s.length_km = length_km;
  s.s_mu = ratio(tally.signal().clicked, tally.signal().emitted);
  s.e_mu = ratio(tally.signal().errors, tally.signal().sifted);
  s.s_nu = ratio(tally.decoy().clicked, tally.decoy().emitted);
  s.e_nu = ratio(tally.decoy().errors, tally.decoy().sifted);
  return s;
}

ProtocolParams session_params(const ProtocolParams& base, const SimTally& tally) {
  ProtocolParams p = base;
  p.n_mu = static_cast<double>(std::max<std::uint64_t>(tally.signal().emitted, 1));
  p.n_nu = static_cast<double>(std::max<std::uint64_t>(tally.decoy().emitted, 1));
  return p;
}

SessionResult run_session(const SimConfig& config, Isa isa) {
  config.validate();
  SessionResult r;
  r.tally = run_range(config, 0, config.n_pulses, isa);
  r.stats = measured_stats(r.tally, config.length_km);
  return r;
}

SessionResult run_session_parallel(const SimConfig& config, unsigned threads, Isa isa) {
  config.validate();
  const PulseTables tables = make_pulse_tables(config);
  const std::uint64_t chunks = (config.n_pulses + kChunkPulses - 1) / kChunkPulses;
  threads = std::max(1u, static_cast<unsigned>(std::min<std::uint64_t>(threads, chunks)));

  // Worker w takes chunks w, w + threads, ...; histograms are summed after
  // the join, which is the only synchronization point.
  std::vector<PulseHistogram> partial(threads, PulseHistogram{});
  auto work = [&](unsigned w) {
    for (std::uint64_t c = w; c < chunks; c += threads) {
      const std::uint64_t first = c * kChunkPulses;
      const std::uint64_t count = std::min(kChunkPulses, config.n_pulses - first);
      accumulate_pulses(isa, tables, config.seed, first, count, partial[w]);
    }
  };
  std::vector<std::jthread> pool;
  for (unsigned w = 1; w < threads; ++w) pool.emplace_back(work, w);
  work(0);
  pool.clear();

  std::vector<SimTally> parts;
  for (const auto& h : partial) parts.push_back(tally_from_histogram(h, config.tag()));
  SessionResult r;
  r.tally = merge_tallies(parts);
  r.stats = measured_stats(r.tally, config.length_km);
  return r;
}

SimTally merge_tallies(std::span<const SimTally> parts) {
  if (parts.empty()) throw Error(ErrorCode::validation, "merge_tallies: empty list");
  SimTally out;
  bool tagged = false;
  for (const SimTally& part : parts) {
    if (part.empty()) continue;
    if (!tagged) {
      out.config_tag = part.config_tag;
      tagged = true;
    } else if (part.config_tag != out.config_tag) {
      throw Error(ErrorCode::config_mismatch, "merge_tallies: configurations differ");
    }
    auto add = [](ClassCounts& a, const ClassCounts& b) {
      a.emitted += b.emitted;
      a.clicked += b.clicked;
      a.sifted += b.sifted;
      a.errors += b.errors;
    };
    for (std::size_t i = 0; i < 2; ++i) add(out.by_class[i], part.by_class[i]);
    for (std::size_t i = 0; i < 4; ++i) add(out.signal_by_photons[i], part.signal_by_photons[i]);
  }
  if (!tagged) out.config_tag = parts.front().config_tag;
  return out;
}

SoundnessReport soundness_report(const SimTally& tally, const RowAnalysis& analysis) {
  SoundnessReport r;
  r.analysis = analysis;
  const ClassCounts& one = tally.signal_by_photons[1];
  if (one.emitted > 0) {
    r.true_s1 = static_cast<double>(one.clicked) / static_cast<double>(one.emitted);
  }
  if (one.sifted > 0) {
    r.true_e1 = static_cast<double>(one.errors) / static_cast<double>(one.sifted);
  }
  if (!analysis.ok()) {
    r.vacuous = true;
    return r;
  }
  const SecurityBounds& b = *analysis.bounds;
  r.s1_holds = !r.true_s1 || b.s1_lower <= *r.true_s1;
  if (b.e1_upper && r.true_e1) r.e1_holds = *b.e1_upper >= *r.true_e1;
  return r;
}

}  // namespace qkd
