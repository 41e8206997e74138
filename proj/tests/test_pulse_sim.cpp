#include <doctest.h>

#include <cmath>
#include <sstream>
#include <thread>

#include "qkd/pulse_sim.hpp"
#include "qkd/reference_data.hpp"

using namespace qkd;

namespace {

double binomial_sigma(double p, double n) { return std::sqrt(p * (1.0 - p) / n); }

SimConfig fitted_config(double length_km, std::uint64_t pulses, std::uint64_t seed) {
  SimConfig c;
  c.link = reference_link_fit().model;
  c.length_km = length_km;
  c.n_pulses = pulses;
  c.seed = seed;
  return c;
}

void check_consistent(const SimTally& t) {
  for (const ClassCounts& c : t.by_class) {
    CHECK(c.errors <= c.sifted);
    CHECK(c.sifted <= c.clicked);
    CHECK(c.clicked <= c.emitted);
  }
  ClassCounts sum;
  for (const ClassCounts& c : t.signal_by_photons) {
    sum.emitted += c.emitted;
    sum.clicked += c.clicked;
    sum.sifted += c.sifted;
    sum.errors += c.errors;
  }
  CHECK(sum == t.signal());
}

}  // namespace

TEST_CASE("vacuum pulses on a dark-free link never click") {
  SimConfig c;
  c.params.mu = 0.0;
  c.params.nu = 0.0;
  c.link.y0 = 0.0;
  c.n_pulses = 100'000;
  const SessionResult r = run_session(c);
  CHECK(r.tally.signal().clicked == 0);
  CHECK(r.tally.decoy().clicked == 0);
  CHECK(r.tally.total_emitted() == 100'000);
  CHECK(r.stats.s_mu == 0.0);
}

TEST_CASE("empirical gains and error rates match the link model") {
  SimConfig c;
  c.link.eta_det = 1.0;
  c.link.alpha_db_per_km = 0.0;
  c.n_pulses = 1'000'000;
  const SessionResult r = run_session(c);
  check_consistent(r.tally);

  const double n_mu = static_cast<double>(r.tally.signal().emitted);
  const double n_nu = static_cast<double>(r.tally.decoy().emitted);
  const double g_mu = expected_gain(c.link, c.params.mu, 0.0);
  const double g_nu = expected_gain(c.link, c.params.nu, 0.0);
  CHECK(std::abs(r.stats.s_mu - g_mu) <= 3.0 * binomial_sigma(g_mu, n_mu));
  CHECK(std::abs(r.stats.s_nu - g_nu) <= 3.0 * binomial_sigma(g_nu, n_nu));
  const double e_mu = expected_qber(c.link, c.params.mu, 0.0);
  const double sifted = static_cast<double>(r.tally.signal().sifted);
  CHECK(std::abs(r.stats.e_mu - e_mu) <= 3.0 * binomial_sigma(e_mu, sifted));

  // Matched-basis pulses are the phase differences 0 and pi; half of the
  // pulses are decoys.
  double matched = 0.0, all = 0.0;
  for (int d = 0; d < 4; ++d) {
    const double pd = click_probability(c.link, c.params.mu, d * std::numbers::pi / 2, 0.0);
    all += pd;
    if (d % 2 == 0) matched += pd;
  }
  const double clicked = static_cast<double>(r.tally.signal().clicked);
  CHECK(std::abs(sifted / clicked - matched / all) <=
        3.0 * binomial_sigma(matched / all, clicked));
  const double total = static_cast<double>(c.n_pulses);
  CHECK(std::abs(n_nu / total - 0.5) <= 3.0 * binomial_sigma(0.5, total));
}

TEST_CASE("photon-number bins follow the Poisson law") {
  SimConfig c;
  c.n_pulses = 1'000'000;
  const SimTally t = run_session(c).tally;
  const double n = static_cast<double>(t.signal().emitted);
  const double mu = c.params.mu;
  const std::array<double, 4> p{std::exp(-mu), mu * std::exp(-mu), mu * mu / 2 * std::exp(-mu),
                                1.0 - (1.0 + mu + mu * mu / 2) * std::exp(-mu)};
  for (std::size_t k = 0; k < 4; ++k) {
    const double freq = static_cast<double>(t.signal_by_photons[k].emitted) / n;
    CHECK(std::abs(freq - p[k]) <= 3.0 * binomial_sigma(p[k], n));
  }
}

TEST_CASE("dark counts alone give a one-half error rate") {
  SimConfig c;
  c.link.y0 = 0.01;
  c.length_km = 400.0;
  c.n_pulses = 2'000'000;
  const SessionResult r = run_session(c);
  const double sifted = static_cast<double>(r.tally.signal().sifted);
  CHECK(std::abs(r.stats.e_mu - 0.5) <= 3.0 * binomial_sigma(0.5, sifted));
}

TEST_CASE("per-pulse records are consistent") {
  SimConfig c;
  c.link.eta_det = 1.0;
  c.link.alpha_db_per_km = 0.0;
  const PulseTables tables = make_pulse_tables(c);
  for (std::uint64_t i = 0; i < 5000; ++i) {
    const PulseRecord r = sample_pulse(c, tables, i);
    const double diff = std::remainder(r.alice_phase - r.bob_phase, std::numbers::pi);
    CHECK(r.basis_matched == (std::abs(diff) < 1e-9));
    if (r.bit_error) {
      CHECK(r.clicked);
      CHECK(r.basis_matched);
    }
    CHECK(r.photon_count >= 0);
  }
}

TEST_CASE("merging tallies") {
  const SimConfig c = fitted_config(20.0, 50'000, 3);
  const SimTally a = run_range(c, 0, 20'000);
  const SimTally b = run_range(c, 20'000, 30'000);
  const SimTally whole = run_range(c, 0, 50'000);

  const std::array<SimTally, 2> ab{a, b};
  CHECK(merge_tallies(ab) == whole);

  SimTally empty;
  const std::array<SimTally, 2> with_empty{a, empty};
  CHECK(merge_tallies(with_empty) == a);

  CHECK_THROWS_AS(merge_tallies(std::span<const SimTally>{}), Error);

  SimConfig other = c;
  other.length_km = 21.0;
  const std::array<SimTally, 2> mixed{a, run_range(other, 0, 1000)};
  try {
    merge_tallies(mixed);
    FAIL("expected config_mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config_mismatch);
  }

  // Merging single-pulse tallies reproduces the sequential run.
  std::vector<SimTally> singles;
  for (std::uint64_t i = 0; i < 500; ++i) singles.push_back(run_range(c, i, 1));
  CHECK(merge_tallies(singles) == run_range(c, 0, 500));
}

TEST_CASE("parallel sessions equal sequential ones for any thread count") {
  const SimConfig c = fitted_config(49.2, 9'000'001, 77);
  const SessionResult seq = run_session(c);
  for (unsigned threads : {1u, 2u, 3u, 8u}) {
    const SessionResult par = run_session_parallel(c, threads);
    CHECK(par.tally == seq.tally);
  }
  for (Isa isa : available_isas()) {
    CHECK(run_session(fitted_config(49.2, 100'003, 5), isa).tally ==
          run_session(fitted_config(49.2, 100'003, 5), Isa::scalar).tally);
  }
}

TEST_CASE("tally serialization round trip") {
  const SimTally t = run_session(fitted_config(10.0, 200'000, 9)).tally;
  std::ostringstream a, b;
  write_tally(a, t);
  write_tally(b, run_session(fitted_config(10.0, 200'000, 9)).tally);
  CHECK(a.str() == b.str());
  std::istringstream in(a.str());
  CHECK(read_tally(in) == t);

  std::istringstream unknown(a.str() + "bogus=1\n");
  CHECK_THROWS_AS(read_tally(unknown), Error);
  std::istringstream truncated(a.str().substr(0, a.str().size() / 2));
  CHECK_THROWS_AS(read_tally(truncated), Error);
}

TEST_CASE("config validation") {
  SimConfig c;
  c.n_pulses = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.decoy_fraction = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.params.mu = 25.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  CHECK(c.tag() == SimConfig{}.tag());
  c.seed = 99;
  c.n_pulses = 5;
  CHECK(c.tag() == SimConfig{}.tag());
  c.phase_error = 0.1;
  CHECK(c.tag() != SimConfig{}.tag());
}

TEST_CASE("a session without clicks has insufficient statistics") {
  SimConfig c;
  c.link.y0 = 0.0;
  c.length_km = 2000.0;
  c.n_pulses = 10'000;
  const SessionResult r = run_session(c);
  const RowAnalysis a = analyze_row(session_params(c.params, r.tally), r.stats);
  REQUIRE_FALSE(a.ok());
  CHECK(*a.cause == ErrorCode::statistics_insufficient);
  const SoundnessReport s = soundness_report(r.tally, a);
  CHECK(s.vacuous);
  CHECK(s.sound());
}

TEST_CASE("bounds hold for the large majority of seeded sessions at 50 km") {
  int violations = 0;
  int claims = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const SimConfig c = fitted_config(50.0, 10'000'000, seed);
    const SessionResult r = run_session(c);
    const RowAnalysis a = analyze_row(session_params(c.params, r.tally), r.stats);
    const SoundnessReport s = soundness_report(r.tally, a);
    if (!s.sound()) ++violations;
    if (a.ok() && a.bounds->s1_lower > 0.0) ++claims;
  }
  CHECK(violations <= 2);
  CHECK(claims >= 190);
}

TEST_CASE("the bounds are not tight even without the finite-size correction") {
  SimConfig c = fitted_config(50.0, 100'000'000, 2);
  c.params.u_alpha = 0.0;
  const SessionResult r = run_session_parallel(c, std::thread::hardware_concurrency());
  const RowAnalysis a = analyze_row(session_params(c.params, r.tally), r.stats);
  REQUIRE(a.ok());
  const SoundnessReport s = soundness_report(r.tally, a);
  REQUIRE(s.true_s1);
  CHECK(a.bounds->s1_lower > 0.0);
  CHECK(a.bounds->s1_lower <= *s.true_s1);
  CHECK(s.sound());
}
