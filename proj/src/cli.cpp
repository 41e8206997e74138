#include "qkd/cli.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "qkd/estimator.hpp"
#include "qkd/fringe.hpp"
#include "qkd/link_model.hpp"
#include "qkd/pulse_sim.hpp"
#include "qkd/reference_data.hpp"
#include "qkd/table_io.hpp"

namespace qkd::cli {
namespace {

struct Settings {
  ProtocolParams params;
  LinkModel link;
  std::uint64_t seed = 1;
  std::uint64_t n_pulses = 10'000'000;
  double decoy_fraction = 0.5;
  double length_km = 0.0;
  double phase_error = 0.0;
  std::uint64_t threads = 1;
  double strong_mean_photons = 0.0;
  std::uint64_t scan_points = 64;
  std::uint64_t pulses_per_point = 100'000;
  double session_pulses = 2e9;
  double true_phase_zero = 1.0;
  bool noiseless = false;
};

using Setter = std::function<void(Settings&, double)>;

std::uint64_t as_count(double v, const std::string& key) {
  if (!(v >= 0.0) || v != std::floor(v) || v > 9.0e18) {
    throw Error(ErrorCode::validation, key + " must be a non-negative integer");
  }
  return static_cast<std::uint64_t>(v);
}

// Keys accepted in --params/--link files and --set overrides.
const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> m;
    m["mu"] = [](Settings& s, double v) { s.params.mu = v; };
    m["nu"] = [](Settings& s, double v) { s.params.nu = v; };
    m["q"] = [](Settings& s, double v) { s.params.q = v; };
    m["f_ec"] = [](Settings& s, double v) { s.params.f_ec = v; };
    m["u_alpha"] = [](Settings& s, double v) { s.params.u_alpha = v; };
    m["n_mu"] = [](Settings& s, double v) { s.params.n_mu = v; };
    m["n_nu"] = [](Settings& s, double v) { s.params.n_nu = v; };
    m["alpha_db_per_km"] = [](Settings& s, double v) { s.link.alpha_db_per_km = v; };
    m["excess_loss_db"] = [](Settings& s, double v) { s.link.excess_loss_db = v; };
    m["eta_det"] = [](Settings& s, double v) { s.link.eta_det = v; };
    m["y0"] = [](Settings& s, double v) { s.link.y0 = v; };
    m["visibility"] = [](Settings& s, double v) { s.link.visibility = v; };
    m["seed"] = [](Settings& s, double v) { s.seed = as_count(v, "seed"); };
    m["n_pulses"] = [](Settings& s, double v) { s.n_pulses = as_count(v, "n_pulses"); };
    m["decoy_fraction"] = [](Settings& s, double v) { s.decoy_fraction = v; };
    m["length_km"] = [](Settings& s, double v) { s.length_km = v; };
    m["phase_error"] = [](Settings& s, double v) { s.phase_error = v; };
    m["threads"] = [](Settings& s, double v) { s.threads = as_count(v, "threads"); };
    m["strong_mean_photons"] = [](Settings& s, double v) { s.strong_mean_photons = v; };
    m["scan_points"] = [](Settings& s, double v) { s.scan_points = as_count(v, "scan_points"); };
    m["pulses_per_point"] = [](Settings& s, double v) {
      s.pulses_per_point = as_count(v, "pulses_per_point");
    };
    m["session_pulses"] = [](Settings& s, double v) { s.session_pulses = v; };
    m["true_phase_zero"] = [](Settings& s, double v) { s.true_phase_zero = v; };
    m["noiseless"] = [](Settings& s, double v) { s.noiseless = v != 0.0; };
    return m;
  }();
  return table;
}

const std::vector<std::string> kLinkKeys{"alpha_db_per_km", "excess_loss_db", "eta_det", "y0",
                                         "visibility"};
const std::vector<std::string> kProtocolKeys{"mu", "nu", "q", "f_ec", "u_alpha", "n_mu", "n_nu"};

std::string value_of(const Settings& s, const std::string& key) {
  static const std::map<std::string, std::function<double(const Settings&)>> getters{
      {"mu", [](const Settings& s) { return s.params.mu; }},
      {"nu", [](const Settings& s) { return s.params.nu; }},
      {"q", [](const Settings& s) { return s.params.q; }},
      {"f_ec", [](const Settings& s) { return s.params.f_ec; }},
      {"u_alpha", [](const Settings& s) { return s.params.u_alpha; }},
      {"n_mu", [](const Settings& s) { return s.params.n_mu; }},
      {"n_nu", [](const Settings& s) { return s.params.n_nu; }},
      {"alpha_db_per_km", [](const Settings& s) { return s.link.alpha_db_per_km; }},
      {"excess_loss_db", [](const Settings& s) { return s.link.excess_loss_db; }},
      {"eta_det", [](const Settings& s) { return s.link.eta_det; }},
      {"y0", [](const Settings& s) { return s.link.y0; }},
      {"visibility", [](const Settings& s) { return s.link.visibility; }},
      {"decoy_fraction", [](const Settings& s) { return s.decoy_fraction; }},
      {"length_km", [](const Settings& s) { return s.length_km; }},
      {"phase_error", [](const Settings& s) { return s.phase_error; }},
      {"strong_mean_photons", [](const Settings& s) { return s.strong_mean_photons; }},
      {"session_pulses", [](const Settings& s) { return s.session_pulses; }},
      {"true_phase_zero", [](const Settings& s) { return s.true_phase_zero; }},
  };
  if (key == "seed") return std::to_string(s.seed);
  if (key == "n_pulses") return std::to_string(s.n_pulses);
  if (key == "scan_points") return std::to_string(s.scan_points);
  if (key == "pulses_per_point") return std::to_string(s.pulses_per_point);
  if (key == "noiseless") return s.noiseless ? "1" : "0";
  return format_double(getters.at(key)(s));
}

void echo(std::ostream& out, const Settings& s, const std::vector<std::string>& keys) {
  for (const auto& k : keys) out << "# " << k << '=' << value_of(s, k) << '\n';
}

struct Options {
  std::string command;
  std::string input;
  std::string params_file;
  std::string link_file;
  std::string out_file;
  std::string grid = "0:150:1";
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string scan_in;
  std::string scan_out;
  std::string tally_out;
};

void apply_key_values(Settings& s, const std::vector<KeyValue>& kvs, std::string_view source,
                      const std::vector<std::string>* allowed) {
  for (const auto& kv : kvs) {
    const auto it = setters().find(kv.key);
    const bool permitted =
        allowed == nullptr ||
        std::find(allowed->begin(), allowed->end(), kv.key) != allowed->end();
    if (it == setters().end() || !permitted) {
      throw Error(ErrorCode::validation, std::string(source) + ":" + std::to_string(kv.line) +
                                             ": unknown key '" + kv.key + "'");
    }
    it->second(s, parse_double(kv.value, source, kv.line));
  }
}

std::vector<KeyValue> read_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::parse, "cannot open '" + path + "'");
  return read_key_values(in, path);
}

// Defaults < --link file < --params file < --set overrides.
Settings resolve(const Options& opt, Settings base) {
  if (!opt.link_file.empty()) apply_key_values(base, read_kv_file(opt.link_file), opt.link_file, &kLinkKeys);
  if (!opt.params_file.empty()) {
    apply_key_values(base, read_kv_file(opt.params_file), opt.params_file, nullptr);
  }
  std::vector<KeyValue> cli_kvs;
  for (const auto& o : opt.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::validation, "--set expects key=value, got '" + o + "'");
    cli_kvs.push_back({o.substr(0, eq), o.substr(eq + 1), 0});
  }
  apply_key_values(base, cli_kvs, "--set", nullptr);
  if (opt.seed) base.seed = *opt.seed;
  return base;
}

std::vector<MeasuredStats> load_table(const Options& opt, std::string& label) {
  if (opt.input.empty()) {
    label = "bundled reference_measurements.csv";
    return reference_measurements();
  }
  label = opt.input;
  if (opt.input == "-") return read_measured_table(std::cin, "stdin");
  std::ifstream in(opt.input);
  if (!in) throw Error(ErrorCode::parse, "cannot open '" + opt.input + "'");
  return read_measured_table(in, opt.input);
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> parts;
  std::size_t start = 0;
  while (true) {
    const auto colon = text.find(':', start);
    parts.push_back(parse_double(text.substr(start, colon - start), "--grid", 0));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  if (parts.size() == 1) return parts;
  if (parts.size() != 3) throw Error(ErrorCode::validation, "--grid expects start:stop:step or a single length");
  return length_grid(parts[0], parts[1], parts[2]);
}

// Routes primary output to --out (summary to `out`) or to `out` (summary
// to `err`).
struct Sinks {
  std::unique_ptr<std::ofstream> file;
  std::ostream* primary;
  std::ostream* summary;

  Sinks(const Options& opt, std::ostream& out, std::ostream& err) {
    if (opt.out_file.empty()) {
      primary = &out;
      summary = &err;
    } else {
      file = std::make_unique<std::ofstream>(opt.out_file);
      if (!*file) throw std::runtime_error("cannot write '" + opt.out_file + "'");
      primary = file.get();
      summary = &out;
    }
  }
};

constexpr std::string_view kUnitsNote =
    "# rates are clicks per emitted pulse; QBERs are fractions of sifted bits\n";

int cmd_analyze(const Options& opt, Sinks& sinks) {
  const Settings s = resolve(opt, Settings{});
  s.params.validate();
  std::string label;
  const auto table = load_table(opt, label);

  std::vector<BoundsRow> rows;
  int secure = 0;
  int failed = 0;
  for (const auto& stats : table) {
    const RowAnalysis a = analyze_row(s.params, stats);
    rows.push_back(to_bounds_row(a));
    if (!a.ok()) ++failed;
    else if (a.bounds->secure) ++secure;
  }

  auto& out = *sinks.primary;
  out << "# qkd analyze\n# input=" << label << '\n';
  echo(out, s, kProtocolKeys);
  out << kUnitsNote;
  write_bounds_table(out, rows);

  auto& sum = *sinks.summary;
  sum << "analyzed " << rows.size() << " rows: " << secure << " secure, " << failed
      << " not analyzable\n";
  for (const auto& r : rows) {
    sum << "  " << format_double(r.length_km) << " km: ";
    if (!r.s1_lower) {
      sum << r.diagnostic << '\n';
      continue;
    }
    sum << "S1_L=" << format_double(*r.s1_lower)
        << " e1_U=" << (r.e1_upper ? format_double(*r.e1_upper) : std::string("n/a"))
        << " R_L=" << format_double(*r.r_lower) << (r.secure ? " secure" : " insecure") << '\n';
  }
  return kExitOk;
}

Settings with_link_base(const Options& opt, Settings base) {
  if (opt.link_file.empty()) base.link = reference_link_fit().model;
  return resolve(opt, base);
}

int cmd_simulate(const Options& opt, Sinks& sinks) {
  Settings base;
  base.length_km = 49.2;
  const Settings s = with_link_base(opt, base);

  SimConfig config;
  config.n_pulses = s.n_pulses;
  config.decoy_fraction = s.decoy_fraction;
  config.seed = s.seed;
  config.link = s.link;
  config.params = s.params;
  config.length_km = s.length_km;
  config.phase_error = s.phase_error;
  config.validate();

  const SessionResult session =
      run_session_parallel(config, static_cast<unsigned>(std::max<std::uint64_t>(s.threads, 1)));
  const RowAnalysis analysis =
      analyze_row(session_params(s.params, session.tally), session.stats);
  const SoundnessReport report = soundness_report(session.tally, analysis);

  if (!opt.tally_out.empty()) {
    std::ofstream t(opt.tally_out);
    if (!t) throw std::runtime_error("cannot write '" + opt.tally_out + "'");
    write_tally(t, session.tally);
  }

  auto& out = *sinks.primary;
  auto opt_str = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  out << "# qkd simulate\n";
  std::vector<std::string> keys = kProtocolKeys;
  keys.insert(keys.end(), kLinkKeys.begin(), kLinkKeys.end());
  for (const char* k : {"seed", "n_pulses", "decoy_fraction", "length_km", "phase_error"}) keys.push_back(k);
  echo(out, s, keys);
  out << "# n_mu and n_nu are replaced by the emitted counts when analysing the session\n";
  out << kUnitsNote;
  write_tally(out, session.tally);
  const MeasuredStats& st = session.stats;
  out << "stats.length_km=" << format_double(st.length_km) << '\n'
      << "stats.s_mu=" << format_double(st.s_mu) << '\n'
      << "stats.e_mu=" << format_double(st.e_mu) << '\n'
      << "stats.s_nu=" << format_double(st.s_nu) << '\n'
      << "stats.e_nu=" << format_double(st.e_nu) << '\n';
  out << "bounds.status=" << (analysis.ok() ? std::string("ok") : std::string(to_string(*analysis.cause))) << '\n';
  if (analysis.ok()) {
    const SecurityBounds& b = *analysis.bounds;
    out << "bounds.s_nu_lower=" << format_double(b.s_nu_lower) << '\n'
        << "bounds.s1_lower=" << format_double(b.s1_lower) << '\n'
        << "bounds.e1_upper=" << opt_str(b.e1_upper) << '\n'
        << "bounds.r_lower=" << format_double(b.r_lower) << '\n'
        << "bounds.secure=" << (b.secure ? 1 : 0) << '\n';
  }
  out << "soundness.true_s1=" << opt_str(report.true_s1) << '\n'
      << "soundness.true_e1=" << opt_str(report.true_e1) << '\n'
      << "soundness.s1_holds=" << (report.s1_holds ? 1 : 0) << '\n'
      << "soundness.e1_holds=" << (report.e1_holds ? (*report.e1_holds ? "1" : "0") : "n/a") << '\n'
      << "soundness.vacuous=" << (report.vacuous ? 1 : 0) << '\n'
      << "soundness.sound=" << (report.sound() ? 1 : 0) << '\n';

  *sinks.summary << "simulated " << config.n_pulses << " pulses at "
                 << format_double(config.length_km) << " km: s_mu=" << format_double(st.s_mu)
                 << " e_mu=" << format_double(st.e_mu) << "; bounds "
                 << (report.vacuous ? "not available (" + analysis.message + ")"
                                    : std::string(report.sound() ? "satisfied" : "VIOLATED"))
                 << '\n';
  return kExitOk;
}

int cmd_sweep(const Options& opt, Sinks& sinks) {
  const Settings s = with_link_base(opt, Settings{});
  const std::vector<double> grid = parse_grid(opt.grid);
  const LengthSweep sweep = sweep_key_rate(s.link, s.params, grid);

  auto& out = *sinks.primary;
  out << "# qkd sweep\n# link=" << (opt.link_file.empty() ? "fit of bundled measurements" : opt.link_file)
      << '\n';
  std::vector<std::string> keys = kProtocolKeys;
  keys.insert(keys.end(), kLinkKeys.begin(), kLinkKeys.end());
  echo(out, s, keys);
  out << "# rate is the secure key rate lower bound in bits per emitted signal pulse\n";
  write_sweep(out, sweep);
  if (sweep.cutoff_km) {
    out << "# cutoff_km=" << format_double(*sweep.cutoff_km)
        << (sweep.cutoff_bracketed ? "" : " (rate still positive at grid end)") << '\n';
  } else {
    out << "# cutoff_km=none\n";
  }

  auto& sum = *sinks.summary;
  if (!sweep.cutoff_km) {
    sum << "no positive secure rate on the grid\n";
  } else if (sweep.cutoff_bracketed) {
    sum << "secure distance cutoff: " << format_double(std::round(*sweep.cutoff_km * 10.0) / 10.0)
        << " km\n";
  } else {
    sum << "secure rate positive up to the end of the grid ("
        << format_double(*sweep.cutoff_km) << " km)\n";
  }
  return kExitOk;
}

int cmd_fit(const Options& opt, Sinks& sinks) {
  const Settings s = resolve(opt, Settings{});
  std::string label;
  const auto table = load_table(opt, label);
  const LinkFit fit = fit_link(table, s.params, s.link);

  auto& out = *sinks.primary;
  out << "# qkd fit\n# input=" << label << '\n';
  echo(out, s, kProtocolKeys);
  Settings fitted = s;
  fitted.link = fit.model;
  for (const auto& k : kLinkKeys) out << k << '=' << value_of(fitted, k) << '\n';
  out << "# objective=" << format_double(fit.objective) << '\n';
  for (const auto& r : fit.residuals) {
    out << "# residual length_km=" << format_double(r.length_km)
        << " log_gain_mu=" << format_double(r.log_gain_mu)
        << " log_gain_nu=" << format_double(r.log_gain_nu)
        << " qber_mu=" << format_double(r.qber_mu) << '\n';
  }
  *sinks.summary << "fitted alpha=" << format_double(fit.model.alpha_db_per_km)
                 << " dB/km, excess_loss=" << format_double(fit.model.excess_loss_db)
                 << " dB, visibility=" << format_double(fit.model.visibility)
                 << " (objective " << format_double(fit.objective) << ")\n";
  return kExitOk;
}

int cmd_calibrate(const Options& opt, Sinks& sinks) {
  const Settings s = resolve(opt, Settings{});
  s.link.validate();

  ScanCurve curve;
  if (!opt.scan_in.empty()) {
    std::ifstream in(opt.scan_in);
    if (!in) throw Error(ErrorCode::parse, "cannot open '" + opt.scan_in + "'");
    curve = read_scan_curve(in);
  } else {
    ScanSettings scan;
    scan.strong_mean_photons = s.strong_mean_photons;
    if (s.scan_points > 100000) throw Error(ErrorCode::validation, "scan_points too large");
    scan.offsets = default_scan_offsets(static_cast<int>(s.scan_points));
    scan.pulses_per_point = s.pulses_per_point;
    scan.seed = s.seed;
    scan.length_km = s.length_km;
    scan.true_phase_zero = s.true_phase_zero;
    scan.noiseless = s.noiseless;
    curve = simulate_scan(s.link, scan);
  }
  if (!opt.scan_out.empty()) {
    std::ofstream o(opt.scan_out);
    if (!o) throw std::runtime_error("cannot write '" + opt.scan_out + "'");
    write_scan_curve(o, curve);
  }
  const FringeFit fit = fit_fringe(curve);
  const auto points = working_points(fit);
  const double overhead = calibration_overhead(curve, s.session_pulses);

  auto& out = *sinks.primary;
  out << "# qkd calibrate\n";
  std::vector<std::string> keys = kLinkKeys;
  for (const char* k : {"seed", "length_km", "strong_mean_photons", "scan_points", "pulses_per_point",
                        "true_phase_zero", "noiseless", "session_pulses"}) {
    keys.push_back(k);
  }
  echo(out, s, keys);
  out << "amplitude=" << format_double(fit.amplitude) << '\n'
      << "visibility_est=" << format_double(fit.visibility_est) << '\n'
      << "visibility_stderr=" << format_double(fit.visibility_stderr) << '\n'
      << "phase_zero=" << format_double(fit.phase_zero) << '\n'
      << "residual=" << format_double(fit.residual) << '\n';
  for (std::size_t k = 0; k < points.size(); ++k) {
    out << "working_point_" << k << '=' << format_double(points[k]) << '\n';
  }
  out << "overhead_fraction=" << format_double(overhead) << '\n'
      << "saturated=" << (curve.saturated ? 1 : 0) << '\n';

  *sinks.summary << "visibility " << format_double(fit.visibility_est) << " +/- "
                 << format_double(fit.visibility_stderr) << ", phase zero "
                 << format_double(fit.phase_zero) << " rad, overhead "
                 << format_double(overhead * 100.0) << "%"
                 << (curve.saturated ? " (warning: scan saturated)" : "") << '\n';
  return kExitOk;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::parse: return kExitParse;
    case ErrorCode::validation:
    case ErrorCode::domain:
    case ErrorCode::unidentifiable:
    case ErrorCode::insufficient_scan_range:
    case ErrorCode::statistics_insufficient:
    case ErrorCode::no_single_photon_bound: return kExitValidation;
    case ErrorCode::config_mismatch: return kExitRuntime;
  }
  return kExitRuntime;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Decoy-state QKD analysis and simulation toolkit", "qkd"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--params", opt.params_file, "key=value parameter file");
    sub->add_option("--link", opt.link_file, "key=value link model file (e.g. output of 'fit')");
    sub->add_option("--seed", opt.seed, "random seed");
    sub->add_option("--out", opt.out_file, "write primary output to this file");
    sub->add_option("--set", opt.overrides, "override a parameter, key=value (repeatable)");
  };

  auto* analyze = app.add_subcommand("analyze", "security bounds for a measured-statistics table");
  add_common(analyze);
  analyze->add_option("input", opt.input, "measured-statistics table (default: bundled data, '-' for stdin)");

  auto* simulate = app.add_subcommand("simulate", "pulse-level Monte Carlo session with soundness check");
  add_common(simulate);
  simulate->add_option("--tally-out", opt.tally_out, "write the tally in key=value form");

  auto* sweep = app.add_subcommand("sweep", "secure key rate versus fiber length");
  add_common(sweep);
  sweep->add_option("--grid", opt.grid, "start:stop:step in km, or a single length");

  auto* fit = app.add_subcommand("fit", "fit a link model to a measured-statistics table");
  add_common(fit);
  fit->add_option("input", opt.input, "measured-statistics table (default: bundled data, '-' for stdin)");

  auto* calibrate = app.add_subcommand("calibrate", "simulate and fit a fringe scan");
  add_common(calibrate);
  calibrate->add_option("--scan", opt.scan_in, "fit this scan curve instead of simulating one");
  calibrate->add_option("--scan-out", opt.scan_out, "write the scan curve");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    Sinks sinks(opt, out, err);
    if (analyze->parsed()) return cmd_analyze(opt, sinks);
    if (simulate->parsed()) return cmd_simulate(opt, sinks);
    if (sweep->parsed()) return cmd_sweep(opt, sinks);
    if (fit->parsed()) return cmd_fit(opt, sinks);
    if (calibrate->parsed()) return cmd_calibrate(opt, sinks);
  } catch (const Error& e) {
    err << "qkd: " << to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "qkd: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace qkd::cli
