#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "qkd/cli.hpp"
#include "qkd/pulse_sim.hpp"
#include "qkd/reference_data.hpp"
#include "qkd/table_io.hpp"
#include "reference_values.hpp"

using namespace qkd;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::filesystem::path temp_file(const std::string& name, const std::string& contents) {
  const std::filesystem::path p = std::filesystem::path(QKD_TEST_TMP_DIR) / name;
  std::ofstream(p, std::ios::binary) << contents;
  return p;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> data_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line[0] != '#') out.push_back(line);
  }
  return out;
}

std::string value_of(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (line.rfind(key + "=", 0) == 0) return line.substr(key.size() + 1);
  }
  return {};
}

}  // namespace

TEST_CASE("bundled measurements are pinned") {
  const std::string file = slurp(std::filesystem::path(QKD_DATA_DIR) / "reference_measurements.csv");
  CHECK(file == reference_measurements_csv());
  CHECK(fnv1a(file) == 0x58f4bf2f33b72a98ULL);

  const auto rows = reference_measurements();
  REQUIRE(rows.size() == 6);
  const double expect[6][5] = {{123.6, 3.8e-5, 0.0199, 1.36e-5, 0.041},
                               {108, 7.1e-5, 0.016, 2.52e-5, 0.027},
                               {97, 1.24e-4, 0.015, 4.3e-5, 0.017},
                               {83.7, 1.57e-4, 0.0145, 5.28e-5, 0.019},
                               {62.1, 2.88e-4, 0.0108, 1.08e-4, 0.0225},
                               {49.2, 8.6e-4, 0.0103, 2.9e-4, 0.020}};
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(rows[i].length_km == expect[i][0]);
    CHECK(rows[i].s_mu == expect[i][1]);
    CHECK(rows[i].e_mu == expect[i][2]);
    CHECK(rows[i].s_nu == expect[i][3]);
    CHECK(rows[i].e_nu == expect[i][4]);
  }
}

TEST_CASE("measured table parsing") {
  std::istringstream reordered("# note\ns_nu,length_km,e_nu,s_mu,e_mu\n\n1e-4,50,0.02,3e-4,0.01\n");
  const auto rows = read_measured_table(reordered);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].length_km == 50.0);
  CHECK(rows[0].s_nu == 1e-4);

  std::istringstream empty(std::string(kMeasuredColumns) + "\n");
  CHECK(read_measured_table(empty).empty());

  auto fails_at_line = [](const std::string& text, const std::string& where) {
    std::istringstream in(text);
    try {
      read_measured_table(in, "t.csv");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find(where) != std::string::npos);
      return true;
    }
    return false;
  };
  const std::string header = std::string(kMeasuredColumns) + "\n";
  CHECK(fails_at_line(header + "50,3e-4,0.01,1e-4,0.02\n60,1.5,0.01,1e-4,0.02\n", "t.csv:3"));
  CHECK(fails_at_line(header + "50,abc,0.01,1e-4,0.02\n", "t.csv:2"));
  CHECK(fails_at_line(header + "50,3e-4,0.01,1e-4\n", "t.csv:2"));
  CHECK(fails_at_line("length_km,s_mu,e_mu,s_nu\n", "t.csv:1"));
  CHECK(fails_at_line(header + "-5,3e-4,0.01,1e-4,0.02\n", "t.csv:2"));
}

TEST_CASE("number formatting round-trips") {
  for (double v : {0.0, 1.0, 3.8e-5, 0.1665618473705399, 1e-300, 123.6}) {
    CHECK(parse_double(format_double(v), "x", 1) == v);
  }
  CHECK_THROWS_AS(parse_double("1.0x", "x", 1), Error);
  CHECK_THROWS_AS(parse_double("", "x", 1), Error);
}

TEST_CASE("bounds tables round-trip") {
  ProtocolParams p;
  std::vector<BoundsRow> rows;
  for (const auto& s : reference_measurements()) rows.push_back(to_bounds_row(analyze_row(p, s)));
  MeasuredStats bad{200.0, 1e-7, 0.3, 1e-8, 0.3};
  rows.push_back(to_bounds_row(analyze_row(p, bad)));
  CHECK(rows.back().diagnostic != "ok");

  std::ostringstream out;
  write_bounds_table(out, rows);
  std::istringstream in(out.str());
  CHECK(read_bounds_table(in) == rows);
}

TEST_CASE("key=value files") {
  std::istringstream in("# c\nmu = 0.5\n\nnu=0.1\n");
  const auto kv = read_key_values(in);
  REQUIRE(kv.size() == 2);
  CHECK(kv[0].key == "mu");
  CHECK(kv[0].value == "0.5");
  CHECK(kv[1].line == 4);
  std::istringstream bad("mu 0.5\n");
  CHECK_THROWS_AS(read_key_values(bad), Error);
}

TEST_CASE("analyze reproduces the published bounds") {
  const Run r = run_cli({"analyze"});
  REQUIRE(r.code == cli::kExitOk);
  std::istringstream in(r.out);
  const auto rows = read_bounds_table(in);
  REQUIRE(rows.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    const auto& want = kPublishedBounds[i];
    CHECK(rows[i].length_km == want.length_km);
    CHECK(relative_error(*rows[i].s1_lower, want.s1_lower) <= 0.02);
    CHECK(relative_error(*rows[i].e1_upper, want.e1_upper) <= 0.02);
    CHECK(relative_error(*rows[i].r_lower, want.r_lower) <= 0.03);
    CHECK(rows[i].secure);
  }
  CHECK(r.out.find("# u_alpha=10") != std::string::npos);

  const Run file = run_cli({"analyze", std::string(QKD_DATA_DIR) + "/reference_measurements.csv"});
  CHECK(data_lines(file.out) == data_lines(r.out));
}

TEST_CASE("analyze edge cases") {
  const auto empty = temp_file("empty.csv", std::string(kMeasuredColumns) + "\n");
  const Run e = run_cli({"analyze", empty.string()});
  CHECK(e.code == cli::kExitOk);
  CHECK(data_lines(e.out) == std::vector<std::string>{std::string(kBoundsColumns)});

  const auto bad = temp_file("bad.csv", std::string(kMeasuredColumns) + "\n50,1.2,0.01,1e-4,0.02\n");
  const Run b = run_cli({"analyze", bad.string()});
  CHECK(b.code != cli::kExitOk);
  CHECK(b.err.find(":2") != std::string::npos);

  const auto weak = temp_file("weak.csv", std::string(kMeasuredColumns) + "\n200,1e-7,0.3,1e-8,0.3\n");
  const Run w = run_cli({"analyze", weak.string()});
  CHECK(w.code == cli::kExitOk);
  CHECK(data_lines(w.out).size() == 2);

  CHECK(run_cli({"analyze", "/nonexistent/table.csv"}).code != cli::kExitOk);
}

TEST_CASE("parameter overrides and precedence") {
  const auto params = temp_file("params.txt", "u_alpha=3\nq=0.4\n");
  const Run r = run_cli({"analyze", "--params", params.string(), "--set", "u_alpha=0"});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(r.out.find("# u_alpha=0\n") != std::string::npos);
  CHECK(r.out.find("# q=0.4\n") != std::string::npos);

  CHECK(run_cli({"analyze", "--set", "bogus=1"}).code == cli::kExitValidation);
  const auto unknown = temp_file("unknown.txt", "mu=0.6\nwarp=9\n");
  CHECK(run_cli({"analyze", "--params", unknown.string()}).code != cli::kExitOk);
  CHECK(run_cli({"analyze", "--set", "nu=0.9"}).code == cli::kExitValidation);
  CHECK(run_cli({"analyze", "--set", "mu=abc"}).code != cli::kExitOk);
  CHECK(run_cli({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run_cli({}).code == cli::kExitUsage);
}

TEST_CASE("simulate is deterministic and thread-count independent") {
  const std::vector<std::string> base{"simulate", "--seed", "5", "--set", "n_pulses=3000000"};
  const Run a = run_cli(base);
  const Run b = run_cli(base);
  REQUIRE(a.code == cli::kExitOk);
  CHECK(a.out == b.out);
  auto threaded = base;
  threaded.insert(threaded.end(), {"--set", "threads=4"});
  CHECK(run_cli(threaded).out == a.out);

  CHECK(run_cli({"simulate", "--set", "n_pulses=0"}).code == cli::kExitValidation);

  const auto out_path = std::filesystem::path(QKD_TEST_TMP_DIR) / "sim.txt";
  const auto tally_path = std::filesystem::path(QKD_TEST_TMP_DIR) / "sim.tally";
  auto to_file = base;
  to_file.insert(to_file.end(), {"--out", out_path.string(), "--tally-out", tally_path.string()});
  REQUIRE(run_cli(to_file).code == cli::kExitOk);
  CHECK(slurp(out_path) == a.out);
  std::ifstream tally_in(tally_path);
  const SimTally t = read_tally(tally_in);
  CHECK(std::to_string(t.signal().emitted) == value_of(a.out, "signal.emitted"));
}

TEST_CASE("simulate at the shortest bundled length reports sound bounds") {
  const Run r = run_cli({"simulate", "--set", "n_pulses=10000000", "--set", "u_alpha=3"});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(value_of(r.out, "bounds.status") == "ok");
  CHECK(value_of(r.out, "soundness.s1_holds") == "1");
  CHECK(value_of(r.out, "soundness.sound") == "1");
}

TEST_CASE("sweep command") {
  const Run r = run_cli({"sweep"});
  REQUIRE(r.code == cli::kExitOk);
  const double cutoff = std::stod(value_of(r.out + r.err, "# cutoff_km"));
  CHECK(cutoff >= 123.6);
  CHECK(cutoff <= 140.0);
  CHECK(data_lines(r.out).size() == 152);

  const Run loose = run_cli({"sweep", "--set", "u_alpha=0"});
  CHECK(std::stod(value_of(loose.out + loose.err, "# cutoff_km")) > cutoff);

  const Run one = run_cli({"sweep", "--grid", "50"});
  REQUIRE(one.code == cli::kExitOk);
  CHECK(data_lines(one.out).size() == 2);
  const Run far = run_cli({"sweep", "--grid", "145"});
  REQUIRE(far.code == cli::kExitOk);
  CHECK(value_of(far.out + far.err, "# cutoff_km") == "none");

  CHECK(run_cli({"sweep", "--grid", "10:0:1"}).code != cli::kExitOk);
  CHECK(run_cli({"sweep", "--grid", "a:b:c"}).code != cli::kExitOk);
}

TEST_CASE("fit command") {
  const Run r = run_cli({"fit"});
  REQUIRE(r.code == cli::kExitOk);
  const double alpha = std::stod(value_of(r.out, "alpha_db_per_km"));
  CHECK(alpha == doctest::Approx(reference_link_fit().model.alpha_db_per_km));

  // The fitted model feeds straight back in as a link file.
  const auto link = temp_file("link.txt", r.out);
  const Run swept = run_cli({"sweep", "--link", link.string()});
  CHECK(swept.code == cli::kExitOk);
  CHECK(value_of(swept.out + swept.err, "# cutoff_km") ==
        value_of(run_cli({"sweep"}).out + run_cli({"sweep"}).err, "# cutoff_km"));

  const auto single = temp_file("single.csv",
                                std::string(kMeasuredColumns) + "\n50,3e-4,0.01,1e-4,0.02\n");
  const Run s = run_cli({"fit", single.string()});
  CHECK(s.code == cli::kExitValidation);
  CHECK(s.err.find("unidentifiable") != std::string::npos);
}

TEST_CASE("calibrate command") {
  const Run r = run_cli({"calibrate"});
  REQUIRE(r.code == cli::kExitOk);
  const double v = std::stod(value_of(r.out, "visibility_est"));
  CHECK(std::abs(v - 0.99) <= 0.005);
  CHECK(std::stod(value_of(r.out, "overhead_fraction")) <= 0.05);

  const Run exact = run_cli({"calibrate", "--set", "visibility=1", "--set", "y0=0", "--set", "noiseless=1"});
  REQUIRE(exact.code == cli::kExitOk);
  CHECK(std::abs(std::stod(value_of(exact.out, "visibility_est")) - 1.0) <= 1e-9);

  const Run four = run_cli({"calibrate", "--set", "scan_points=4"});
  CHECK(four.code == cli::kExitValidation);
  CHECK(four.err.find("insufficient scan range") != std::string::npos);

  const auto scan = std::filesystem::path(QKD_TEST_TMP_DIR) / "scan.csv";
  REQUIRE(run_cli({"calibrate", "--seed", "4", "--scan-out", scan.string()}).code == cli::kExitOk);
  const Run refit = run_cli({"calibrate", "--scan", scan.string()});
  REQUIRE(refit.code == cli::kExitOk);
  CHECK(value_of(refit.out, "visibility_est") ==
        value_of(run_cli({"calibrate", "--seed", "4"}).out, "visibility_est"));
}
