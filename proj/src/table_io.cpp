#include "qkd/table_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

#include "qkd/fringe.hpp"

namespace qkd {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void parse_error(std::string_view source, int line, const std::string& what) {
  throw Error(ErrorCode::parse,
              std::string(source) + ":" + std::to_string(line) + ": " + what);
}

// Iterates data lines of a delimited table; the first non-comment line is
// the header.
struct DelimitedReader {
  DelimitedReader(std::istream& stream, std::string_view name) : in(stream), source(name) {}

  std::istream& in;
  std::string_view source;
  int line_no = 0;
  std::string line;

  bool next(std::vector<std::string_view>& fields) {
    while (std::getline(in, line)) {
      ++line_no;
      const std::string_view t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      fields = split_fields(t);
      return true;
    }
    return false;
  }
};

std::map<std::string, std::size_t> header_index(const std::vector<std::string_view>& fields,
                                                std::string_view source, int line) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (!index.emplace(std::string(fields[i]), i).second) {
      parse_error(source, line, "duplicate column '" + std::string(fields[i]) + "'");
    }
  }
  return index;
}

}  // namespace

std::string format_double(double value) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

double parse_double(std::string_view text, std::string_view source, int line) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || res.ec != std::errc{} || res.ptr != text.data() + text.size() ||
      !std::isfinite(v)) {
    parse_error(source, line, "invalid number '" + std::string(text) + "'");
  }
  return v;
}

std::vector<MeasuredStats> read_measured_table(std::istream& in, std::string_view source) {
  DelimitedReader reader(in, source);
  std::vector<std::string_view> fields;
  std::vector<MeasuredStats> rows;
  if (!reader.next(fields)) return rows;

  const auto index = header_index(fields, source, reader.line_no);
  static constexpr std::array<const char*, 5> kNames{"length_km", "s_mu", "e_mu", "s_nu", "e_nu"};
  std::array<std::size_t, 5> col{};
  for (std::size_t k = 0; k < kNames.size(); ++k) {
    auto it = index.find(kNames[k]);
    if (it == index.end()) {
      parse_error(source, reader.line_no, std::string("missing column '") + kNames[k] + "'");
    }
    col[k] = it->second;
  }
  if (index.size() != kNames.size()) {
    parse_error(source, reader.line_no, "unexpected extra columns");
  }

  while (reader.next(fields)) {
    if (fields.size() != index.size()) {
      parse_error(source, reader.line_no,
                  "expected " + std::to_string(index.size()) + " fields, found " +
                      std::to_string(fields.size()));
    }
    MeasuredStats s;
    s.length_km = parse_double(fields[col[0]], source, reader.line_no);
    s.s_mu = parse_double(fields[col[1]], source, reader.line_no);
    s.e_mu = parse_double(fields[col[2]], source, reader.line_no);
    s.s_nu = parse_double(fields[col[3]], source, reader.line_no);
    s.e_nu = parse_double(fields[col[4]], source, reader.line_no);
    try {
      s.validate();
    } catch (const Error& e) {
      parse_error(source, reader.line_no, e.what());
    }
    rows.push_back(s);
  }
  return rows;
}

void write_measured_table(std::ostream& out, std::span<const MeasuredStats> rows) {
  out << kMeasuredColumns << '\n';
  for (const auto& r : rows) {
    out << format_double(r.length_km) << ',' << format_double(r.s_mu) << ','
        << format_double(r.e_mu) << ',' << format_double(r.s_nu) << ','
        << format_double(r.e_nu) << '\n';
  }
}

BoundsRow to_bounds_row(const RowAnalysis& row) {
  BoundsRow out;
  out.length_km = row.stats.length_km;
  if (!row.ok()) {
    out.diagnostic = std::string(to_string(*row.cause));
    return out;
  }
  const SecurityBounds& b = *row.bounds;
  out.s_nu_lower = b.s_nu_lower;
  out.s1_lower = b.s1_lower;
  out.e1_upper = b.e1_upper;
  out.r_lower = b.r_lower;
  out.secure = b.secure;
  if (!row.stats.gains_ordered()) {
    out.diagnostic = "warning: s_mu <= s_nu";
  } else if (!b.e1_upper) {
    out.diagnostic = std::string(to_string(ErrorCode::no_single_photon_bound));
  } else {
    out.diagnostic = "ok";
  }
  return out;
}

void write_bounds_table(std::ostream& out, std::span<const BoundsRow> rows) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  out << kBoundsColumns << '\n';
  for (const auto& r : rows) {
    out << format_double(r.length_km) << ',' << opt(r.s_nu_lower) << ',' << opt(r.s1_lower)
        << ',' << opt(r.e1_upper) << ',' << opt(r.r_lower) << ',' << (r.secure ? 1 : 0) << ','
        << r.diagnostic << '\n';
  }
}

std::vector<BoundsRow> read_bounds_table(std::istream& in, std::string_view source) {
  DelimitedReader reader(in, source);
  std::vector<std::string_view> fields;
  std::vector<BoundsRow> rows;
  if (!reader.next(fields)) return rows;
  std::string header;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    header += (i ? "," : "") + std::string(fields[i]);
  }
  if (header != kBoundsColumns) parse_error(source, reader.line_no, "unexpected header");

  while (reader.next(fields)) {
    if (fields.size() != 7) parse_error(source, reader.line_no, "expected 7 fields");
    auto opt = [&](std::string_view f) -> std::optional<double> {
      if (f.empty()) return std::nullopt;
      return parse_double(f, source, reader.line_no);
    };
    BoundsRow r;
    r.length_km = parse_double(fields[0], source, reader.line_no);
    r.s_nu_lower = opt(fields[1]);
    r.s1_lower = opt(fields[2]);
    r.e1_upper = opt(fields[3]);
    r.r_lower = opt(fields[4]);
    if (fields[5] != "0" && fields[5] != "1") {
      parse_error(source, reader.line_no, "secure flag must be 0 or 1");
    }
    r.secure = fields[5] == "1";
    r.diagnostic = std::string(fields[6]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_sweep(std::ostream& out, const LengthSweep& sweep) {
  out << "length_km,rate\n";
  for (std::size_t i = 0; i < sweep.lengths.size(); ++i) {
    out << format_double(sweep.lengths[i]) << ',' << format_double(sweep.rates[i]) << '\n';
  }
}

std::vector<KeyValue> read_key_values(std::istream& in, std::string_view source) {
  std::vector<KeyValue> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) parse_error(source, line_no, "expected key=value");
    const std::string_view key = trim(t.substr(0, eq));
    if (key.empty()) parse_error(source, line_no, "empty key");
    out.push_back({std::string(key), std::string(trim(t.substr(eq + 1))), line_no});
  }
  return out;
}

void write_scan_curve(std::ostream& out, const ScanCurve& curve) {
  out << "offset,count,pulses_per_point\n";
  for (std::size_t i = 0; i < curve.offsets.size(); ++i) {
    out << format_double(curve.offsets[i]) << ',' << format_double(curve.counts[i]) << ','
        << curve.pulses_per_point << '\n';
  }
}

ScanCurve read_scan_curve(std::istream& in) {
  constexpr std::string_view source = "scan";
  DelimitedReader reader(in, source);
  std::vector<std::string_view> fields;
  ScanCurve curve;
  if (!reader.next(fields)) throw Error(ErrorCode::parse, "scan: empty input");
  if (fields.size() != 3 || fields[0] != "offset" || fields[1] != "count" ||
      fields[2] != "pulses_per_point") {
    parse_error(source, reader.line_no, "expected header offset,count,pulses_per_point");
  }
  while (reader.next(fields)) {
    if (fields.size() != 3) parse_error(source, reader.line_no, "expected 3 fields");
    curve.offsets.push_back(parse_double(fields[0], source, reader.line_no));
    curve.counts.push_back(parse_double(fields[1], source, reader.line_no));
    const double n = parse_double(fields[2], source, reader.line_no);
    if (!(n >= 1.0) || n != std::floor(n)) {
      parse_error(source, reader.line_no, "pulses_per_point must be a positive integer");
    }
    const auto pulses = static_cast<std::uint64_t>(n);
    if (curve.pulses_per_point != 0 && curve.pulses_per_point != pulses) {
      parse_error(source, reader.line_no, "pulses_per_point must be constant");
    }
    curve.pulses_per_point = pulses;
  }
  return curve;
}

}  // namespace qkd
