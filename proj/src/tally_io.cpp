#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "qkd/pulse_sim.hpp"

namespace qkd {
namespace {

constexpr const char* kTallyHeader = "# qkd-tally v1";

struct CountField {
  std::string key;
  std::uint64_t ClassCounts::*member;
};

const std::array<CountField, 4>& count_fields() {
  static const std::array<CountField, 4> fields{{{"emitted", &ClassCounts::emitted},
                                                 {"clicked", &ClassCounts::clicked},
                                                 {"sifted", &ClassCounts::sifted},
                                                 {"errors", &ClassCounts::errors}}};
  return fields;
}

template <class F>
void for_each_group(SimTally& t, F&& f) {
  f("signal", t.by_class[0]);
  f("decoy", t.by_class[1]);
  f("photons0", t.signal_by_photons[0]);
  f("photons1", t.signal_by_photons[1]);
  f("photons2", t.signal_by_photons[2]);
  f("photons3plus", t.signal_by_photons[3]);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  auto res = std::to_chars(buf, buf + 16, v, 16);
  std::string s(buf, res.ptr);
  return std::string(16 - s.size(), '0') + s;
}

[[noreturn]] void bad(int line, const std::string& what) {
  throw Error(ErrorCode::parse, "tally line " + std::to_string(line) + ": " + what);
}

}  // namespace

void write_tally(std::ostream& out, const SimTally& tally) {
  out << kTallyHeader << '\n';
  out << "config_tag=" << hex64(tally.config_tag) << '\n';
  SimTally copy = tally;
  for_each_group(copy, [&](const char* group, ClassCounts& c) {
    for (const auto& f : count_fields()) out << group << '.' << f.key << '=' << c.*f.member << '\n';
  });
}

SimTally read_tally(std::istream& in) {
  std::map<std::string, std::pair<std::string, int>> values;
  std::string line;
  int line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line == kTallyHeader) header = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) bad(line_no, "expected key=value");
    const std::string key = line.substr(0, eq);
    if (values.contains(key)) bad(line_no, "duplicate key '" + key + "'");
    values[key] = {line.substr(eq + 1), line_no};
  }
  if (!header) throw Error(ErrorCode::parse, "tally: missing '# qkd-tally v1' header");

  auto take = [&](const std::string& key, int base) -> std::uint64_t {
    auto it = values.find(key);
    if (it == values.end()) throw Error(ErrorCode::parse, "tally: missing key '" + key + "'");
    const auto& [text, ln] = it->second;
    std::uint64_t v = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v, base);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
      bad(ln, "invalid integer '" + text + "'");
    }
    values.erase(it);
    return v;
  };

  SimTally t;
  t.config_tag = take("config_tag", 16);
  for_each_group(t, [&](const char* group, ClassCounts& c) {
    for (const auto& f : count_fields()) c.*f.member = take(std::string(group) + "." + f.key, 10);
  });
  if (!values.empty()) {
    bad(values.begin()->second.second, "unknown key '" + values.begin()->first + "'");
  }
  return t;
}

}  // namespace qkd
