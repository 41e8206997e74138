#include <cmath>

#include "qkd/link_model.hpp"

namespace qkd {

double expected_key_rate(const LinkModel& model, const ProtocolParams& params,
                         double length_km) {
  const MeasuredStats stats = expected_stats(model, params, length_km);
  const RowAnalysis row = analyze_row(params, stats);
  if (row.ok()) return row.bounds->r_lower;
  return key_rate(params, stats, 0.0, 0.0);
}

std::vector<double> length_grid(double start, double stop, double step) {
  if (!(step > 0.0) || !(stop >= start)) {
    throw Error(ErrorCode::validation, "length grid: need step > 0 and stop >= start");
  }
  std::vector<double> grid;
  const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
  for (long i = 0; i <= n; ++i) grid.push_back(start + static_cast<double>(i) * step);
  return grid;
}

LengthSweep sweep_key_rate(const LinkModel& model, const ProtocolParams& params,
                           std::span<const double> grid) {
  if (grid.empty()) throw Error(ErrorCode::validation, "sweep: empty length grid");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) {
      throw Error(ErrorCode::validation, "sweep: lengths must be strictly increasing");
    }
  }
  model.validate();
  params.validate();

  LengthSweep sweep;
  sweep.lengths.assign(grid.begin(), grid.end());
  sweep.rates.reserve(grid.size());
  for (double length : grid) sweep.rates.push_back(expected_key_rate(model, params, length));

  std::optional<std::size_t> last_positive;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (sweep.rates[i] > 0.0) last_positive = i;
  }
  if (!last_positive) return sweep;

  const std::size_t i = *last_positive;
  if (i + 1 == grid.size()) {
    sweep.cutoff_km = grid[i];
    return sweep;
  }

  double lo = grid[i];
  double hi = grid[i + 1];
  while (hi - lo > 0.1) {
    const double mid = 0.5 * (lo + hi);
    if (expected_key_rate(model, params, mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  sweep.cutoff_km = 0.5 * (lo + hi);
  sweep.cutoff_bracketed = true;
  return sweep;
}

}  // namespace qkd
