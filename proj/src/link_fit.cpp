#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Core>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include "qkd/link_model.hpp"

namespace qkd {
namespace {

// Fit coordinates: attenuation (dB/km), log10 of the lumped coupling
// eta_det * 10^(-excess/10), visibility.
struct FitPoint {
  double alpha;
  double log10_coupling;
  double visibility;
};

LinkModel to_model(const FitPoint& p, const LinkModel& prior) {
  LinkModel m = prior;
  m.alpha_db_per_km = std::max(p.alpha, 0.0);
  m.excess_loss_db = 10.0 * (std::log10(prior.eta_det) - p.log10_coupling);
  m.visibility = std::clamp(p.visibility, 0.0, 1.0);
  return m;
}

void fill_residuals(std::span<const MeasuredStats> table, const ProtocolParams& params,
                    const LinkModel& model, Eigen::VectorXd& out) {
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& row = table[i];
    const double g_mu = expected_gain(model, params.mu, row.length_km);
    const double g_nu = expected_gain(model, params.nu, row.length_km);
    out[3 * i + 0] = std::log(g_mu / row.s_mu);
    out[3 * i + 1] = std::log(g_nu / row.s_nu);
    out[3 * i + 2] = expected_qber(model, params.mu, row.length_km) - row.e_mu;
  }
}

struct ResidualFunctor {
  using Scalar = double;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;

  std::span<const MeasuredStats> table;
  const ProtocolParams* params;
  const LinkModel* prior;
  std::optional<double> fixed_visibility;

  int inputs() const { return fixed_visibility ? 2 : 3; }
  int values() const { return static_cast<int>(3 * table.size()); }

  FitPoint point(const Eigen::VectorXd& x) const {
    return {x[0], x[1], fixed_visibility ? *fixed_visibility : x[2]};
  }

  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& fvec) const {
    fill_residuals(table, *params, to_model(point(x), *prior), fvec);
    return 0;
  }
};

FitPoint refine(const ResidualFunctor& functor, FitPoint start) {
  Eigen::VectorXd x(functor.inputs());
  x[0] = start.alpha;
  x[1] = start.log10_coupling;
  if (!functor.fixed_visibility) x[2] = start.visibility;

  Eigen::NumericalDiff<ResidualFunctor> diff(functor);
  Eigen::LevenbergMarquardt<Eigen::NumericalDiff<ResidualFunctor>> lm(diff);
  lm.parameters.xtol = 1e-14;
  lm.parameters.ftol = 1e-14;
  lm.parameters.maxfev = 4000;
  lm.minimize(x);
  return functor.point(x);
}

}  // namespace

double link_fit_objective(std::span<const MeasuredStats> table,
                          const ProtocolParams& params, const LinkModel& model) {
  Eigen::VectorXd r(3 * table.size());
  fill_residuals(table, params, model, r);
  return r.squaredNorm();
}

LinkFit fit_link(std::span<const MeasuredStats> table, const ProtocolParams& params,
                 const LinkModel& prior) {
  std::set<double> lengths;
  for (const auto& row : table) {
    row.validate();
    if (!(row.s_mu > 0.0 && row.s_nu > 0.0)) {
      throw Error(ErrorCode::validation, "fit_link: gains must be positive");
    }
    lengths.insert(row.length_km);
  }
  if (lengths.size() < 3) {
    throw Error(ErrorCode::unidentifiable,
                "fit_link: need at least 3 distinct fiber lengths");
  }
  if (!(prior.eta_det > 0.0)) {
    throw Error(ErrorCode::validation, "fit_link: prior eta_det must be positive");
  }

  // Coarse grid; ties resolve to the first point visited.
  FitPoint best{};
  double best_obj = INFINITY;
  for (int ia = 0; ia <= 40; ++ia) {
    for (int ic = 0; ic <= 60; ++ic) {
      for (int iv = 0; iv <= 10; ++iv) {
        const FitPoint p{0.05 + 0.01 * ia, -6.0 + 0.1 * ic, 0.80 + 0.02 * iv};
        const double obj = link_fit_objective(table, params, to_model(p, prior));
        if (obj < best_obj) {
          best_obj = obj;
          best = p;
        }
      }
    }
  }

  ResidualFunctor functor{table, &params, &prior, std::nullopt};
  FitPoint fitted = refine(functor, best);
  if (fitted.visibility > 1.0 || fitted.visibility < 0.0) {
    functor.fixed_visibility = std::clamp(fitted.visibility, 0.0, 1.0);
    fitted = refine(functor, fitted);
  }

  LinkFit out;
  out.model = to_model(fitted, prior);
  Eigen::VectorXd r(3 * table.size());
  fill_residuals(table, params, out.model, r);
  out.objective = r.squaredNorm();
  for (std::size_t i = 0; i < table.size(); ++i) {
    out.residuals.push_back({table[i].length_km, r[3 * i], r[3 * i + 1], r[3 * i + 2]});
  }
  return out;
}

}  // namespace qkd
