#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ddc/core.hpp"
#include "ddc/model.hpp"

namespace ddc {

struct FixedPointConfig {
  double tolerance = 1e-10;
  /// 0 selects the default budget for the model's discount factor.
  std::size_t max_iterations = 0;
  /// Adds gamma to the continuation term, giving the expectation that
  /// forward simulation estimates. Without it this is the plain contraction.
  bool include_euler_constant = false;

  static std::size_t default_budget(double beta) { return beta >= 0.99 ? 1'000'000 : 100'000; }
};

/// Optional per-sweep residual trace, for contraction diagnostics.
struct FixedPointTrace {
  std::vector<double> residuals;
};

/// Value iteration on v(s,a) = u(s,a) + beta * sum_s' p(s'|s,a) [g + logsumexp_a' v(s',a')],
/// started from v = 0.
inline ValueTable solve_fixed_point(const ModelSpec& model, const Theta& theta,
                                   const FixedPointConfig& cfg = {},
                                   FixedPointTrace* trace = nullptr) {
  if (!(cfg.tolerance > 0.0)) throw ArgumentError("fixed point tolerance must be positive");
  model.check_theta(theta.values());
  const std::size_t budget =
      cfg.max_iterations ? cfg.max_iterations : FixedPointConfig::default_budget(model.beta());
  const std::size_t S = model.num_states();
  const std::size_t J = model.num_actions();
  const double beta = model.beta();
  const double shock = cfg.include_euler_constant ? kEulerGamma : 0.0;

  const RealTable u = model.utility_table(theta.values());
  for (double x : u.data())
    if (!std::isfinite(x)) throw NumericError("flow utility is not finite");

  RealTable v(S, J, 0.0);
  RealTable next(S, J, 0.0);
  std::vector<double> emax(S);
  double residual = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= budget; ++it) {
    for (std::size_t s = 0; s < S; ++s) emax[s] = shock + log_sum_exp(v.row(s), J);
    residual = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < J; ++a) {
        double cont = 0.0;
        for (const auto& t : model.transition_row(static_cast<StateIndex>(s),
                                                  static_cast<ActionIndex>(a)))
          cont += t.prob * emax[t.next];
        const double value = u(s, a) + beta * cont;
        residual = std::max(residual, std::abs(value - v(s, a)));
        next(s, a) = value;
      }
    }
    std::swap(v, next);
    if (trace) trace->residuals.push_back(residual);
    if (!std::isfinite(residual)) throw NumericError("value iteration diverged");
    if (residual <= cfg.tolerance) return ValueTable{std::move(v), "dp", theta.values(), ""};
  }
  throw ConvergenceError("value iteration did not converge within " + std::to_string(budget) +
                             " sweeps (last residual " + std::to_string(residual) + ")",
                         residual, budget);
}

/// Row-wise dynamic logit of a value table.
inline RealTable ccps_from_values(const RealTable& values) {
  RealTable out(values.rows(), values.cols());
  std::vector<double> row(values.cols());
  for (std::size_t s = 0; s < values.rows(); ++s) {
    std::copy(values.row(s), values.row(s) + values.cols(), row.begin());
    const auto p = ccp_from_values(row);
    std::copy(p.begin(), p.end(), out.row(s));
  }
  return out;
}

inline RealTable ccps_from_fixed_point(const ModelSpec& model, const Theta& theta,
                                       const FixedPointConfig& cfg = {}) {
  return ccps_from_values(solve_fixed_point(model, theta, cfg).values);
}

}  // namespace ddc
