#include <gtest/gtest.h>

#include <cmath>

#include "ddc/dp_solver.hpp"
#include "support.hpp"

using namespace ddc;

namespace {

// Written against the model's definition, not ModelSpec: mileage 1..N,
// maintain costs theta_MC * s and moves to min(s+1, N), replace costs theta_RC.
std::vector<std::array<double, 2>> plain_machine_values(int N, double mc, double rc,
                                                        double beta) {
  std::vector<std::array<double, 2>> v(N + 1, {0.0, 0.0}), next = v;
  for (int it = 0; it < 100000; ++it) {
    double diff = 0.0;
    for (int s = 1; s <= N; ++s) {
      const int up = s < N ? s + 1 : N;
      const double ev_up = std::log(std::exp(v[up][0]) + std::exp(v[up][1]));
      const double ev_one = std::log(std::exp(v[1][0]) + std::exp(v[1][1]));
      next[s][0] = -mc * s + beta * ev_up;
      next[s][1] = -rc + beta * ev_one;
      diff = std::max({diff, std::abs(next[s][0] - v[s][0]), std::abs(next[s][1] - v[s][1])});
    }
    v = next;
    if (diff < 1e-12) break;
  }
  return v;
}

}  // namespace

TEST(FixedPoint, MatchesPlainLoopOracle) {
  const MachineReplacementModel m(5);
  const ValueTable v = solve_fixed_point(m.spec(), m.spec().reference_theta());
  const auto oracle = plain_machine_values(5, 1.0, 4.0, 0.9);
  for (int s = 1; s <= 5; ++s)
    for (int a = 0; a < 2; ++a)
      EXPECT_NEAR(v(MachineReplacementModel::index_of(s), a), oracle[s][a], 1e-9);
  EXPECT_EQ(v.source, "dp");
}

TEST(FixedPoint, TinyDiscountReturnsFlowUtility) {
  const MachineReplacementModel m(5, 1e-12);
  const ValueTable v = solve_fixed_point(m.spec(), m.spec().reference_theta());
  const RealTable u = m.spec().utility_table(m.spec().reference_theta().values());
  for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(v.values.data()[i], u.data()[i], 1e-9);
}

TEST(FixedPoint, ScalarSelfLoop) {
  const ModelSpec m = test::self_loop();
  const ValueTable v = solve_fixed_point(m, m.reference_theta());
  EXPECT_NEAR(v(0, 0), -10.0, 1e-9);
}

TEST(FixedPoint, ContractionFactorAtMostBeta) {
  for (double beta : {0.5, 0.9, 0.99}) {
    const MachineReplacementModel m(5, beta);
    FixedPointTrace trace;
    solve_fixed_point(m.spec(), m.spec().reference_theta(), {}, &trace);
    ASSERT_GT(trace.residuals.size(), 6u);
    for (std::size_t i = 5; i + 1 < trace.residuals.size(); ++i)
      // Rounding in values of magnitude ~1e2 leaves an absolute floor near 1e-13.
      if (trace.residuals[i] > 1e-11) {
        EXPECT_LE(trace.residuals[i + 1], beta * trace.residuals[i] + 1e-12)
            << "beta " << beta << " sweep " << i;
      }
  }
}

TEST(FixedPoint, ResidualWithinTolerance) {
  const FoodChoiceModel food = test::food_1a();
  FixedPointTrace trace;
  FixedPointConfig cfg;
  cfg.tolerance = 1e-8;
  solve_fixed_point(food.spec(), food.spec().reference_theta(), cfg, &trace);
  EXPECT_LE(trace.residuals.back(), 1e-8);
}

TEST(FixedPoint, EulerConstantShiftsValuesUniformly) {
  for (double beta : {0.5, 0.9, 0.995}) {
    FoodChoiceConfig cfg;
    cfg.beta = beta;
    const FoodChoiceModel food(cfg);
    FixedPointConfig off, on;
    off.tolerance = on.tolerance = 1e-11;
    on.include_euler_constant = true;
    const auto& theta = food.spec().reference_theta();
    const ValueTable a = solve_fixed_point(food.spec(), theta, off);
    const ValueTable b = solve_fixed_point(food.spec(), theta, on);
    const double gap = beta * kEulerGamma / (1.0 - beta);
    for (std::size_t i = 0; i < a.values.size(); ++i)
      EXPECT_NEAR(b.values.data()[i] - a.values.data()[i], gap, 1e-8);
    const RealTable pa = ccps_from_values(a.values), pb = ccps_from_values(b.values);
    for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_NEAR(pa.data()[i], pb.data()[i], 1e-10);
  }
}

TEST(FixedPoint, ZeroUtilityGivesUniformCcps) {
  ModelSpec::Builder b("flat", 3, 4, 0.9, Theta({"c"}, {1.0}));
  for (StateIndex s = 0; s < 3; ++s)
    for (ActionIndex a = 0; a < 4; ++a) b.transition(s, a, (s + a) % 3, 1.0);
  const ModelSpec m = std::move(b).build();
  const RealTable p = ccps_from_fixed_point(m, m.reference_theta());
  for (double x : p.data()) EXPECT_NEAR(x, 0.25, 1e-12);
}

TEST(FixedPoint, ReplacementProbabilityRisesWithMileage) {
  const MachineReplacementModel m(5);
  const RealTable p = ccps_from_fixed_point(m.spec(), m.spec().reference_theta());
  for (StateIndex s = 0; s + 1 < 5; ++s) EXPECT_LT(p(s, 1), p(s + 1, 1));
  for (StateIndex s = 0; s < 5; ++s) EXPECT_NEAR(p(s, 0) + p(s, 1), 1.0, 1e-12);
}

TEST(FixedPoint, BudgetExhaustionReportsResidual) {
  const MachineReplacementModel m(5);
  FixedPointConfig cfg;
  cfg.max_iterations = 3;
  try {
    solve_fixed_point(m.spec(), m.spec().reference_theta(), cfg);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(e.iterations_run, 3u);
    EXPECT_GT(e.last_residual, 1e-10);
  }
  cfg.tolerance = 0.0;
  EXPECT_THROW(solve_fixed_point(m.spec(), m.spec().reference_theta(), cfg), ArgumentError);
}

TEST(FixedPoint, DefaultBudgetRisesForHighDiscount) {
  EXPECT_EQ(FixedPointConfig::default_budget(0.9), 100000u);
  EXPECT_EQ(FixedPointConfig::default_budget(0.995), 1000000u);
}
