#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "ddc/first_stage.hpp"
#include "support.hpp"

using namespace ddc;

namespace {

Panel counted_panel() {
  // One state-1 agent per record; 75 maintain, 25 replace.
  Panel p(5, 2, 100, 1);
  for (std::size_t i = 0; i < 100; ++i) p.set(i, 0, 0, i < 75 ? 0 : 1);
  return p;
}

}  // namespace

TEST(Floor, LeavesInteriorRowsUntouched) {
  std::vector<double> p = {0.75, 0.25};
  apply_floor(p, 1e-6);
  EXPECT_EQ(p, (std::vector<double>{0.75, 0.25}));
}

TEST(Floor, DegenerateRowGetsFloorMass) {
  std::vector<double> p = {1.0, 0.0, 0.0};
  apply_floor(p, 1e-6);
  EXPECT_EQ(p[1], 1e-6);
  EXPECT_EQ(p[2], 1e-6);
  EXPECT_NEAR(p[0], 1.0 - 2e-6, 1e-15);
}

TEST(Floor, RescaledEntriesBelowFloorArePinnedToo) {
  std::vector<double> p = {1.0 - 1.5e-6, 1.5e-6, 0.0, 0.0};
  apply_floor(p, 1e-6);
  double total = 0.0;
  for (double x : p) {
    EXPECT_GE(x, 1e-6);
    total += x;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Floor, RandomRowsObeyInvariants) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 2000; ++rep) {
    std::vector<double> p(2 + rep % 9);
    double total = 0.0;
    for (double& x : p) {
      x = u(gen) < 0.4 ? 0.0 : std::pow(u(gen), 8.0);
      total += x;
    }
    if (total == 0.0) p[0] = total = 1.0;
    for (double& x : p) x /= total;
    apply_floor(p, 1e-3);
    double sum = 0.0;
    for (double x : p) {
      EXPECT_GE(x, 1e-3);
      sum += x;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  std::vector<double> wide(1000, 0.001);
  EXPECT_THROW(apply_floor(wide, 1e-3), ArgumentError);
}

TEST(CcpEstimates, FrequencyEstimator) {
  const CcpEstimate e = estimate_ccps(counted_panel());
  EXPECT_DOUBLE_EQ(e.ccps(0, 0), 0.75);
  EXPECT_DOUBLE_EQ(e.ccps(0, 1), 0.25);
  EXPECT_EQ(e.state_counts[0], 100u);
  EXPECT_TRUE(std::isnan(e.ccps(1, 0)));
}

TEST(CcpEstimates, SingleRecordIsFloored) {
  Panel p(5, 2, 1, 1);
  p.set(0, 0, 2, 0);
  const CcpEstimate e = estimate_ccps(p);
  EXPECT_EQ(e.ccps(2, 1), kDefaultFloor);
  EXPECT_NEAR(e.ccps(2, 0), 1.0 - kDefaultFloor, 1e-15);
}

TEST(CcpEstimates, EmptyPanelRejected) {
  EXPECT_THROW(estimate_ccps(Panel(5, 2, 0, 0)), ArgumentError);
  EXPECT_THROW(estimate_transitions(Panel(5, 2, 0, 0)), ArgumentError);
}

TEST(CcpEstimates, LargeMachinePanelIsAccurate) {
  const MachineReplacementModel m(5);
  const RealTable truth = ccps_from_fixed_point(m.spec(), m.spec().reference_theta());
  const FirstStage fs = test::estimated_first_stage(m.spec(), 10000, 100);
  double worst = 0.0;
  for (StateIndex s = 0; s < 5; ++s) {
    ASSERT_TRUE(fs.visited(s));
    for (ActionIndex a = 0; a < 2; ++a) worst = std::max(worst, std::abs(fs.ccp(s, a) - truth(s, a)));
  }
  EXPECT_LE(worst, 0.01);
}

TEST(CcpEstimates, ErrorShrinksWithPanelSize) {
  const MachineReplacementModel m(5);
  const RealTable truth = ccps_from_fixed_point(m.spec(), m.spec().reference_theta());
  const auto max_error = [&](std::size_t agents) {
    const FirstStage fs = test::estimated_first_stage(m.spec(), agents, 100, 21);
    double worst = 0.0;
    for (StateIndex s = 0; s < 5; ++s)
      for (ActionIndex a = 0; a < 2; ++a) worst = std::max(worst, std::abs(fs.ccp(s, a) - truth(s, a)));
    return worst;
  };
  EXPECT_LE(max_error(100000), 0.5 * max_error(1000));
}

TEST(TransitionEstimates, MachineRowsAreDegenerate) {
  const MachineReplacementModel m(5);
  const FirstStage fs = test::estimated_first_stage(m.spec(), 2000, 50);
  const auto row = fs.transition_row(MachineReplacementModel::index_of(2), 0);
  ASSERT_EQ(row.size(), 1u);
  EXPECT_EQ(row[0].next, MachineReplacementModel::index_of(3));
  EXPECT_EQ(row[0].prob, 1.0);
}

TEST(TransitionEstimates, UnvisitedPairHasNoRow) {
  const FirstStage fs = estimate_first_stage(counted_panel());
  EXPECT_FALSE(fs.has_transition(0, 0));  // single-period agents leave no successor
  EXPECT_THROW(fs.transition_row(0, 0), CoverageError);
  EXPECT_THROW(fs.ccp(3, 0), CoverageError);
}

TEST(TransitionEstimates, FoodRowsMatchModel) {
  const FoodChoiceModel food = test::food_1a();
  const FirstStage fs = test::estimated_first_stage(food.spec(), 5000, 100);
  std::size_t rows = 0;
  for (StateIndex s = 0; s < food.num_states(); ++s)
    for (ActionIndex a = 0; a < food.spec().num_actions(); ++a) {
      if (!fs.has_transition(s, a)) continue;
      ++rows;
      const auto est = fs.transition_row(s, a);
      ASSERT_EQ(est.size(), 1u);
      EXPECT_EQ(est[0].next, food.spec().transition_row(s, a)[0].next);
      EXPECT_EQ(est[0].prob, 1.0);
    }
  EXPECT_GT(rows, food.num_states());
}

TEST(TransitionEstimates, StochasticRowsAreNormalisedAndFloored) {
  ModelSpec::Builder b("coin", 2, 1, 0.9, Theta({"c"}, {1.0}));
  b.utility(0, 0, 0, {-1.0}).utility(1, 0, 0, {-1.0});
  b.transition(0, 0, 0, 0.3).transition(0, 0, 1, 0.7).transition(1, 0, 0, 1.0);
  const ModelSpec m = std::move(b).build();
  RealTable ccps(2, 1, 1.0);
  const FirstStage fs = estimate_first_stage(generate_panel(m, ccps, 4, 2000, 50));
  const auto row = fs.transition_row(0, 0);
  ASSERT_EQ(row.size(), 2u);
  EXPECT_NEAR(row[0].prob + row[1].prob, 1.0, 1e-12);
  EXPECT_NEAR(row[1].prob, 0.7, 0.02);
  for (const auto& t : row) EXPECT_GE(t.prob, kDefaultFloor);
}

TEST(FirstStageIo, RoundTripPreservesFingerprint) {
  const FoodChoiceModel food = test::food_1a();
  const FirstStage fs = test::estimated_first_stage(food.spec(), 3000, 40);
  const std::string dir = test::scratch_dir("first_stage");
  write_first_stage(fs, dir);
  const FirstStage back = read_first_stage(dir);
  EXPECT_EQ(back.fingerprint(), fs.fingerprint());
  for (StateIndex s = 0; s < fs.num_states(); ++s) {
    EXPECT_EQ(back.visited(s), fs.visited(s));
    if (!fs.visited(s)) continue;
    for (ActionIndex a = 0; a < fs.num_actions(); ++a) EXPECT_EQ(back.ccp(s, a), fs.ccp(s, a));
  }

  std::ofstream(dir + "/visits.csv", std::ios::app) << "0,1\n";
  EXPECT_THROW(read_first_stage(dir), FormatError);
}

TEST(FirstStageExact, CarriesModelRowsWithoutFloor) {
  const MachineReplacementModel m(5);
  const FirstStage fs = test::exact_first_stage(m.spec());
  const RealTable truth = ccps_from_fixed_point(m.spec(), m.spec().reference_theta());
  EXPECT_EQ(fs.floor(), 0.0);
  for (StateIndex s = 0; s < 5; ++s) {
    EXPECT_TRUE(fs.fully_covered(s));
    EXPECT_EQ(fs.ccp(s, 1), truth(s, 1));
  }
}
