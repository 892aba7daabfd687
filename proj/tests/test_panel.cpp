#include <gtest/gtest.h>

#include <cstdlib>

#include "ddc/panel.hpp"
#include "support.hpp"

using namespace ddc;

TEST(PanelGen, ForcedMaintenanceWalksToAbsorbingState) {
  const MachineReplacementModel m(5);
  RealTable ccps(5, 2, 0.0);
  for (StateIndex s = 0; s < 5; ++s) ccps(s, 0) = 1.0;
  const Panel p = generate_panel(m.spec(), ccps, 3, 1, 6, InitialStateRule::fixed(0));
  std::vector<std::size_t> mileage;
  for (std::size_t t = 0; t < 6; ++t) mileage.push_back(MachineReplacementModel::mileage_of(p.state(0, t)));
  EXPECT_EQ(mileage, (std::vector<std::size_t>{1, 2, 3, 4, 5, 5}));
}

TEST(PanelGen, SeedDeterministicAndWorkerIndependent) {
  const MachineReplacementModel m(5);
  const RealTable ccps = ccps_from_fixed_point(m.spec(), m.spec().reference_theta());
  const Panel a = generate_panel(m.spec(), ccps, 42, 300, 50);
  const Panel b = generate_panel(m.spec(), ccps, 42, 300, 50);
  EXPECT_TRUE(a == b);
  ::setenv("DDC_WORKERS", "1", 1);
  const Panel c = generate_panel(m.spec(), ccps, 42, 300, 50);
  ::unsetenv("DDC_WORKERS");
  EXPECT_TRUE(a == c);
  const Panel d = generate_panel(m.spec(), ccps, 43, 300, 50);
  EXPECT_FALSE(a == d);
  EXPECT_EQ(a.size(), 300u * 50u);
}

TEST(PanelGen, EveryRecordPairRespectsTransitionLaw) {
  const MachineReplacementModel machine(5);
  const FoodChoiceModel food = test::food_1a();
  for (const ModelSpec* m : {&machine.spec(), &food.spec()}) {
    const RealTable ccps = ccps_from_fixed_point(*m, m->reference_theta());
    const Panel p = generate_panel(*m, ccps, 5, 2000, 60, InitialStateRule::uniform());
    EXPECT_EQ(count_transition_violations(*m, p), 0u);
  }
}

TEST(PanelGen, ViolationCounterDetectsTampering) {
  const MachineReplacementModel m(5);
  const RealTable ccps = ccps_from_fixed_point(m.spec(), m.spec().reference_theta());
  Panel p = generate_panel(m.spec(), ccps, 5, 10, 10);
  // Replacing always leads to state 0, so a replace followed by state 3 is illegal.
  p.set(0, 0, 0, 1);
  p.set(0, 1, 3, 0);
  EXPECT_GE(count_transition_violations(m.spec(), p), 1u);
}

TEST(PanelGen, ActionFrequenciesMatchGeneratingCcps) {
  const MachineReplacementModel m(5);
  const RealTable ccps = ccps_from_fixed_point(m.spec(), m.spec().reference_theta());
  const Panel p = generate_panel(m.spec(), ccps, 1, 10000, 100);
  std::vector<double> visits(5), replace(5);
  for (std::size_t i = 0; i < p.size(); ++i) {
    visits[p.states()[i]] += 1;
    replace[p.states()[i]] += p.actions()[i];
  }
  for (StateIndex s = 0; s < 5; ++s) {
    ASSERT_GT(visits[s], 0);
    EXPECT_NEAR(replace[s] / visits[s], ccps(s, 1), 0.02);
  }
}

TEST(PanelGen, RejectsInvalidCcps) {
  const MachineReplacementModel m(5);
  RealTable bad(5, 2, 0.4);
  EXPECT_THROW(generate_panel(m.spec(), bad, 1, 10, 10), ArgumentError);
  EXPECT_THROW(generate_panel(m.spec(), RealTable(4, 2, 0.5), 1, 10, 10), ArgumentError);
  EXPECT_THROW(generate_panel(m.spec(), RealTable(5, 2, 0.5), 1, 0, 10), ArgumentError);
}

TEST(PanelIo, CsvRoundTripWithMetadata) {
  const MachineReplacementModel m(5);
  const RealTable ccps = ccps_from_fixed_point(m.spec(), m.spec().reference_theta());
  Panel p = generate_panel(m.spec(), ccps, 17, 40, 12);
  p.config_hash = "abc123";
  const std::string file = test::scratch_dir("panel") + "/panel.csv";
  write_panel(p, file);
  const Panel q = read_panel(file);
  EXPECT_TRUE(p == q);
}
