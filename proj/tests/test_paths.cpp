#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>

#include "ddc/paths.hpp"
#include "support.hpp"

using namespace ddc;

namespace {

struct MachineFixture : ::testing::Test {
  MachineReplacementModel model{5};
  FirstStage fs = test::estimated_first_stage(model.spec(), 10000, 100);
};

std::vector<std::uint8_t> slurp(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::string& file, const std::vector<std::uint8_t>& bytes) {
  std::ofstream(file, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                               static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST(Simulate, DeterministicChainUnderForcedMaintenance) {
  const MachineReplacementModel m(5);
  RealTable ccps(5, 2, 0.0);
  for (StateIndex s = 0; s < 5; ++s) ccps(s, 0) = 1.0;
  const FirstStage fs = FirstStage::exact(m.spec(), ccps);
  const PathSet p = simulate_paths(fs, StartRule::fixed({{0, 0}}), 5, 1, 9);
  for (std::size_t t = 0; t < 5; ++t) {
    EXPECT_EQ(p.state(0, t), t);
    EXPECT_EQ(p.action(0, t), 0u);
  }
}

TEST_F(MachineFixture, AllPairsStartsEveryPairEqually) {
  const PathSet p = simulate_paths(fs, StartRule::all_pairs(), 10, 500, 3);
  std::map<std::pair<StateIndex, ActionIndex>, int> starts;
  for (std::size_t k = 0; k < p.num_paths(); ++k) ++starts[{p.state(k, 0), p.action(k, 0)}];
  EXPECT_EQ(starts.size(), 10u);
  for (const auto& [pair, n] : starts) EXPECT_EQ(n, 50);
  EXPECT_THROW(simulate_paths(fs, StartRule::all_pairs(), 10, 505, 3), ArgumentError);
}

TEST(Simulate, BootstrapEmitsOnePathPerActionAtCoveredStates) {
  const FoodChoiceModel food = test::food_1a();
  const FirstStage fs = test::estimated_first_stage(food.spec(), 5000, 100);
  const std::size_t J = food.spec().num_actions();
  for (const StartRule& rule : {StartRule::bootstrap(), StartRule::bootstrap_weighted()}) {
    const PathSet p = simulate_paths(fs, rule, 5, 60 * J, 8);
    for (std::size_t b = 0; b < 60; ++b) {
      const StateIndex s = p.state(b * J, 0);
      EXPECT_TRUE(fs.fully_covered(s));
      for (ActionIndex a = 0; a < J; ++a) {
        EXPECT_EQ(p.state(b * J + a, 0), s);
        EXPECT_EQ(p.action(b * J + a, 0), a);
      }
    }
    EXPECT_THROW(simulate_paths(fs, rule, 5, 61 * J + 1, 8), ArgumentError);
  }
}

TEST_F(MachineFixture, ActionFrequenciesFollowFirstStage) {
  const PathSet p = simulate_paths(fs, StartRule::all_pairs(), 50, 500, 4);
  std::vector<double> visits(5), replace(5);
  for (std::size_t k = 0; k < p.num_paths(); ++k)
    for (std::size_t t = 1; t < p.t_end(); ++t) {
      visits[p.state(k, t)] += 1;
      replace[p.state(k, t)] += p.action(k, t);
    }
  for (StateIndex s = 0; s < 5; ++s) {
    if (visits[s] < 200) continue;
    EXPECT_NEAR(replace[s] / visits[s], fs.ccp(s, 1), 0.05) << "state " << s;
  }
}

TEST(Simulate, StaysInsideFirstStageSupport) {
  const FoodChoiceModel food = test::food_1a();
  const FirstStage fs = test::estimated_first_stage(food.spec(), 2000, 100);
  const PathSet p = simulate_paths(fs, StartRule::bootstrap(), 20, 300, 12);
  for (std::size_t k = 0; k < p.num_paths(); ++k)
    for (std::size_t t = 1; t < p.t_end(); ++t) {
      const auto row = fs.transition_row(p.state(k, t - 1), p.action(k, t - 1));
      bool found = false;
      for (const auto& tr : row) found |= tr.next == p.state(k, t);
      EXPECT_TRUE(found);
      EXPECT_GT(fs.ccp(p.state(k, t), p.action(k, t)), 0.0);
      if (t + 1 < p.t_end()) {
        EXPECT_TRUE(fs.has_transition(p.state(k, t), p.action(k, t)));
      }
    }
}

TEST_F(MachineFixture, SeedDeterministicAndWorkerIndependent) {
  const PathSet a = simulate_paths(fs, StartRule::all_pairs(), 20, 500, 77);
  ::setenv("DDC_WORKERS", "1", 1);
  const PathSet b = simulate_paths(fs, StartRule::all_pairs(), 20, 500, 77);
  ::unsetenv("DDC_WORKERS");
  EXPECT_TRUE(a == b);
  EXPECT_EQ(a.sealed_id(), b.sealed_id());
  const PathSet c = simulate_paths(fs, StartRule::all_pairs(), 20, 500, 78);
  EXPECT_FALSE(a == c);
  EXPECT_NE(a.sealed_id(), c.sealed_id());
}

TEST_F(MachineFixture, RejectsBadArguments) {
  EXPECT_THROW(simulate_paths(fs, StartRule::all_pairs(), 1, 500, 1), ArgumentError);
  EXPECT_THROW(simulate_paths(fs, StartRule::all_pairs(), 5, 0, 1), ArgumentError);
  EXPECT_THROW(simulate_paths(fs, StartRule::fixed({{9, 0}}), 5, 1, 1), ArgumentError);
  EXPECT_THROW(StartRule::parse("random"), ArgumentError);
}

TEST(Simulate, StartWithoutRowsIsCoverageError) {
  Panel panel(5, 2, 1, 3);
  panel.set(0, 0, 0, 0);
  panel.set(0, 1, 1, 0);
  panel.set(0, 2, 2, 0);
  const FirstStage fs = estimate_first_stage(panel);
  EXPECT_THROW(simulate_paths(fs, StartRule::fixed({{2, 0}}), 3, 1, 1), CoverageError);
  EXPECT_THROW(simulate_paths(fs, StartRule::fixed({{0, 1}}), 3, 1, 1), CoverageError);
}

TEST_F(MachineFixture, BinaryRoundTripIsExact) {
  const PathSet p = simulate_paths(fs, StartRule::all_pairs(), 50, 500, 5);
  const std::string file = test::scratch_dir("paths") + "/paths.bin";
  write_paths(p, file);
  EXPECT_EQ(std::filesystem::file_size(file), 64u + 500u * 50u * 8u);
  EXPECT_EQ(p.binary_size(), std::filesystem::file_size(file));
  const PathSet q = read_paths(file);
  EXPECT_TRUE(p == q);
  EXPECT_EQ(q.sealed_id(), p.sealed_id());
}

TEST_F(MachineFixture, ReaderRejectsDamage) {
  const PathSet p = simulate_paths(fs, StartRule::all_pairs(), 10, 100, 5);
  const std::string dir = test::scratch_dir("paths_damage");
  const std::string file = dir + "/paths.bin";
  write_paths(p, file);
  const auto good = slurp(file);

  auto bad = good;
  bad[200] ^= 1;
  spit(file, bad);
  EXPECT_THROW(read_paths(file), FormatError);

  bad = good;
  bad[0] = 'X';
  spit(file, bad);
  EXPECT_THROW(read_paths(file), FormatError);

  bad = good;
  bad[4] = 9;
  spit(file, bad);
  EXPECT_THROW(read_paths(file), FormatError);

  bad.assign(good.begin(), good.end() - 4);
  spit(file, bad);
  EXPECT_THROW(read_paths(file), FormatError);

  bad = good;
  bad.push_back(0);
  spit(file, bad);
  EXPECT_THROW(read_paths(file), FormatError);

  EXPECT_THROW(read_paths(dir + "/missing.bin"), FormatError);
}

TEST(PathsIo, CsvExportIsLargerThanBinary) {
  const FoodChoiceModel food = test::food_1a();
  const FirstStage fs = test::estimated_first_stage(food.spec(), 20000, 100);
  const PathSet p = simulate_paths(fs, StartRule::bootstrap(), 5, 20 * food.spec().num_pairs(), 6);
  const std::string dir = test::scratch_dir("paths_csv");
  write_paths(p, dir + "/p.bin");
  write_paths_csv(p, dir + "/p.csv");
  const auto bin = std::filesystem::file_size(dir + "/p.bin");
  const auto csv = std::filesystem::file_size(dir + "/p.csv");
  // Raw u32 pairs cost 8 bytes; a CSV row here is at least "k,t,s,a\n".
  EXPECT_GT(csv, bin);
  EXPECT_GE(csv, 8 * p.num_pairs() + 64);
  EXPECT_EQ(csv_byte_size(p), csv);
}
