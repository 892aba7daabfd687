#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ddc/config.hpp"
#include "ddc/core.hpp"
#include "ddc/csv.hpp"
#include "ddc/rng.hpp"

using namespace ddc;

TEST(Softmax, SymmetricValuesGiveUniform) {
  const auto p = ccp_from_values({0.0, 0.0});
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(Softmax, AnalyticTwoAction) {
  const auto p = ccp_from_values({std::log(3.0), 0.0});
  EXPECT_NEAR(p[0], 0.75, 1e-15);
  EXPECT_NEAR(p[1], 0.25, 1e-15);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> d(-50.0, 50.0);
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> v(1 + rep % 11);
    for (double& x : v) x = d(gen);
    const auto p = ccp_from_values(v);
    double total = 0.0;
    for (double x : p) total += x;
    EXPECT_NEAR(total, 1.0, 1e-12);
    const double c = d(gen) * 20.0;
    std::vector<double> shifted = v;
    for (double& x : shifted) x += c;
    const auto q = ccp_from_values(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-12);
  }
}

TEST(Softmax, ExtremeValuesStayFinite) {
  const auto p = ccp_from_values({1000.0, -1000.0, 999.0});
  for (double x : p) EXPECT_TRUE(std::isfinite(x));
  EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-12);
}

TEST(Softmax, RejectsNonFinite) {
  EXPECT_THROW(ccp_from_values({0.0, NAN}), NumericError);
  EXPECT_THROW(ccp_from_values({INFINITY, 0.0}), NumericError);
  EXPECT_THROW(ccp_from_values({}), ArgumentError);
}

TEST(LogSumExp, MatchesNaiveFormula) {
  const double v[] = {0.3, -1.2, 2.5};
  EXPECT_NEAR(log_sum_exp(v, 3), std::log(std::exp(0.3) + std::exp(-1.2) + std::exp(2.5)), 1e-14);
}

TEST(ThetaTest, ValidatesShapeAndFiniteness) {
  EXPECT_THROW(Theta({"a", "b"}, {1.0}), ArgumentError);
  EXPECT_THROW(Theta({"a"}, {NAN}), ArgumentError);
  Theta t({"a", "b"}, {1.0, 2.0});
  t.set_bounds({0.0, 0.0}, {5.0, 5.0});
  EXPECT_TRUE(t.within_bounds({1.0, 4.0}));
  EXPECT_FALSE(t.within_bounds({-1.0, 4.0}));
  EXPECT_TRUE(t.with_values({3.0, 3.0}).lower().has_value());
}

TEST(Config, ParsesKeysListsAndComments) {
  const auto c = KeyValueConfig::parse("# header\nkind = machine\ntheta = 1, 4 # trailing\n\n");
  EXPECT_EQ(c.get("kind"), "machine");
  EXPECT_EQ(c.get_doubles("theta"), (std::vector<double>{1.0, 4.0}));
  EXPECT_EQ(c.get_int_or("states", 5), 5);
  EXPECT_THROW(c.get("missing"), ConfigError);
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_THROW(KeyValueConfig::parse("just text"), ConfigError);
  EXPECT_THROW(KeyValueConfig::parse("a = 1\na = 2"), ConfigError);
  EXPECT_THROW(KeyValueConfig::parse("a = x").get_double("a"), ConfigError);
  EXPECT_THROW(KeyValueConfig::parse("a = 1.5").get_int("a"), ConfigError);
}

TEST(Csv, DoublesRoundTripExactly) {
  for (double v : {0.1, -1e-300, 12345.678901234567, std::nextafter(1.0, 2.0)})
    EXPECT_EQ(parse_double(format_double(v), "test"), v);
  EXPECT_THROW(parse_double("1.0x", "test"), FormatError);
  EXPECT_THROW(parse_uint("-3", "test"), FormatError);
}

TEST(RngTest, DerivedStreamsAreDistinctAndReproducible) {
  EXPECT_EQ(derive_seed(1, {kPathStream, 3}), derive_seed(1, {kPathStream, 3}));
  EXPECT_NE(derive_seed(1, {kPathStream, 3}), derive_seed(1, {kPathStream, 4}));
  EXPECT_NE(derive_seed(1, {kPathStream, 3}), derive_seed(2, {kPathStream, 3}));
  EXPECT_NE(derive_seed(1, {kPathStream}), derive_seed(1, {kPanelStream}));
}

TEST(RngTest, CategoricalSkipsZeroMassAndMatchesFrequencies) {
  Rng rng(5);
  const double p[] = {0.0, 0.25, 0.0, 0.75};
  std::array<int, 4> hits{};
  const int n = 200000;
  for (int i = 0; i < n; ++i) ++hits[rng.categorical(p, 4)];
  EXPECT_EQ(hits[0], 0);
  EXPECT_EQ(hits[2], 0);
  EXPECT_NEAR(hits[1] / double(n), 0.25, 0.005);
}

TEST(RngTest, BelowIsUniform) {
  Rng rng(9);
  std::array<int, 3> hits{};
  for (int i = 0; i < 300000; ++i) ++hits[rng.below(3)];
  for (int h : hits) EXPECT_NEAR(h / 300000.0, 1.0 / 3.0, 0.005);
}
