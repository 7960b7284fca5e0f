#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "ramp/dataio.hpp"

using namespace ramp;

namespace {

ReturnPanel parse(const std::string& text) {
  std::istringstream in(text);
  return parse_return_panel(in);
}

ReturnPanel single_asset(const std::vector<double>& r) {
  ReturnPanel p;
  p.asset_names = {"A"};
  p.returns = Matrix(r.size(), 1);
  for (std::size_t t = 0; t < r.size(); ++t) {
    p.years.push_back(2000 + static_cast<int>(t));
    p.returns(t, 0) = r[t];
  }
  return p;
}

}  // namespace

TEST(LoadReturnPanel, ParsesSingleRow) {
  const auto p = parse("year,SP500,TBill\n1928,0.4381,0.0308\n");
  ASSERT_EQ(p.periods(), 1u);
  ASSERT_EQ(p.assets(), 2u);
  EXPECT_EQ(p.years[0], 1928);
  EXPECT_EQ(p.asset_names, (std::vector<std::string>{"SP500", "TBill"}));
  EXPECT_DOUBLE_EQ(p.returns(0, 0), 0.4381);
  EXPECT_DOUBLE_EQ(p.returns(0, 1), 0.0308);
}

TEST(LoadReturnPanel, SortsRowsByYear) {
  const auto p = parse("year,A\n1930,0.1\n1929,-0.2\n");
  EXPECT_EQ(p.years, (std::vector<int>{1929, 1930}));
  EXPECT_DOUBLE_EQ(p.returns(0, 0), -0.2);
  EXPECT_DOUBLE_EQ(p.returns(1, 0), 0.1);
}

TEST(LoadReturnPanel, AcceptsCrlfAndBlankLines) {
  const auto p = parse("year,A\r\n\r\n2001,0.05\r\n2002,0.06\r\n");
  EXPECT_EQ(p.periods(), 2u);
}

TEST(LoadReturnPanel, RejectsTotalLoss) {
  EXPECT_THROW(parse("year,A\n2000,-1.5\n"), ValidationError);
  EXPECT_THROW(parse("year,A\n2000,-1.0\n"), ValidationError);
}

TEST(LoadReturnPanel, MalformedCellReportsLocation) {
  try {
    parse("year,A,B\n2000,0.1,abc\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 2u);
    EXPECT_EQ(e.column(), 3u);
  }
}

TEST(LoadReturnPanel, RejectsDuplicateYearsAndRaggedRows) {
  EXPECT_THROW(parse("year,A\n2000,0.1\n2000,0.2\n"), ValidationError);
  EXPECT_THROW(parse("year,A,B\n2000,0.1\n"), ValidationError);
  EXPECT_THROW(parse("yr,A\n2000,0.1\n"), ParseError);
  EXPECT_THROW(parse("year,A\n2000,nan\n"), ValidationError);
  EXPECT_THROW(load_return_panel("/nonexistent/panel.csv"), ValidationError);
}

TEST(LoadReturnPanel, ShuffledRowsLoadIdentically) {
  const auto panel = generate_synthetic_panel(1950, 40, 7);
  std::ostringstream os;
  write_return_panel(os, panel);
  std::istringstream lines(os.str());
  std::string header, line;
  std::getline(lines, header);
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(rows.begin(), rows.end(), rng);
    std::string text = header + "\n";
    for (const auto& r : rows) text += r + "\n";
    const auto reloaded = parse(text);
    EXPECT_EQ(reloaded.years, panel.years);
    EXPECT_EQ(reloaded.asset_names, panel.asset_names);
    EXPECT_EQ(reloaded.returns, panel.returns);
  }
}

TEST(ComputeFeatures, ZeroVarianceGivesZeroVolatility) {
  const auto fm = compute_features(single_asset({0.0, 0.0, 0.0}), 2, {});
  ASSERT_EQ(fm.rows(), 2u);
  EXPECT_EQ(fm.feature_names[0], "vol_A");
  EXPECT_EQ(fm.values(0, 0), 0.0);
  EXPECT_EQ(fm.values(1, 0), 0.0);
}

TEST(ComputeFeatures, ConstantSeriesVolatilityIsExactlyZero) {
  const auto fm = compute_features(single_asset(std::vector<double>(12, 0.0731)), 5, {});
  for (std::size_t t = 0; t < fm.rows(); ++t) EXPECT_EQ(fm.values(t, 0), 0.0);
}

TEST(ComputeFeatures, RollingDrawdownUsesWindowWealth) {
  const auto fm = compute_features(single_asset({0.10, -0.10}), 2, {});
  ASSERT_EQ(fm.rows(), 1u);
  EXPECT_EQ(fm.feature_names[1], "dd_A");
  EXPECT_NEAR(fm.values(0, 1), 0.99 / 1.10 - 1.0, 1e-15);
  EXPECT_NEAR(fm.values(0, 1), -0.10, 1e-15);
}

TEST(ComputeFeatures, SampleStdAndTrailingMean) {
  const auto fm = compute_features(single_asset({0.01, 0.02, 0.03}), 3, {});
  ASSERT_EQ(fm.rows(), 1u);
  EXPECT_NEAR(fm.values(0, 0), 0.01, 1e-15);  // sample std, divisor n-1
  EXPECT_NEAR(fm.values(0, 2), 0.02, 1e-15);  // trailing mean
  EXPECT_EQ(fm.years, std::vector<int>{2002});
}

TEST(ComputeFeatures, SpreadColumn) {
  ReturnPanel p;
  p.asset_names = {"Baa", "T10Y"};
  p.years = {2000, 2001};
  p.returns = Matrix{{0.01, 0.02}, {0.08, 0.05}};
  const auto fm = compute_features(p, 2, {{"Baa", "T10Y"}});
  const auto it = std::find(fm.feature_names.begin(), fm.feature_names.end(), "spread_Baa_T10Y");
  ASSERT_NE(it, fm.feature_names.end());
  EXPECT_NEAR(fm.values(0, static_cast<std::size_t>(it - fm.feature_names.begin())), 0.03, 1e-15);
}

TEST(ComputeFeatures, Errors) {
  const auto p = single_asset({0.1, 0.2});
  EXPECT_THROW(compute_features(p, 3, {}), ValidationError);
  EXPECT_THROW(compute_features(p, 1, {}), ValidationError);
  EXPECT_THROW(compute_features(p, 2, {{"A", "Missing"}}), ValidationError);
}

TEST(ComputeFeatures, PrefixAgreesWithFullPanel) {
  const auto panel = generate_synthetic_panel(1930, 60, 11);
  const auto spreads = default_spread_pairs(panel.asset_names);
  const auto full = compute_features(panel, 5, spreads);
  for (std::size_t len : {5u, 12u, 33u, 59u}) {
    const auto prefix = compute_features(panel.slice(0, len), 5, spreads);
    ASSERT_EQ(prefix.rows(), len - 4);
    for (std::size_t t = 0; t < prefix.rows(); ++t)
      for (std::size_t j = 0; j < prefix.cols(); ++j) EXPECT_EQ(prefix.values(t, j), full.values(t, j));
  }
}

TEST(DefaultSpreadPairs, DetectsNamedColumns) {
  const auto pairs = default_spread_pairs({"SP500", "Baa", "T10Y", "TBill"});
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0], SpreadPair("Baa", "T10Y"));
  EXPECT_EQ(pairs[1], SpreadPair("SP500", "TBill"));
  EXPECT_TRUE(default_spread_pairs({"X", "Y"}).empty());
}

TEST(SyntheticPanel, DeterministicAndValid) {
  const auto a = generate_synthetic_panel(1928, 96, 42);
  const auto b = generate_synthetic_panel(1928, 96, 42);
  EXPECT_EQ(a.returns, b.returns);
  EXPECT_EQ(a.years.front(), 1928);
  EXPECT_EQ(a.years.back(), 2023);
  for (double r : a.returns.data()) EXPECT_GT(r, -1.0);
}
