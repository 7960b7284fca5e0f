#include <gtest/gtest.h>

#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <random>

#include "ramp/stats.hpp"

using namespace ramp;

namespace {

// I_x(2,5) by the binomial-sum identity: P(Bin(6, x) >= 2).
double ibeta_2_5(double x) { return 1.0 - std::pow(1 - x, 6) - 6.0 * x * std::pow(1 - x, 5); }

}  // namespace

TEST(IncompleteBeta, Examples) {
  for (double x : {0.0, 0.1, 0.37, 0.5, 0.999, 1.0}) EXPECT_NEAR(regularized_incomplete_beta(1, 1, x), x, 1e-14);
  EXPECT_NEAR(regularized_incomplete_beta(2, 2, 0.5), 0.5, 1e-14);
  EXPECT_NEAR(regularized_incomplete_beta(2, 5, 0.3), ibeta_2_5(0.3), 1e-12);
  EXPECT_NEAR(regularized_incomplete_beta(2, 5, 0.3), 0.579825, 1e-6);
  EXPECT_THROW(regularized_incomplete_beta(0, 1, 0.5), ValidationError);
  EXPECT_THROW(regularized_incomplete_beta(1, 1, 1.5), ValidationError);
}

TEST(IncompleteBeta, AgreesWithBoostOnRandomArguments) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> ab(0.2, 80.0), xs(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double a = ab(rng), b = ab(rng), x = xs(rng);
    EXPECT_NEAR(regularized_incomplete_beta(a, b, x), boost::math::ibeta(a, b, x), 1e-10)
        << "a=" << a << " b=" << b << " x=" << x;
  }
}

TEST(Anova, HandComputedGroups) {
  const auto r = anova_f({{1, 2, 3}, {2, 3, 4}});
  EXPECT_NEAR(r.f, 1.5, 1e-14);
  EXPECT_EQ(r.df_between, 1u);
  EXPECT_EQ(r.df_within, 4u);
  EXPECT_NEAR(r.p, boost::math::ibeta(2.0, 0.5, 4.0 / (4.0 + 1.5)), 1e-12);
}

TEST(Anova, IdenticalGroupsGiveZeroF) {
  const auto r = anova_f({{1, 2, 3}, {1, 2, 3}});
  EXPECT_EQ(r.f, 0.0);
  EXPECT_EQ(r.p, 1.0);
  EXPECT_THROW(anova_f({{1, 1}, {1, 1}}), NumericalError);
  EXPECT_THROW(anova_f({{1, 2}}), ValidationError);
}

TEST(Anova, FSurvivalRoundTrip) {
  EXPECT_NEAR(f_survival(3.231, 1, 65), 0.0769, 0.0005);
  EXPECT_NEAR(f_survival(3.231, 1, 65), boost::math::ibetac(0.5, 32.5, 3.231 / (3.231 + 65.0)), 1e-10);
}

TEST(Anova, PValuesBoundedOnRandomGroups) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<double>> groups(2 + trial % 3);
    for (std::size_t g = 0; g < groups.size(); ++g)
      for (int i = 0; i < 3 + trial % 7; ++i) groups[g].push_back(n(rng) + 0.3 * g);
    const auto r = anova_f(groups);
    EXPECT_GE(r.f, 0.0);
    EXPECT_GE(r.p, 0.0);
    EXPECT_LE(r.p, 1.0);
    if (groups.size() == 2) {
      EXPECT_NEAR(pairwise_mean_test(groups[0], groups[1]).p, r.p, 1e-10);
    }
  }
}

TEST(Pairwise, Examples) {
  const auto same = pairwise_mean_test({1, 2, 3}, {1, 2, 3});
  EXPECT_EQ(same.diff, 0.0);
  EXPECT_NEAR(same.p, 1.0, 1e-15);
  const auto r = pairwise_mean_test({1, 2, 3}, {2, 3, 4});
  EXPECT_NEAR(r.diff, -1.0, 1e-15);
  EXPECT_NEAR(r.p, anova_f({{1, 2, 3}, {2, 3, 4}}).p, 1e-10);
  // t = -1 / sqrt(1 * (2/3)); q = sqrt(2) |t|
  EXPECT_NEAR(r.q, std::sqrt(2.0) / std::sqrt(2.0 / 3.0), 1e-14);
}

TEST(MutualInformation, Examples) {
  EXPECT_NEAR(mutual_information({0, 0, 1, 1}, {-1, -1, 1, 1}, 2).nats, std::log(2.0), 1e-12);
  EXPECT_EQ(mutual_information({0, 0, 0, 0}, {-1, 0, 1, 2}, 2).nats, 0.0);
  EXPECT_NEAR(mutual_information({0, 1, 0, 1}, {-1, -1, 1, 1}, 2).nats, 0.0, 1e-15);
}

TEST(MutualInformation, BinsReducedWhenFewDistinctValues) {
  const auto r = mutual_information({0, 1, 0, 1, 0, 1}, {1, 1, 1, 2, 2, 2}, 5);
  EXPECT_EQ(r.bins_requested, 5u);
  EXPECT_EQ(r.bins_used, 2u);
  EXPECT_GE(r.nats, 0.0);
}

TEST(MutualInformation, NonNegativeAndRankInvariant) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<int> lab(0, 2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> labels(60);
    std::vector<double> r(60), transformed(60);
    for (std::size_t i = 0; i < 60; ++i) {
      labels[i] = lab(rng);
      r[i] = n(rng) + 0.5 * labels[i];
      transformed[i] = std::exp(3.0 * r[i]) + 1.0;  // strictly increasing
    }
    const double mi = mutual_information(labels, r, 5).nats;
    EXPECT_GE(mi, 0.0);
    EXPECT_NEAR(mutual_information(labels, transformed, 5).nats, mi, 1e-15);
  }
}

TEST(Utilities, Examples) {
  for (double g : {0.5, 1.0, 3.0}) EXPECT_EQ(crra_utility(0.0, g), 0.0);
  for (double a : {0.5, 3.0}) EXPECT_EQ(cara_utility(0.0, a), -1.0);
  EXPECT_NEAR(crra_utility(0.03, 3.0), (std::pow(1.03, -2.0) - 1.0) / -2.0, 1e-15);
  EXPECT_NEAR(crra_utility(0.03, 3.0), 0.028702, 5e-7);
  EXPECT_NEAR(cara_utility(0.03, 3.0), -std::exp(-0.09), 1e-15);
  EXPECT_NEAR(cara_utility(0.03, 3.0), -0.913931, 5e-7);
  EXPECT_THROW(crra_utility(-1.0, 3.0), ValidationError);
}

TEST(Utilities, CrraContinuousAtLogCase) {
  for (double r = -0.49; r < 1.0; r += 0.07)
    for (double g : {1.0 - 1e-6, 1.0 + 1e-6}) EXPECT_LT(std::abs(crra_utility(r, g) - std::log1p(r)), 1e-5);
}

TEST(Report, DropsTinyGroupsAndRecordsWarnings) {
  const std::vector<int> labels{0, 0, 0, 1, 1, 1, 2};
  const std::vector<double> returns{0.1, 0.12, 0.08, -0.05, -0.02, -0.08, 0.3};
  const auto rep = regime_stats_report(labels, returns);
  EXPECT_EQ(rep.group_sizes.at(2), 1u);
  EXPECT_EQ(rep.anova.df_between, 1u);
  EXPECT_EQ(rep.pairwise_a, 0);
  EXPECT_EQ(rep.pairwise_b, 1);
  EXPECT_NEAR(rep.pairwise.p, rep.anova.p, 1e-10);
  EXPECT_FALSE(rep.warnings.empty());
  EXPECT_THROW(regime_stats_report({0, 0, 1}, {0.1, 0.2, 0.3}), ValidationError);
}
