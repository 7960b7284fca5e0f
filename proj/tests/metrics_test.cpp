#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ramp/mcsim.hpp"
#include "ramp/metrics.hpp"

using namespace ramp;

namespace {

std::shared_ptr<const MarketData> market(const Matrix& returns, std::size_t K = 1) {
  ReturnPanel p;
  for (std::size_t i = 0; i < returns.cols(); ++i) p.asset_names.push_back("a" + std::to_string(i));
  for (std::size_t t = 0; t < returns.rows(); ++t) p.years.push_back(1990 + static_cast<int>(t));
  p.returns = returns;
  Matrix probs(returns.rows(), K, 1.0 / static_cast<double>(K));
  std::vector<int> labels(returns.rows(), 0);
  return MarketData::make(p, probs, estimate_regime_stats(returns, labels, K));
}

}  // namespace

TEST(Sharpe, Examples) {
  EXPECT_THROW(sharpe(std::vector<double>{0.1, 0.1, 0.1}), NumericalError);
  EXPECT_NEAR(sharpe(std::vector<double>{0.0, 0.2}), 0.1 / std::sqrt(0.02), 1e-15);
  EXPECT_NEAR(sharpe(std::vector<double>{0.0, 0.2}), 0.7071, 1e-4);
  for (double x : {0.01, 0.3, 2.0}) EXPECT_EQ(sharpe(std::vector<double>{-x, x}), 0.0);
}

TEST(Sharpe, ScaleInvariant) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.05, 0.2);
  std::vector<double> r(30);
  for (auto& v : r) v = n(rng);
  const double base = sharpe(r);
  for (double c : {0.5, 3.0, 17.0}) {
    std::vector<double> s = r;
    for (auto& v : s) v *= c;
    EXPECT_NEAR(sharpe(s), base, 1e-12);
  }
}

TEST(Sortino, Examples) {
  EXPECT_EQ(sortino(std::vector<double>{0.1, -0.1}), 0.0);
  EXPECT_NEAR(sortino(std::vector<double>{0.2, -0.1}), 0.05 / std::sqrt(0.01 / 2.0), 1e-15);
  EXPECT_NEAR(sortino(std::vector<double>{0.2, -0.1}), 0.7071, 1e-4);
  EXPECT_THROW(sortino(std::vector<double>{0.1, 0.2}), NumericalError);
}

TEST(MaxDrawdown, Examples) {
  EXPECT_NEAR(max_drawdown(std::vector<double>{1, 1.2, 0.9, 1.1}), -0.25, 1e-15);
  EXPECT_EQ(max_drawdown(std::vector<double>{1, 1.1, 1.2, 1.3}), 0.0);
  EXPECT_NEAR(max_drawdown(std::vector<double>{1, 0.5, 0.75, 0.3}), -0.7, 1e-15);
  EXPECT_THROW(max_drawdown(std::vector<double>{1, 0.0}), ValidationError);
}

TEST(MaxDrawdown, ScaleInvariantAndBounded) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.03, 0.2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> w{1.0};
    for (int t = 0; t < 40; ++t) w.push_back(w.back() * std::max(1.0 + n(rng), 0.05));
    const double dd = max_drawdown(w);
    EXPECT_LE(dd, 0.0);
    EXPECT_GE(dd, -1.0);
    std::vector<double> scaled = w;
    for (auto& v : scaled) v *= 7.3;
    EXPECT_NEAR(max_drawdown(scaled), dd, 1e-14);
    bool dips = false;
    double peak = w[0];
    for (double v : w) {
      dips = dips || v < peak;
      peak = std::max(peak, v);
    }
    EXPECT_EQ(dd == 0.0, !dips);
  }
}

TEST(RollingCagr, Examples) {
  std::vector<double> w(11, 1.0);
  w[10] = 2.0;
  std::vector<int> years;
  for (int y = 2000; y < 2010; ++y) years.push_back(y);
  const auto c = rolling_cagr(w, years, 10);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_NEAR(c[0].cagr, std::pow(2.0, 0.1) - 1.0, 1e-15);
  EXPECT_NEAR(c[0].cagr, 0.071773, 1e-6);
  EXPECT_EQ(c[0].year, 2000);

  for (const auto& p : rolling_cagr(std::vector<double>(11, 1.0), years, 3)) EXPECT_EQ(p.cagr, 0.0);
  EXPECT_THROW(rolling_cagr(w, years, 11), ValidationError);
}

TEST(RollingCagr, WindowOneReproducesReturns) {
  const std::vector<double> r{0.1, -0.05, 0.2, 0.0, -0.3};
  std::vector<double> w{1.0};
  for (double x : r) w.push_back(w.back() * (1.0 + x));
  const std::vector<int> years{1, 2, 3, 4, 5};
  const auto c = rolling_cagr(w, years, 1);
  ASSERT_EQ(c.size(), r.size());
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(c[i].cagr, r[i], 1e-15);
}

TEST(Backtest, EqualWeightMatchesCompoundStrategy) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.06, 0.15);
  Matrix r(50, 3);
  for (double& v : r.data()) v = std::max(n(rng), -0.6);
  EnvConfig cfg;
  cfg.no_shock = cfg.no_reset = true;
  Environment env(cfg, market(r));
  const auto w = equal_weights(3);
  const auto rep = backtest([&](const Observation&) { return w; }, env);
  const auto curve = compound_wealth_curve(r, w);
  ASSERT_EQ(rep.wealth_curve.size(), 51u);
  ASSERT_EQ(curve.size(), 51u);
  for (std::size_t t = 0; t < curve.size(); ++t) EXPECT_NEAR(rep.wealth_curve[t], curve[t], 1e-10 * curve[t]);
  EXPECT_EQ(rep.per_step_returns.size(), 50u);
  EXPECT_NEAR(rep.final_log_value, std::log(curve.back()), 1e-10);
  EXPECT_EQ(rep.rolling_cagr.size(), 41u);
}

TEST(Backtest, ZeroReturnPanelLeavesMetricsUndefined) {
  Environment env([] {
    EnvConfig c;
    c.no_reset = c.no_shock = true;
    return c;
  }(), market(Matrix(12, 2, 0.0)));
  const auto rep = backtest([](const Observation&) { return equal_weights(2); }, env);
  EXPECT_FALSE(rep.sharpe.has_value());
  EXPECT_FALSE(rep.sortino.has_value());
  EXPECT_EQ(rep.max_drawdown, 0.0);
  for (double v : rep.wealth_curve) EXPECT_EQ(v, 1.0);
}

TEST(Backtest, WealthConsistencyWithShocksAndResets) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.06, 0.15);
  Matrix r(70, 2);
  for (double& v : r.data()) v = std::max(n(rng), -0.6);
  Environment env({}, market(r));
  const auto rep = backtest([](const Observation&) { return PortfolioWeights{0.7, 0.3}; }, env);
  // replay: product of (1 + r_t), times shock factors, restarted after each reset
  double log_w = 0.0;
  for (std::size_t t = 0; t < rep.trace.size(); ++t) {
    const auto& b = rep.trace[t].breakdown;
    log_w += std::log1p(b.gross_return);
    if (b.shock_applied) log_w += std::log1p(-0.05);
    if (b.reset_applied) log_w = 0.0;
  }
  EXPECT_NEAR(rep.wealth_curve.back(), std::exp(log_w), 1e-10 * rep.wealth_curve.back());
  EXPECT_EQ(rep.shocks, 2u);
  EXPECT_EQ(rep.resets, 2u);
}

TEST(Export, CrisisOverlaySpans) {
  const auto spans = crisis_spans({2008, 1973, 1974, 2001, 2000, 2002});
  ASSERT_EQ(spans.size(), 3u);
  EXPECT_EQ(spans[0], std::make_pair(1973, 1974));
  EXPECT_EQ(spans[1], std::make_pair(2000, 2002));
  EXPECT_EQ(spans[2], std::make_pair(2008, 2008));
  std::ostringstream os;
  write_crisis_overlay_csv(os, {2008, 2009});
  EXPECT_EQ(os.str(), "start_year,end_year\n2008,2009\n");
}
