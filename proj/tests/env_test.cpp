#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ramp/env.hpp"
#include "ramp/mcsim.hpp"

using namespace ramp;

namespace {

struct Fixture {
  ReturnPanel panel;
  RegimePosterior post;
  RegimeStats stats;
};

// T years of two assets, K=2 posterior alternating between regimes.
Fixture make_fixture(std::size_t T, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.05, 0.1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Fixture f;
  f.panel.asset_names = {"A", "B"};
  f.panel.returns = Matrix(T, 2);
  f.post.probs = Matrix(T, 2);
  for (std::size_t t = 0; t < T; ++t) {
    f.panel.years.push_back(1950 + static_cast<int>(t));
    f.panel.returns(t, 0) = std::max(n(rng), -0.5);
    f.panel.returns(t, 1) = std::max(n(rng) * 0.3, -0.5);
    const double p = u(rng);
    f.post.probs(t, 0) = p;
    f.post.probs(t, 1) = 1.0 - p;
    f.post.labels.push_back(p >= 0.5 ? 0 : 1);
  }
  f.stats = estimate_regime_stats(f.panel.returns, f.post.labels, 2);
  return f;
}

Environment make_env(const Fixture& f, EnvConfig cfg = {}) { return Environment(cfg, f.panel, f.post, f.stats); }

std::vector<RewardBreakdown> run_episode(Environment& env, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<RewardBreakdown> out;
  env.reset();
  while (!env.done()) {
    const double a = u(rng);
    out.push_back(env.step({a, 1.0 - a}).breakdown);
  }
  return out;
}

}  // namespace

TEST(EnvConstruction, ResetObservationIsFirstRow) {
  const auto f = make_fixture(10);
  auto env = make_env(f);
  const auto obs = env.reset();
  EXPECT_EQ(obs.returns, f.panel.returns.row_vector(0));
  EXPECT_EQ(obs.regime_probs, f.post.probs.row_vector(0));
  EXPECT_EQ(env.capital(), 1.0);
  EXPECT_EQ(env.previous_weights(), (PortfolioWeights{0.5, 0.5}));
}

TEST(EnvConstruction, RejectsMisalignedInputs) {
  auto f = make_fixture(10);
  auto shorter = f.post;
  shorter.probs = Matrix(9, 2, 0.5);
  EXPECT_THROW(Environment({}, f.panel, shorter, f.stats), ValidationError);
  RegimeStats three{Matrix(3, 2), Matrix(3, 2, 0.01)};
  EXPECT_THROW(Environment({}, f.panel, f.post, three), ValidationError);
  EnvConfig bad;
  bad.clip_lo = 0.1;
  bad.clip_hi = 0.0;
  EXPECT_THROW(Environment(bad, f.panel, f.post, f.stats), ValidationError);
}

TEST(TransactionCost, Examples) {
  EXPECT_EQ(transaction_cost(std::vector<double>{0.3, 0.7}, std::vector<double>{0.3, 0.7}, 0.002), 0.0);
  EXPECT_NEAR(transaction_cost(std::vector<double>{1, 0}, std::vector<double>{0, 1}, 0.002), 0.004, 1e-18);
  EXPECT_NEAR(transaction_cost(std::vector<double>{0.6, 0.4}, std::vector<double>{0.5, 0.5}, 0.002), 0.0004, 1e-18);
}

TEST(SharpeStepReward, Examples) {
  EXPECT_EQ(sharpe_step_reward(0.0, 0.0, {}, 1e-8), 0.0);
  // buffer {0.01, 0.02, 0.03} has sample std exactly 0.01
  const std::vector<double> buf{0.01, 0.03, 0.02};
  EXPECT_NEAR(sharpe_step_reward(0.02, 0.0, buf, 1e-8), 0.02 / (0.01 + 1e-8), 1e-12);
  const std::vector<double> flat{0.01, 0.01, 0.01};
  EXPECT_NEAR(sharpe_step_reward(0.01, 0.0, flat, 1e-8), 1e6, 1e-6);
  EXPECT_EQ(sharpe_step_reward(0.04, 0.01, std::vector<double>{0.04}, 1e-8), 0.04 - 0.01);
}

TEST(RegimeAwareReward, HandComputedTwoAssetCase) {
  RegimeStats s{Matrix{{0.04, 0.02}, {0.0, 0.0}}, Matrix{{0.01, 0.01}, {0.05, 0.05}}};
  const std::vector<double> w{0.5, 0.5}, rho{1.0, 0.0}, gamma{1.0, 3.0};
  const auto r = regime_aware_reward(w, w, rho, s, gamma, 0.002, 1e-8);
  EXPECT_NEAR(r.reward, 0.03 / (std::sqrt(0.005) + 1e-8), 1e-12);
  EXPECT_NEAR(r.reward, 0.4243, 1e-4);
}

TEST(RegimeAwareReward, GammaHomogeneity) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    RegimeStats s{Matrix(3, 4), Matrix(3, 4)};
    for (double& v : s.mu.data()) v = u(rng) - 0.5;
    for (double& v : s.var.data()) v = u(rng) * 0.05;
    std::vector<double> w(4), wp(4), rho(3), gamma(3);
    double sw = 0, swp = 0, sr = 0;
    for (auto& v : w) sw += (v = u(rng));
    for (auto& v : wp) swp += (v = u(rng));
    for (auto& v : rho) sr += (v = u(rng));
    for (auto& v : w) v /= sw;
    for (auto& v : wp) v /= swp;
    for (auto& v : rho) v /= sr;
    for (auto& v : gamma) v = 1.0 + 2.0 * u(rng);
    const auto base = regime_aware_reward(w, wp, rho, s, gamma, 0.002, 1e-300);
    std::vector<double> doubled = gamma;
    for (auto& g : doubled) g *= 2.0;
    const auto scaled = regime_aware_reward(w, wp, rho, s, doubled, 0.002, 1e-300);
    EXPECT_NEAR(scaled.reward, base.reward / std::sqrt(2.0), 1e-12 * std::abs(base.reward) + 1e-15);
  }
}

TEST(EnvStep, ScheduleOnSixtyStepEpisode) {
  const auto f = make_fixture(60);
  auto env = make_env(f);
  std::mt19937_64 rng(1);
  const auto trace = run_episode(env, rng);
  ASSERT_EQ(trace.size(), 60u);
  for (const auto& b : trace) {
    EXPECT_EQ(b.shock_applied, b.step == 25 || b.step == 50) << b.step;
    EXPECT_EQ(b.reset_applied, b.step == 30 || b.step == 60) << b.step;
    EXPECT_GE(b.clipped_reward, -0.03);
    EXPECT_LE(b.clipped_reward, 0.03);
    if (b.reset_applied) {
      EXPECT_EQ(b.capital, 1.0);
    }
  }
}

TEST(EnvStep, ShockPrecedesResetAtCoincidentStep) {
  const auto f = make_fixture(150);
  auto env = make_env(f);
  std::mt19937_64 rng(2);
  const auto trace = run_episode(env, rng);
  const auto& b = trace[149];
  EXPECT_EQ(b.step, 150u);
  EXPECT_TRUE(b.shock_applied);
  EXPECT_TRUE(b.reset_applied);
  EXPECT_EQ(b.capital, 1.0);
}

TEST(EnvStep, ShockScalesCapitalBeforeReturn) {
  auto f = make_fixture(25);
  for (std::size_t t = 0; t < 25; ++t) f.panel.returns(t, 0) = f.panel.returns(t, 1) = 0.0;
  f.panel.returns(24, 0) = f.panel.returns(24, 1) = 0.1;
  f.stats = estimate_regime_stats(f.panel.returns, f.post.labels, 2);
  auto env = make_env(f);
  StepResult last;
  while (!env.done()) last = env.step({0.5, 0.5});
  EXPECT_NEAR(last.breakdown.capital, 0.95 * 1.1, 1e-15);
}

TEST(EnvStep, ClipForcesLargeRewardToBound) {
  auto f = make_fixture(3);
  EnvConfig cfg;
  cfg.reward_mode = RewardMode::sharpe_step;
  for (std::size_t t = 0; t < 3; ++t) f.panel.returns(t, 0) = f.panel.returns(t, 1) = 0.05;
  auto env = make_env(f, cfg);
  const auto first = env.step({0.5, 0.5});
  EXPECT_EQ(first.reward, 0.03);  // raw 0.05 before any volatility estimate
  EXPECT_NEAR(first.breakdown.sharpe_reward, 0.05, 1e-15);
  const auto second = env.step({0.5, 0.5});
  EXPECT_EQ(second.reward, 0.03);  // constant buffer, raw 0.05 / eps
}

TEST(EnvStep, AblationFlagsDisableEachMechanism) {
  const auto f = make_fixture(60, 5);
  auto trace = [&](EnvConfig cfg) {
    auto env = make_env(f, cfg);
    std::mt19937_64 rng(9);
    return run_episode(env, rng);
  };
  const auto base = trace({});
  EnvConfig c;
  c.no_shock = true;
  for (const auto& b : trace(c)) EXPECT_FALSE(b.shock_applied);
  c = {};
  c.no_reset = true;
  for (const auto& b : trace(c)) EXPECT_FALSE(b.reset_applied);
  c = {};
  c.no_cost = true;
  for (const auto& b : trace(c)) EXPECT_EQ(b.cost, 0.0);
  c = {};
  c.no_clip = true;
  const auto unclipped = trace(c);
  bool exceeded = false;
  for (const auto& b : unclipped) exceeded = exceeded || std::abs(b.clipped_reward) > 0.03;
  EXPECT_TRUE(exceeded);
  for (std::size_t i = 0; i < base.size(); ++i) {
    EXPECT_GT(base[i].cost, 0.0);
    EXPECT_EQ(unclipped[i].capital, base[i].capital);
  }
  EXPECT_EQ(trace(c).size(), 60u);
}

TEST(EnvStep, AllAblationsSharpeModeEmitsGrossUntilBufferFills) {
  const auto f = make_fixture(5);
  EnvConfig cfg;
  cfg.no_clip = cfg.no_cost = cfg.no_reset = cfg.no_shock = true;
  cfg.reward_mode = RewardMode::sharpe_step;
  auto env = make_env(f, cfg);
  const auto r = env.step({0.3, 0.7});
  EXPECT_EQ(r.reward, r.breakdown.gross_return);
}

TEST(EnvStep, CapitalMatchesCompoundStrategyWithoutShocksOrResets) {
  const auto f = make_fixture(80, 4);
  EnvConfig cfg;
  cfg.no_shock = cfg.no_reset = true;
  auto env = make_env(f, cfg);
  const PortfolioWeights w{0.35, 0.65};
  while (!env.done()) env.step(w);
  const double terminal = compound_strategy(f.panel.returns, w).terminal;
  EXPECT_NEAR(env.capital(), 1.0 + terminal, 1e-12 * (1.0 + terminal));
}

TEST(EnvStep, RewardsClippedOnRandomEpisodes) {
  std::mt19937_64 rng(17);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto f = make_fixture(40, seed);
    EnvConfig cfg;
    cfg.reward_mode = seed % 2 ? RewardMode::sharpe_step : RewardMode::regime_aware;
    auto env = make_env(f, cfg);
    for (const auto& b : run_episode(env, rng)) {
      EXPECT_GE(b.clipped_reward, cfg.clip_lo);
      EXPECT_LE(b.clipped_reward, cfg.clip_hi);
      EXPECT_GE(b.cost, 0.0);
      EXPECT_GT(b.capital, 0.0);
    }
  }
}

TEST(EnvStep, DeterministicGivenActions) {
  const auto f = make_fixture(40, 8);
  auto a = make_env(f), b = make_env(f);
  std::mt19937_64 r1(3), r2(3);
  const auto ta = run_episode(a, r1), tb = run_episode(b, r2);
  for (std::size_t i = 0; i < ta.size(); ++i) {
    EXPECT_EQ(ta[i].clipped_reward, tb[i].clipped_reward);
    EXPECT_EQ(ta[i].capital, tb[i].capital);
  }
}

TEST(EnvStep, ActionValidation) {
  const auto f = make_fixture(5);
  auto env = make_env(f);
  EXPECT_THROW(env.step({0.6, 0.6}), ValidationError);
  EXPECT_THROW(env.step({1.1, -0.1}), ValidationError);
  EXPECT_THROW(env.step({1.0}), ValidationError);
  const auto r = env.step({0.5 + 4e-7, 0.5});  // drift within tolerance is renormalized
  EXPECT_NEAR(env.previous_weights()[0] + env.previous_weights()[1], 1.0, 1e-15);
  EXPECT_FALSE(r.done);
}

TEST(EnvStep, BernoulliShocksAreSeededAndRoughlyAtRate) {
  const auto f = make_fixture(2000, 2);
  EnvConfig cfg;
  cfg.shock_mode = ShockMode::bernoulli;
  cfg.no_reset = true;
  cfg.shock_seed = 11;
  auto count = [&] {
    auto env = make_env(f, cfg);
    std::size_t n = 0;
    while (!env.done()) n += env.step({0.5, 0.5}).breakdown.shock_applied;
    return n;
  };
  const auto n = count();
  EXPECT_EQ(count(), n);
  EXPECT_NEAR(static_cast<double>(n), 2000.0 / 25.0, 30.0);
}

TEST(RegimeStats, SampleMomentsAndFallback) {
  const Matrix r{{0.1}, {0.3}, {-0.2}, {0.0}};
  const auto s = estimate_regime_stats(r, {0, 0, 1, 0}, 3);
  EXPECT_NEAR(s.mu(0, 0), 0.4 / 3.0, 1e-15);
  const double m = 0.4 / 3.0;
  EXPECT_NEAR(s.var(0, 0), ((0.1 - m) * (0.1 - m) + (0.3 - m) * (0.3 - m) + m * m) / 2.0, 1e-15);
  EXPECT_EQ(s.mu(1, 0), -0.2);
  EXPECT_NEAR(s.mu(2, 0), 0.05, 1e-15);  // empty regime falls back to the full sample
  EXPECT_EQ(s.var(1, 0), s.var(2, 0));
}

TEST(RegimeStats, DefaultGammaRanksByVariance) {
  RegimeStats s{Matrix(3, 1), Matrix{{0.09}, {0.01}, {0.04}}};
  EXPECT_EQ(default_gamma(s), (std::vector<double>{3.0, 1.0, 2.0}));
}

TEST(Trace, CsvHeaderAndRows) {
  const auto f = make_fixture(2);
  auto env = make_env(f);
  std::vector<TraceRow> rows;
  while (!env.done()) {
    const auto r = env.step({1.0, 0.0});
    rows.push_back({r.breakdown.step, env.previous_weights(), r.breakdown});
  }
  std::ostringstream os;
  write_trace(os, {"A", "B"}, rows);
  const auto text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "t,w_A,w_B,gross,cost,reward,capital,shock_applied,reset_applied");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}
