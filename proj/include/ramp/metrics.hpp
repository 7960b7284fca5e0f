#pragma once

// Performance metrics on per-period returns and wealth curves, and a
// deterministic backtest driver. No annualization: periods are years.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "ramp/csv.hpp"
#include "ramp/env.hpp"
#include "ramp/error.hpp"

namespace ramp {

namespace detail {

inline double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_std(std::span<const double> v) {
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace detail

inline double sharpe(std::span<const double> returns) {
  detail::require(returns.size() >= 2, "sharpe needs at least two returns");
  const auto [lo, hi] = std::minmax_element(returns.begin(), returns.end());
  // a constant series can leave a rounding-sized std; treat it as zero
  if (*lo == *hi) throw NumericalError("sharpe undefined: zero variance");
  const double sd = detail::sample_std(returns);
  if (!(sd > 0.0)) throw NumericalError("sharpe undefined: zero variance");
  return detail::mean(returns) / sd;
}

// Downside deviation averages min(r - target, 0)^2 over all periods.
inline double sortino(std::span<const double> returns, double target = 0.0) {
  detail::require(returns.size() >= 2, "sortino needs at least two returns");
  double ss = 0.0;
  bool any_below = false;
  for (double r : returns) {
    const double d = std::min(r - target, 0.0);
    any_below = any_below || r < target;
    ss += d * d;
  }
  if (!any_below) throw NumericalError("sortino undefined: no returns below target");
  return (detail::mean(returns) - target) / std::sqrt(ss / static_cast<double>(returns.size()));
}

inline double max_drawdown(std::span<const double> wealth) {
  detail::require(!wealth.empty(), "max_drawdown needs a non-empty wealth curve");
  double peak = wealth.front(), worst = 0.0;
  for (double w : wealth) {
    if (!(w > 0.0)) throw ValidationError("max_drawdown: wealth must be positive");
    peak = std::max(peak, w);
    worst = std::min(worst, w / peak - 1.0);
  }
  return worst;
}

struct CagrPoint {
  int year = 0;
  double cagr = 0.0;
};

// wealth has one more entry than years; point s covers years[s]..years[s+window-1].
inline std::vector<CagrPoint> rolling_cagr(std::span<const double> wealth, std::span<const int> years,
                                           std::size_t window) {
  detail::require(window >= 1, "rolling CAGR window must be >= 1");
  if (window >= wealth.size())
    throw ValidationError("rolling CAGR window " + std::to_string(window) + " too long for " +
                          std::to_string(wealth.size()) + " wealth points");
  detail::require(years.size() + 1 >= wealth.size(), "rolling CAGR needs a year per period");
  std::vector<CagrPoint> out;
  for (std::size_t s = 0; s + window < wealth.size(); ++s) {
    detail::require(wealth[s] > 0.0 && wealth[s + window] > 0.0, "rolling CAGR: wealth must be positive");
    const double ratio = wealth[s + window] / wealth[s];
    const double cagr = window == 1 ? ratio - 1.0 : std::pow(ratio, 1.0 / static_cast<double>(window)) - 1.0;
    out.push_back({years[s], cagr});
  }
  return out;
}

struct BacktestReport {
  std::vector<int> years;
  std::vector<double> wealth_curve;      // T+1 entries, starts at initial capital
  std::vector<double> per_step_returns;  // portfolio gross returns
  std::optional<double> sharpe;          // nullopt when undefined
  std::optional<double> sortino;
  double max_drawdown = 0.0;
  double final_log_value = 0.0;
  std::vector<CagrPoint> rolling_cagr;
  std::vector<double> reward_trace;
  std::vector<TraceRow> trace;
  std::size_t shocks = 0;
  std::size_t resets = 0;
};

using Allocator = std::function<PortfolioWeights(const Observation&)>;

inline constexpr std::size_t kDefaultCagrWindow = 10;

// Deterministic rollout of `allocate` over the whole environment.
inline BacktestReport backtest(const Allocator& allocate, Environment& env,
                               std::size_t cagr_window = kDefaultCagrWindow) {
  BacktestReport rep;
  auto obs = env.reset();
  rep.years = env.data().years;
  rep.wealth_curve.push_back(env.capital());
  while (!env.done()) {
    const auto w = allocate(obs);
    auto res = env.step(w);
    rep.per_step_returns.push_back(res.breakdown.gross_return);
    rep.wealth_curve.push_back(res.breakdown.capital);
    rep.reward_trace.push_back(res.reward);
    rep.shocks += res.breakdown.shock_applied ? 1 : 0;
    rep.resets += res.breakdown.reset_applied ? 1 : 0;
    rep.trace.push_back({res.breakdown.step, env.previous_weights(), res.breakdown});
    obs = std::move(res.obs);
  }
  if (rep.per_step_returns.size() >= 2) {
    try {
      rep.sharpe = sharpe(rep.per_step_returns);
    } catch (const NumericalError&) {
    }
    try {
      rep.sortino = sortino(rep.per_step_returns);
    } catch (const NumericalError&) {
    }
  }
  rep.max_drawdown = max_drawdown(rep.wealth_curve);
  rep.final_log_value = std::log(rep.wealth_curve.back() / rep.wealth_curve.front());
  const std::size_t window = std::min(cagr_window, rep.wealth_curve.size() - 1);
  if (window >= 1) rep.rolling_cagr = rolling_cagr(rep.wealth_curve, rep.years, window);
  return rep;
}

inline void write_wealth_csv(std::ostream& os, const BacktestReport& rep) {
  os << "step,year,wealth\n";
  for (std::size_t i = 0; i < rep.wealth_curve.size(); ++i) {
    const std::string year = i == 0 ? "" : std::to_string(rep.years[i - 1]);
    os << i << ',' << year << ',' << csv::format(rep.wealth_curve[i]) << '\n';
  }
}

inline void write_rolling_cagr_csv(std::ostream& os, const std::vector<CagrPoint>& points) {
  os << "start_year,cagr\n";
  for (const auto& p : points) os << p.year << ',' << csv::format(p.cagr) << '\n';
}

// Consecutive crisis years merged into [start, end] spans for plot overlays.
inline std::vector<std::pair<int, int>> crisis_spans(std::vector<int> years) {
  std::sort(years.begin(), years.end());
  years.erase(std::unique(years.begin(), years.end()), years.end());
  std::vector<std::pair<int, int>> spans;
  for (int y : years) {
    if (!spans.empty() && spans.back().second + 1 == y)
      spans.back().second = y;
    else
      spans.emplace_back(y, y);
  }
  return spans;
}

inline void write_crisis_overlay_csv(std::ostream& os, const std::vector<int>& crisis_years) {
  os << "start_year,end_year\n";
  for (const auto& [a, b] : crisis_spans(crisis_years)) os << a << ',' << b << '\n';
}

}  // namespace ramp
