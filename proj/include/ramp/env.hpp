#pragma once

// Regime-aware portfolio environment. Replays a historical (or simulated)
// return panel with aligned regime posteriors; the agent picks simplex
// weights each step and receives a shaped, clipped reward.

#include <algorithm>
#include <cmath>
#include <deque>
#include <memory>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "ramp/csv.hpp"
#include "ramp/dataio.hpp"
#include "ramp/error.hpp"
#include "ramp/matrix.hpp"
#include "ramp/regimes.hpp"
#include "ramp/rng.hpp"

namespace ramp {

using PortfolioWeights = std::vector<double>;

inline PortfolioWeights equal_weights(std::size_t n) { return PortfolioWeights(n, 1.0 / static_cast<double>(n)); }

// Per-regime mean vector and diagonal covariance of asset returns.
struct RegimeStats {
  Matrix mu;   // K x N
  Matrix var;  // K x N

  std::size_t regimes() const noexcept { return mu.rows(); }
  std::size_t assets() const noexcept { return mu.cols(); }
};

// Groups returns by hard regime label. Regimes with fewer than two
// observations fall back to the full-sample mean or variance.
inline RegimeStats estimate_regime_stats(const Matrix& returns, const std::vector<int>& labels, std::size_t K) {
  detail::require(returns.rows() == labels.size(), "regime stats: returns and labels differ in length");
  detail::require(returns.rows() >= 2, "regime stats need at least two observations");
  const std::size_t T = returns.rows(), N = returns.cols();
  std::vector<double> all_mean(N, 0.0), all_var(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t t = 0; t < T; ++t) all_mean[i] += returns(t, i);
    all_mean[i] /= static_cast<double>(T);
    for (std::size_t t = 0; t < T; ++t) all_var[i] += (returns(t, i) - all_mean[i]) * (returns(t, i) - all_mean[i]);
    all_var[i] /= static_cast<double>(T - 1);
  }
  RegimeStats s{Matrix(K, N), Matrix(K, N)};
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<std::size_t> rows;
    for (std::size_t t = 0; t < T; ++t)
      if (labels[t] == static_cast<int>(k)) rows.push_back(t);
    for (std::size_t i = 0; i < N; ++i) {
      if (rows.empty()) {
        s.mu(k, i) = all_mean[i];
        s.var(k, i) = all_var[i];
        continue;
      }
      double m = 0.0;
      for (auto t : rows) m += returns(t, i);
      m /= static_cast<double>(rows.size());
      s.mu(k, i) = m;
      if (rows.size() < 2) {
        s.var(k, i) = all_var[i];
        continue;
      }
      double v = 0.0;
      for (auto t : rows) v += (returns(t, i) - m) * (returns(t, i) - m);
      s.var(k, i) = v / static_cast<double>(rows.size() - 1);
    }
  }
  return s;
}

// Risk aversions spaced linearly over [lo, hi]; the regime with the lowest
// average asset variance gets lo.
inline std::vector<double> default_gamma(const RegimeStats& stats, double lo = 1.0, double hi = 3.0) {
  const std::size_t K = stats.regimes();
  std::vector<double> avg(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    for (double v : stats.var.row(k)) avg[k] += v;
    avg[k] /= static_cast<double>(stats.assets());
  }
  std::vector<std::size_t> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return avg[a] < avg[b]; });
  std::vector<double> gamma(K, lo);
  for (std::size_t r = 0; r < K; ++r)
    gamma[order[r]] = K == 1 ? lo : lo + (hi - lo) * static_cast<double>(r) / static_cast<double>(K - 1);
  return gamma;
}

enum class RewardMode { sharpe_step, regime_aware };
enum class ShockMode { fixed, bernoulli };

inline std::string to_string(RewardMode m) { return m == RewardMode::sharpe_step ? "sharpe_step" : "regime_aware"; }
inline std::string to_string(ShockMode m) { return m == ShockMode::fixed ? "fixed" : "bernoulli"; }

inline RewardMode parse_reward_mode(std::string_view s) {
  if (s == "sharpe_step") return RewardMode::sharpe_step;
  if (s == "regime_aware") return RewardMode::regime_aware;
  throw ValidationError("unknown reward_mode '" + std::string(s) + "'");
}

inline ShockMode parse_shock_mode(std::string_view s) {
  if (s == "fixed") return ShockMode::fixed;
  if (s == "bernoulli") return ShockMode::bernoulli;
  throw ValidationError("unknown shock_mode '" + std::string(s) + "'");
}

struct EnvConfig {
  double lambda_cost = 0.002;
  double clip_lo = -0.03;
  double clip_hi = 0.03;
  std::size_t reset_interval = 30;
  std::size_t shock_interval = 25;
  double shock_size = -0.05;
  double epsilon = 1e-8;
  std::size_t var_window = 10;
  // Empty means derive from regime variances via default_gamma().
  std::vector<double> gamma_k;
  bool no_clip = false;
  bool no_cost = false;
  bool no_reset = false;
  bool no_shock = false;
  RewardMode reward_mode = RewardMode::regime_aware;
  double initial_capital = 1.0;
  // Bernoulli mode fires with probability 1/shock_interval at each step.
  ShockMode shock_mode = ShockMode::fixed;
  std::uint64_t shock_seed = 0;

  void validate() const {
    detail::require(clip_lo < clip_hi, "clip_lo must be < clip_hi");
    detail::require(reset_interval >= 1 && shock_interval >= 1, "intervals must be >= 1");
    detail::require(epsilon > 0.0, "epsilon must be > 0");
    detail::require(lambda_cost >= 0.0, "lambda_cost must be >= 0");
    detail::require(var_window >= 1, "var_window must be >= 1");
    detail::require(initial_capital > 0.0, "initial_capital must be > 0");
    detail::require(shock_size > -1.0, "shock_size must be > -1");
    for (double g : gamma_k) detail::require(g > 0.0, "gamma_k entries must be > 0");
  }

  bool operator==(const EnvConfig&) const = default;
};

struct Observation {
  std::vector<double> returns;       // r_t
  std::vector<double> regime_probs;  // rho_t
};

struct RewardBreakdown {
  std::size_t step = 0;  // 1-based step number; the data row is step - 1
  double gross_return = 0.0;
  double cost = 0.0;
  double sharpe_reward = 0.0;
  double regime_mu = 0.0;
  double regime_var = 0.0;
  double regime_reward = 0.0;
  double clipped_reward = 0.0;
  double capital = 0.0;  // after the step
  bool shock_applied = false;
  bool reset_applied = false;
};

inline double transaction_cost(std::span<const double> w, std::span<const double> w_prev, double lambda) {
  detail::require(w.size() == w_prev.size(), "transaction_cost: dimension mismatch");
  double l1 = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) l1 += std::abs(w[i] - w_prev[i]);
  return lambda * l1;
}

// `trailing` holds recent portfolio returns including the current one.
// With fewer than two entries there is no volatility estimate and the
// cost-adjusted return is emitted unscaled.
inline double sharpe_step_reward(double gross, double cost, std::span<const double> trailing, double epsilon) {
  const double numerator = gross - cost;
  if (trailing.size() < 2) return numerator;
  double mean = 0.0;
  for (double r : trailing) mean += r;
  mean /= static_cast<double>(trailing.size());
  double ss = 0.0;
  for (double r : trailing) ss += (r - mean) * (r - mean);
  const double sd = std::sqrt(ss / static_cast<double>(trailing.size() - 1));
  return numerator / (sd + epsilon);
}

struct RegimeReward {
  double reward = 0.0;
  double mu = 0.0;        // sum_k rho_k w'mu_k
  double var = 0.0;       // sum_k rho_k Var_k(w'r)
  double weighted_var = 0.0;  // sum_k rho_k gamma_k Var_k(w'r)
  double cost = 0.0;
};

inline RegimeReward regime_aware_reward(std::span<const double> w, std::span<const double> w_prev,
                                        std::span<const double> rho, const RegimeStats& stats,
                                        std::span<const double> gamma, double lambda, double epsilon) {
  const std::size_t K = stats.regimes(), N = stats.assets();
  detail::require(rho.size() == K && gamma.size() == K, "regime_aware_reward: regime count mismatch");
  detail::require(w.size() == N, "regime_aware_reward: asset count mismatch");
  RegimeReward out;
  for (std::size_t k = 0; k < K; ++k) {
    const double mean_k = dot(w, stats.mu.row(k));
    double var_k = 0.0;
    for (std::size_t i = 0; i < N; ++i) var_k += w[i] * w[i] * stats.var(k, i);
    out.mu += rho[k] * mean_k;
    out.var += rho[k] * var_k;
    out.weighted_var += rho[k] * gamma[k] * var_k;
  }
  out.cost = transaction_cost(w, w_prev, lambda);
  out.reward = (out.mu - out.cost) / (std::sqrt(out.weighted_var) + epsilon);
  return out;
}

inline RegimeReward regime_aware_reward(std::span<const double> w, std::span<const double> w_prev,
                                        std::span<const double> rho, const RegimeStats& stats,
                                        const EnvConfig& cfg) {
  const auto gamma = cfg.gamma_k.empty() ? default_gamma(stats) : cfg.gamma_k;
  return regime_aware_reward(w, w_prev, rho, stats, gamma, cfg.no_cost ? 0.0 : cfg.lambda_cost, cfg.epsilon);
}

// Market data shared read-only by any number of environments.
struct MarketData {
  std::vector<int> years;
  std::vector<std::string> asset_names;
  Matrix returns;  // T x N
  Matrix probs;    // T x K
  RegimeStats stats;

  static std::shared_ptr<const MarketData> make(const ReturnPanel& panel, const Matrix& probs, RegimeStats stats) {
    if (panel.periods() != probs.rows())
      throw ValidationError("return panel has " + std::to_string(panel.periods()) + " rows but posterior has " +
                            std::to_string(probs.rows()));
    if (stats.regimes() != probs.cols())
      throw ValidationError("regime stats cover " + std::to_string(stats.regimes()) +
                            " regimes but posterior has " + std::to_string(probs.cols()));
    if (stats.assets() != panel.assets()) throw ValidationError("regime stats asset count mismatch");
    detail::require(panel.periods() >= 1, "empty market data");
    for (std::size_t t = 0; t < probs.rows(); ++t) {
      double s = 0.0;
      for (double p : probs.row(t)) s += p;
      detail::require(std::abs(s - 1.0) <= 1e-8, "posterior row does not sum to 1");
    }
    auto m = std::make_shared<MarketData>();
    m->years = panel.years;
    m->asset_names = panel.asset_names;
    m->returns = panel.returns;
    m->probs = probs;
    m->stats = std::move(stats);
    return m;
  }

  std::size_t periods() const noexcept { return returns.rows(); }
  std::size_t assets() const noexcept { return returns.cols(); }
  std::size_t regimes() const noexcept { return probs.cols(); }
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  bool done = false;
  RewardBreakdown breakdown;
};

class Environment {
 public:
  Environment(EnvConfig cfg, std::shared_ptr<const MarketData> data) : cfg_(std::move(cfg)), data_(std::move(data)) {
    cfg_.validate();
    detail::require(data_ != nullptr, "environment needs market data");
    if (!cfg_.gamma_k.empty() && cfg_.gamma_k.size() != data_->regimes())
      throw ValidationError("gamma_k has " + std::to_string(cfg_.gamma_k.size()) + " entries for " +
                            std::to_string(data_->regimes()) + " regimes");
    gamma_ = cfg_.gamma_k.empty() ? default_gamma(data_->stats) : cfg_.gamma_k;
    reset();
  }

  Environment(EnvConfig cfg, const ReturnPanel& panel, const RegimePosterior& post, RegimeStats stats)
      : Environment(std::move(cfg), MarketData::make(panel, post.probs, std::move(stats))) {}

  Observation reset() {
    cursor_ = 0;
    capital_ = cfg_.initial_capital;
    prev_weights_ = equal_weights(data_->assets());
    trailing_.clear();
    shock_rng_ = make_stream(cfg_.shock_seed, "env_shock");
    return observation();
  }

  Observation observation() const {
    const std::size_t row = std::min(cursor_, data_->periods() - 1);
    return {data_->returns.row_vector(row), data_->probs.row_vector(row)};
  }

  StepResult step(const PortfolioWeights& action) {
    if (done()) throw ValidationError("step called on a finished episode");
    const PortfolioWeights w = checked_action(action);
    const std::size_t t = cursor_ + 1;
    const auto r = data_->returns.row(cursor_);
    const auto rho = data_->probs.row(cursor_);

    RewardBreakdown b;
    b.step = t;
    b.gross_return = dot(w, r);

    if (!cfg_.no_shock && shock_due(t)) {
      capital_ *= 1.0 + cfg_.shock_size;
      b.shock_applied = true;
    }
    capital_ = std::max(capital_ * (1.0 + b.gross_return), kCapitalFloor);

    const double cost = cfg_.no_cost ? 0.0 : transaction_cost(w, prev_weights_, cfg_.lambda_cost);
    b.cost = cost;
    trailing_.push_back(b.gross_return);
    while (trailing_.size() > cfg_.var_window) trailing_.pop_front();
    const std::vector<double> buf(trailing_.begin(), trailing_.end());
    b.sharpe_reward = sharpe_step_reward(b.gross_return, cost, buf, cfg_.epsilon);

    const auto rr = regime_aware_reward(w, prev_weights_, rho, data_->stats, gamma_, cfg_.no_cost ? 0.0 : cfg_.lambda_cost,
                                        cfg_.epsilon);
    b.regime_mu = rr.mu;
    b.regime_var = rr.var;
    b.regime_reward = rr.reward;

    const double raw = cfg_.reward_mode == RewardMode::sharpe_step ? b.sharpe_reward : b.regime_reward;
    b.clipped_reward = cfg_.no_clip ? raw : std::clamp(raw, cfg_.clip_lo, cfg_.clip_hi);

    if (!cfg_.no_reset && t % cfg_.reset_interval == 0) {
      capital_ = cfg_.initial_capital;
      b.reset_applied = true;
    }
    b.capital = capital_;
    prev_weights_ = w;
    ++cursor_;
    return {observation(), b.clipped_reward, done(), b};
  }

  bool done() const noexcept { return cursor_ >= data_->periods(); }
  std::size_t steps_taken() const noexcept { return cursor_; }
  std::size_t length() const noexcept { return data_->periods(); }
  std::size_t assets() const noexcept { return data_->assets(); }
  std::size_t regimes() const noexcept { return data_->regimes(); }
  double capital() const noexcept { return capital_; }
  const PortfolioWeights& previous_weights() const noexcept { return prev_weights_; }
  const EnvConfig& config() const noexcept { return cfg_; }
  const std::vector<double>& gamma() const noexcept { return gamma_; }
  const MarketData& data() const noexcept { return *data_; }
  std::shared_ptr<const MarketData> shared_data() const noexcept { return data_; }

  static constexpr double kActionTolerance = 1e-6;
  static constexpr double kCapitalFloor = 1e-12;

 private:
  bool shock_due(std::size_t t) {
    if (cfg_.shock_mode == ShockMode::fixed) return t % cfg_.shock_interval == 0;
    return uniform01(shock_rng_) < 1.0 / static_cast<double>(cfg_.shock_interval);
  }

  PortfolioWeights checked_action(const PortfolioWeights& a) const {
    if (a.size() != data_->assets())
      throw ValidationError("action has " + std::to_string(a.size()) + " weights for " +
                            std::to_string(data_->assets()) + " assets");
    double s = 0.0;
    for (double v : a) {
      if (!std::isfinite(v) || v < -kActionTolerance) throw ValidationError("invalid action: negative or non-finite weight");
      s += v;
    }
    if (std::abs(s - 1.0) > kActionTolerance) throw ValidationError("invalid action: weights sum to " + csv::format(s));
    PortfolioWeights w(a.size());
    double clipped = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) clipped += (w[i] = std::max(a[i], 0.0));
    for (double& v : w) v /= clipped;
    return w;
  }

  EnvConfig cfg_;
  std::shared_ptr<const MarketData> data_;
  std::vector<double> gamma_;
  std::size_t cursor_ = 0;
  double capital_ = 1.0;
  PortfolioWeights prev_weights_;
  std::deque<double> trailing_;
  RngStream shock_rng_;
};

// One row per step for CSV export.
struct TraceRow {
  std::size_t t = 0;
  PortfolioWeights weights;
  RewardBreakdown breakdown;
};

inline void write_trace(std::ostream& os, const std::vector<std::string>& asset_names,
                        const std::vector<TraceRow>& rows) {
  std::vector<std::string> header{"t"};
  for (const auto& a : asset_names) header.push_back("w_" + a);
  for (const char* c : {"gross", "cost", "reward", "capital", "shock_applied", "reset_applied"}) header.emplace_back(c);
  csv::write_row(os, header);
  for (const auto& r : rows) {
    std::vector<std::string> row{std::to_string(r.t)};
    for (double w : r.weights) row.push_back(csv::format(w));
    const auto& b = r.breakdown;
    row.push_back(csv::format(b.gross_return));
    row.push_back(csv::format(b.cost));
    row.push_back(csv::format(b.clipped_reward));
    row.push_back(csv::format(b.capital));
    row.emplace_back(b.shock_applied ? "1" : "0");
    row.emplace_back(b.reset_applied ? "1" : "0");
    csv::write_row(os, row);
  }
}

}  // namespace ramp
