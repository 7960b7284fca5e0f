#pragma once

// Regime-switching Monte Carlo: Markov regime chains, regime-conditional
// joint bootstrap of historical return vectors, fixed-weight compounding and
// terminal-return distribution summaries.

#include <algorithm>
#include <cmath>
#include <optional>
#include <thread>
#include <variant>
#include <vector>

#include "ramp/error.hpp"
#include "ramp/matrix.hpp"
#include "ramp/rng.hpp"

namespace ramp {

class TransitionMatrix {
 public:
  TransitionMatrix() = default;
  explicit TransitionMatrix(Matrix p) : p_(std::move(p)) {
    detail::require(p_.rows() >= 1 && p_.rows() == p_.cols(), "transition matrix must be square and non-empty");
    for (std::size_t i = 0; i < p_.rows(); ++i) {
      double s = 0.0;
      for (double v : p_.row(i)) {
        detail::require(v >= 0.0 && v <= 1.0, "transition probabilities must lie in [0,1]");
        s += v;
      }
      detail::require(std::abs(s - 1.0) <= 1e-12,
                      "transition row " + std::to_string(i) + " sums to " + std::to_string(s));
    }
  }
  TransitionMatrix(std::initializer_list<std::initializer_list<double>> init) : TransitionMatrix(Matrix(init)) {}

  // Normalizes rows first; for estimated matrices carrying rounding error.
  static TransitionMatrix normalized(Matrix p) {
    for (std::size_t i = 0; i < p.rows(); ++i) {
      double s = 0.0;
      for (double v : p.row(i)) s += v;
      detail::require(s > 0.0, "transition row with zero mass");
      for (double& v : p.row(i)) v /= s;
    }
    return TransitionMatrix(std::move(p));
  }

  std::size_t size() const noexcept { return p_.rows(); }
  std::span<const double> row(std::size_t i) const { return p_.row(i); }
  double operator()(std::size_t i, std::size_t j) const { return p_(i, j); }
  const Matrix& matrix() const noexcept { return p_; }

 private:
  Matrix p_;
};

// Either a fixed starting regime or a distribution to draw it from.
using InitialRegime = std::variant<std::size_t, std::vector<double>>;

namespace detail {

inline std::size_t draw_initial(const InitialRegime& init, std::size_t K, RngStream& rng) {
  if (const auto* fixed = std::get_if<std::size_t>(&init)) {
    require(*fixed < K, "initial regime out of range");
    return *fixed;
  }
  const auto& dist = std::get<std::vector<double>>(init);
  require(dist.size() == K, "initial distribution has wrong length");
  return sample_categorical(dist, rng);
}

}  // namespace detail

inline std::vector<int> simulate_chain(std::size_t T, const TransitionMatrix& P, const InitialRegime& initial,
                                       RngStream& rng) {
  std::vector<int> path;
  if (T == 0) return path;
  path.reserve(T);
  std::size_t state = detail::draw_initial(initial, P.size(), rng);
  path.push_back(static_cast<int>(state));
  for (std::size_t t = 1; t < T; ++t) {
    state = sample_categorical(P.row(state), rng);
    path.push_back(static_cast<int>(state));
  }
  return path;
}

// Solves pi P = pi by power iteration.
inline std::vector<double> stationary_distribution(const TransitionMatrix& P, std::size_t iters = 10000) {
  const std::size_t K = P.size();
  std::vector<double> pi(K, 1.0 / static_cast<double>(K)), next(K);
  for (std::size_t it = 0; it < iters; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < K; ++i)
      for (std::size_t j = 0; j < K; ++j) next[j] += pi[i] * P(i, j);
    // average with the previous iterate so periodic chains converge too
    double diff = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
      const double v = 0.5 * (pi[j] + next[j]);
      diff = std::max(diff, std::abs(v - pi[j]));
      pi[j] = v;
    }
    if (diff < 1e-15) break;
  }
  return pi;
}

// Coefficients of the logistic stress-entry model driven by macro signals.
struct MacroCoeffs {
  double a0 = std::log(0.1 / 0.9);
  double a1 = -5.0;  // risk premium
  double a2 = -5.0;  // yield spread
};

inline double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Two-regime model (0 = normal, 1 = stress). From the normal regime the
// probability of entering stress becomes logistic(a0 + a1*rp + a2*ys); the
// stress row keeps its base persistence.
inline std::vector<double> macro_adjusted_row(const TransitionMatrix& base, std::size_t regime, double risk_premium,
                                              double yield_spread, const MacroCoeffs& c) {
  if (base.size() != 2)
    throw ValidationError("macro-adjusted transitions support exactly 2 regimes, got " + std::to_string(base.size()));
  detail::require(regime < 2, "regime index out of range");
  if (regime == 1) return {base(1, 0), base(1, 1)};
  const double stress = logistic(c.a0 + c.a1 * risk_premium + c.a2 * yield_spread);
  return {1.0 - stress, stress};
}

// Historical return vectors grouped by regime label.
struct RegimeReturnPools {
  std::vector<Matrix> pools;  // pools[k] is n_k x N

  std::size_t regimes() const noexcept { return pools.size(); }
  std::size_t assets() const noexcept { return pools.empty() ? 0 : pools.front().cols(); }

  static RegimeReturnPools from_labels(const Matrix& returns, const std::vector<int>& labels, std::size_t K) {
    detail::require(returns.rows() == labels.size(), "pools: returns and labels differ in length");
    std::vector<std::vector<std::vector<double>>> rows(K);
    for (std::size_t t = 0; t < labels.size(); ++t) {
      detail::require(labels[t] >= 0 && static_cast<std::size_t>(labels[t]) < K, "pools: label out of range");
      rows[static_cast<std::size_t>(labels[t])].push_back(returns.row_vector(t));
    }
    RegimeReturnPools p;
    for (auto& r : rows) p.pools.push_back(r.empty() ? Matrix(0, returns.cols()) : Matrix::from_rows(r));
    return p;
  }

  void validate() const {
    detail::require(!pools.empty(), "no return pools");
    for (std::size_t k = 0; k < pools.size(); ++k) {
      detail::require(pools[k].cols() == assets(), "pool vectors differ in length");
    }
  }
};

inline Matrix sample_regime_returns(const std::vector<int>& path, const RegimeReturnPools& pools, RngStream& rng) {
  Matrix out(path.size(), pools.assets());
  for (std::size_t t = 0; t < path.size(); ++t) {
    const auto k = static_cast<std::size_t>(path[t]);
    detail::require(k < pools.regimes(), "regime " + std::to_string(k) + " has no pool");
    const Matrix& pool = pools.pools[k];
    if (pool.rows() == 0) throw ValidationError("empty return pool for visited regime " + std::to_string(k));
    const auto pick = std::uniform_int_distribution<std::size_t>(0, pool.rows() - 1)(rng);
    std::copy_n(pool.row(pick).begin(), pool.cols(), out.row(t).begin());
  }
  return out;
}

struct CompoundResult {
  double terminal = 0.0;
  bool total_loss = false;
};

inline void validate_weights(std::span<const double> w, double tol = 1e-12) {
  double s = 0.0;
  for (double v : w) {
    detail::require(v >= -tol, "portfolio weights must be non-negative");
    s += v;
  }
  detail::require(std::abs(s - 1.0) <= tol, "portfolio weights must sum to 1");
}

// Rebalanced to `weights` every period: exp(sum ln(1 + w'r_t)) - 1.
inline CompoundResult compound_strategy(const Matrix& returns, std::span<const double> weights) {
  detail::require(returns.cols() == weights.size(), "weights/returns dimension mismatch");
  validate_weights(weights, 1e-9);
  double log_wealth = 0.0;
  for (std::size_t t = 0; t < returns.rows(); ++t) {
    const double r = dot(weights, returns.row(t));
    if (r <= -1.0) return {-1.0, true};
    log_wealth += std::log1p(r);
  }
  return {std::expm1(log_wealth), false};
}

// Cumulative wealth curve (starting at `initial`) of the same rebalanced strategy.
inline std::vector<double> compound_wealth_curve(const Matrix& returns, std::span<const double> weights,
                                                 double initial = 1.0) {
  std::vector<double> wealth{initial};
  double log_wealth = 0.0;
  for (std::size_t t = 0; t < returns.rows(); ++t) {
    log_wealth += std::log1p(dot(weights, returns.row(t)));
    wealth.push_back(initial * std::exp(log_wealth));
  }
  return wealth;
}

struct VarCvar {
  double var = 0.0;
  double cvar = 0.0;
};

// Lower-tail empirical VaR (order statistic ceil(alpha n)) and the mean of
// all samples at or below it. Values are terminal returns, not losses.
// The tail mean is accumulated as offsets from VaR, so cvar <= var holds
// exactly and a constant sample returns that constant.
inline VarCvar empirical_var_cvar(std::vector<double> samples, double alpha) {
  detail::require(!samples.empty(), "empirical_var_cvar: empty sample");
  detail::require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  // 1e-9 absorbs representation error in alpha*n (0.05 * 20 must give 1)
  const auto rank = static_cast<long long>(std::ceil(alpha * n - 1e-9));
  const auto idx = static_cast<std::size_t>(std::max(rank - 1, 0LL));
  VarCvar out;
  out.var = samples[idx];
  double sum = 0.0;
  std::size_t count = 0;
  for (double s : samples) {
    if (s > out.var) break;
    sum += s - out.var;
    ++count;
  }
  out.cvar = out.var + sum / static_cast<double>(count);
  return out;
}

// Linear-interpolation quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct MacroSignalColumns {
  std::size_t equity, tbill, corporate, treasury;
};

struct McConfig {
  std::size_t horizon_years = 10;
  std::size_t n_paths = 10000;
  TransitionMatrix transition;
  InitialRegime initial_regime = std::size_t{0};
  RegimeReturnPools pools;
  std::vector<double> strategy_weights;
  std::uint64_t seed = 0;
  std::optional<MacroCoeffs> macro_coeffs;
  // Required with macro_coeffs: risk premium = equity - tbill, yield
  // spread = corporate - treasury, read from each sampled return vector.
  std::optional<MacroSignalColumns> macro_columns;
  std::size_t threads = 1;
};

struct McSummary {
  double mean = 0.0;
  double median = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double var5 = 0.0;
  double cvar5 = 0.0;
  std::size_t n_paths = 0;
  std::size_t horizon = 0;
  std::size_t total_loss_paths = 0;
  std::vector<double> terminal_returns;  // in path order
};

inline McSummary summarize_terminal_returns(std::vector<double> terminal, std::size_t horizon,
                                            std::size_t total_loss_paths) {
  detail::require(!terminal.empty(), "no terminal returns to summarize");
  McSummary s;
  s.n_paths = terminal.size();
  s.horizon = horizon;
  s.total_loss_paths = total_loss_paths;
  std::vector<double> sorted = terminal;
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  s.mean = sum / static_cast<double>(sorted.size());
  s.median = quantile_sorted(sorted, 0.5);
  s.ci_low = quantile_sorted(sorted, 0.025);
  s.ci_high = quantile_sorted(sorted, 0.975);
  const auto vc = empirical_var_cvar(sorted, 0.05);
  s.var5 = vc.var;
  s.cvar5 = vc.cvar;
  s.terminal_returns = std::move(terminal);
  return s;
}

namespace detail {

inline CompoundResult simulate_path(const McConfig& cfg, std::size_t path_index) {
  auto rng = make_stream(cfg.seed, "mc_path", path_index);
  if (!cfg.macro_coeffs) {
    const auto chain = simulate_chain(cfg.horizon_years, cfg.transition, cfg.initial_regime, rng);
    return compound_strategy(sample_regime_returns(chain, cfg.pools, rng), cfg.strategy_weights);
  }
  // Macro mode: the next regime depends on the signals in this year's draw.
  const auto& cols = *cfg.macro_columns;
  std::vector<int> one(1);
  Matrix returns(cfg.horizon_years, cfg.pools.assets());
  std::size_t state = draw_initial(cfg.initial_regime, cfg.transition.size(), rng);
  for (std::size_t t = 0; t < cfg.horizon_years; ++t) {
    one[0] = static_cast<int>(state);
    const Matrix r = sample_regime_returns(one, cfg.pools, rng);
    std::copy_n(r.row(0).begin(), r.cols(), returns.row(t).begin());
    const double rp = r(0, cols.equity) - r(0, cols.tbill);
    const double ys = r(0, cols.corporate) - r(0, cols.treasury);
    const auto row = macro_adjusted_row(cfg.transition, state, rp, ys, *cfg.macro_coeffs);
    state = sample_categorical(row, rng);
  }
  return compound_strategy(returns, cfg.strategy_weights);
}

}  // namespace detail

inline void validate(const McConfig& cfg) {
  detail::require(cfg.horizon_years >= 1, "horizon must be >= 1");
  detail::require(cfg.n_paths >= 1, "n_paths must be >= 1");
  detail::require(cfg.transition.size() >= 1, "transition matrix missing");
  cfg.pools.validate();
  detail::require(cfg.pools.regimes() == cfg.transition.size(), "pools and transition matrix disagree on K");
  detail::require(cfg.strategy_weights.size() == cfg.pools.assets(), "strategy weights have wrong length");
  validate_weights(cfg.strategy_weights);
  if (cfg.macro_coeffs) {
    detail::require(cfg.macro_columns.has_value(), "macro mode needs signal columns");
    detail::require(cfg.transition.size() == 2, "macro mode supports exactly 2 regimes");
  }
}

// Paths are independent with per-path RNG streams; the result is identical
// for any thread count.
inline McSummary run_monte_carlo(const McConfig& cfg) {
  validate(cfg);
  std::vector<CompoundResult> results(cfg.n_paths);
  const std::size_t threads = std::clamp<std::size_t>(cfg.threads, 1, cfg.n_paths);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) results[p] = detail::simulate_path(cfg, p);
  };
  if (threads == 1) {
    work(0, cfg.n_paths);
  } else {
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const std::size_t chunk = (cfg.n_paths + threads - 1) / threads;
    for (std::size_t i = 0; i < threads; ++i) {
      const std::size_t b = std::min(i * chunk, cfg.n_paths), e = std::min(b + chunk, cfg.n_paths);
      pool.emplace_back([&, b, e, i] {
        try {
          work(b, e);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
    pool.clear();
    for (auto& err : errors)
      if (err) std::rethrow_exception(err);
  }
  std::vector<double> terminal;
  terminal.reserve(results.size());
  std::size_t losses = 0;
  for (const auto& r : results) {
    terminal.push_back(r.terminal);
    losses += r.total_loss ? 1 : 0;
  }
  return summarize_terminal_returns(std::move(terminal), cfg.horizon_years, losses);
}

}  // namespace ramp
