#pragma once

// Allocation policies and their trainers: a linear-softmax stochastic policy
// over [r_t, rho_t, 1], a score-function (REINFORCE) trainer with a
// regime-weighted value baseline and utility-monotonicity penalty, and a
// cross-entropy-method trainer used as a derivative-free cross-check.

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <numeric>
#include <random>
#include <thread>
#include <vector>

#include "ramp/env.hpp"
#include "ramp/error.hpp"
#include "ramp/matrix.hpp"
#include "ramp/metrics.hpp"
#include "ramp/rng.hpp"

namespace ramp {

struct Policy {
  std::size_t n_assets = 0;
  std::size_t n_regimes = 0;
  Matrix theta;  // N x (N + K + 1)
  double sigma = 0.5;

  std::size_t feature_dim() const noexcept { return n_assets + n_regimes + 1; }

  static Policy zeros(std::size_t n_assets, std::size_t n_regimes, double sigma = 0.5) {
    detail::require(n_assets >= 1, "policy needs at least one asset");
    detail::require(sigma > 0.0, "policy sigma must be > 0");
    return {n_assets, n_regimes, Matrix(n_assets, n_assets + n_regimes + 1), sigma};
  }

  double norm() const {
    double s = 0.0;
    for (double v : theta.data()) s += v * v;
    return std::sqrt(s);
  }
};

inline std::vector<double> policy_features(const Policy& p, const Observation& obs) {
  if (obs.returns.size() != p.n_assets || obs.regime_probs.size() != p.n_regimes)
    throw ValidationError("observation (" + std::to_string(obs.returns.size()) + " returns, " +
                          std::to_string(obs.regime_probs.size()) + " regimes) does not match policy (" +
                          std::to_string(p.n_assets) + ", " + std::to_string(p.n_regimes) + ")");
  std::vector<double> phi;
  phi.reserve(p.feature_dim());
  phi.insert(phi.end(), obs.returns.begin(), obs.returns.end());
  phi.insert(phi.end(), obs.regime_probs.begin(), obs.regime_probs.end());
  phi.push_back(1.0);
  return phi;
}

inline std::vector<double> softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> w(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) s += (w[i] = std::exp(logits[i] - m));
  for (double& v : w) v /= s;
  return w;
}

inline std::vector<double> policy_logits(const Policy& p, std::span<const double> phi) {
  std::vector<double> mu(p.n_assets);
  for (std::size_t i = 0; i < p.n_assets; ++i) mu[i] = dot(p.theta.row(i), phi);
  return mu;
}

// Deterministic action: softmax of the mean logits.
inline PortfolioWeights policy_act(const Policy& p, const Observation& obs) {
  return softmax(policy_logits(p, policy_features(p, obs)));
}

struct PolicySample {
  PortfolioWeights weights;
  std::vector<double> features;
  std::vector<double> noise;  // standard normal draws; logits = mean + sigma * noise
};

inline PolicySample policy_sample(const Policy& p, const Observation& obs, RngStream& rng) {
  PolicySample s;
  s.features = policy_features(p, obs);
  auto z = policy_logits(p, s.features);
  std::normal_distribution<double> normal(0.0, 1.0);
  s.noise.resize(p.n_assets);
  for (std::size_t i = 0; i < p.n_assets; ++i) {
    s.noise[i] = normal(rng);
    z[i] += p.sigma * s.noise[i];
  }
  s.weights = softmax(z);
  return s;
}

inline PortfolioWeights policy_act(const Policy& p, const Observation& obs, RngStream& rng) {
  return policy_sample(p, obs, rng).weights;
}

inline Allocator as_allocator(const Policy& p) {
  return [p](const Observation& obs) { return policy_act(p, obs); };
}

inline Policy equal_weight_policy(std::size_t n_assets, std::size_t n_regimes = 1) {
  return Policy::zeros(n_assets, n_regimes);
}

// Best in-sample Sharpe among equal weight, the N vertices and n_candidates
// Dirichlet(1,...,1) draws, evaluated in that order (ties keep the first).
inline PortfolioWeights sharpe_optimal_static(const Matrix& returns, std::size_t n_candidates, std::uint64_t seed) {
  const std::size_t N = returns.cols();
  detail::require(N >= 1 && returns.rows() >= 2, "sharpe_optimal_static needs >= 2 periods and >= 1 asset");
  std::vector<PortfolioWeights> candidates{equal_weights(N)};
  for (std::size_t i = 0; i < N; ++i) {
    PortfolioWeights v(N, 0.0);
    v[i] = 1.0;
    candidates.push_back(v);
  }
  auto rng = make_stream(seed, "sharpe_opt_candidates");
  std::exponential_distribution<double> expo(1.0);
  for (std::size_t c = 0; c < n_candidates; ++c) {
    PortfolioWeights w(N);
    double s = 0.0;
    for (double& v : w) s += (v = expo(rng));
    for (double& v : w) v /= s;
    candidates.push_back(std::move(w));
  }
  std::optional<double> best;
  PortfolioWeights chosen = candidates.front();
  std::vector<double> series(returns.rows());
  for (const auto& w : candidates) {
    for (std::size_t t = 0; t < returns.rows(); ++t) series[t] = dot(w, returns.row(t));
    try {
      const double s = sharpe(series);
      if (!best || s > *best) {
        best = s;
        chosen = w;
      }
    } catch (const NumericalError&) {
    }
  }
  return chosen;
}

// Per-step hinge terms max(0, -dU_t - eta), where dU_t = U_{t:T} - U_{t+1:T}
// and U_{T+1:T} = 0.
inline std::vector<double> utility_penalty_terms(std::span<const double> rewards, double delta, double eta) {
  detail::require(delta > 0.0 && delta <= 1.0, "delta must lie in (0,1]");
  detail::require(eta >= 0.0, "eta must be >= 0");
  const std::size_t T = rewards.size();
  std::vector<double> terms(T);
  double tail = 0.0;  // U_{t+1:T}
  for (std::size_t t = T; t-- > 0;) {
    const double u = rewards[t] + delta * tail;
    terms[t] = std::max(0.0, -(u - tail) - eta);
    tail = u;
  }
  return terms;
}

inline double utility_path_penalty(std::span<const double> rewards, double delta, double eta) {
  const auto terms = utility_penalty_terms(rewards, delta, eta);
  return std::accumulate(terms.begin(), terms.end(), 0.0);
}

// V(s) = sum_k rho_k v_k . phi(s), one linear head per regime.
struct RegimeValueBaseline {
  std::size_t n_regimes = 0;
  std::size_t feature_dim = 0;
  Matrix heads;  // K x d

  static RegimeValueBaseline zeros(std::size_t K, std::size_t d) { return {K, d, Matrix(K, d)}; }

  double predict(std::span<const double> phi, std::span<const double> rho) const {
    double v = 0.0;
    for (std::size_t k = 0; k < n_regimes; ++k) v += rho[k] * dot(heads.row(k), phi);
    return v;
  }
};

struct BaselineSample {
  std::vector<double> features;  // phi(s_t)
  std::vector<double> rho;       // rho_t
  double target = 0.0;           // discounted return G_t
};

inline constexpr double kBaselineRidge = 1e-6;

// Least squares on the design row rho (x) phi, so the fitted prediction is
// sum_k rho_k v_k . phi. Normal equations with a small ridge.
inline RegimeValueBaseline fit_regime_value_baseline(const std::vector<BaselineSample>& samples) {
  detail::require(!samples.empty(), "baseline fit needs at least one sample");
  const std::size_t K = samples.front().rho.size(), d = samples.front().features.size();
  const std::size_t p = K * d;
  Matrix xtx(p, p);
  std::vector<double> xty(p, 0.0), x(p);
  for (const auto& s : samples) {
    detail::require(s.rho.size() == K && s.features.size() == d, "baseline samples differ in shape");
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t j = 0; j < d; ++j) x[k * d + j] = s.rho[k] * s.features[j];
    for (std::size_t a = 0; a < p; ++a) {
      if (x[a] == 0.0) continue;
      xty[a] += x[a] * s.target;
      for (std::size_t b = 0; b < p; ++b) xtx(a, b) += x[a] * x[b];
    }
  }
  for (std::size_t a = 0; a < p; ++a) xtx(a, a) += kBaselineRidge;
  const auto v = cholesky_solve(std::move(xtx), std::move(xty));
  auto out = RegimeValueBaseline::zeros(K, d);
  std::copy(v.begin(), v.end(), out.heads.data().begin());
  return out;
}

// grad(i, j) += weight * d/dtheta_ij log pi = weight * (noise_i / sigma) * phi_j
inline void accumulate_score(Matrix& grad, std::span<const double> noise, std::span<const double> phi, double sigma,
                             double weight) {
  for (std::size_t i = 0; i < grad.rows(); ++i) {
    const double g = weight * noise[i] / sigma;
    for (std::size_t j = 0; j < grad.cols(); ++j) grad(i, j) += g * phi[j];
  }
}

// Score-function estimate of d/dtheta E[reward(softmax(theta phi + sigma xi))]
// over the supplied noise draws, with the sample-mean reward as baseline.
inline Matrix score_function_gradient(const Policy& p, std::span<const double> phi,
                                      const std::vector<std::vector<double>>& noise,
                                      const std::function<double(const PortfolioWeights&)>& reward) {
  detail::require(!noise.empty(), "gradient estimate needs noise samples");
  const auto mu = policy_logits(p, phi);
  std::vector<double> rewards(noise.size());
  std::vector<double> z(p.n_assets);
  for (std::size_t m = 0; m < noise.size(); ++m) {
    for (std::size_t i = 0; i < p.n_assets; ++i) z[i] = mu[i] + p.sigma * noise[m][i];
    rewards[m] = reward(softmax(z));
  }
  const double base = std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
  Matrix grad(p.theta.rows(), p.theta.cols());
  const double inv = 1.0 / static_cast<double>(noise.size());
  for (std::size_t m = 0; m < noise.size(); ++m) accumulate_score(grad, noise[m], phi, p.sigma, (rewards[m] - base) * inv);
  return grad;
}

struct TrainConfig {
  std::size_t total_steps = 250000;
  double learning_rate = 1e-4;
  double gamma = 0.99;
  std::size_t batch_episodes = 8;
  double delta = 0.99;
  double eta = 0.05;
  double penalty_weight = 0.1;
  double sigma = 0.5;  // exploration std in logit space
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const {
    detail::require(gamma > 0.0 && gamma <= 1.0, "discount gamma must lie in (0,1]");
    detail::require(learning_rate >= 0.0, "learning_rate must be >= 0");
    detail::require(batch_episodes >= 1, "batch_episodes must be >= 1");
    detail::require(delta > 0.0 && delta <= 1.0, "delta must lie in (0,1]");
    detail::require(eta >= 0.0 && penalty_weight >= 0.0, "eta and penalty_weight must be >= 0");
    detail::require(sigma > 0.0, "sigma must be > 0");
  }

  bool operator==(const TrainConfig&) const = default;
};

struct ProgressRow {
  std::size_t iteration = 0;
  double mean_return = 0.0;
  double mean_penalty = 0.0;
  double param_norm = 0.0;
};

struct TrainResult {
  Policy policy;
  std::vector<ProgressRow> progress;
};

using EnvFactory = std::function<Environment()>;

inline constexpr double kDivergenceNorm = 1e6;

namespace detail {

struct EpisodeRecord {
  std::vector<std::vector<double>> features, noise, rho;
  std::vector<double> rewards;
};

inline EpisodeRecord rollout(const Policy& p, Environment env, RngStream rng) {
  EpisodeRecord rec;
  auto obs = env.reset();
  while (!env.done()) {
    auto s = policy_sample(p, obs, rng);
    rec.rho.push_back(obs.regime_probs);
    auto res = env.step(s.weights);
    rec.features.push_back(std::move(s.features));
    rec.noise.push_back(std::move(s.noise));
    rec.rewards.push_back(res.reward);
    obs = std::move(res.obs);
  }
  return rec;
}

// Runs fn(i) for i in [0, n) over up to `threads` workers. Each index writes
// only its own output slot, so results do not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += threads) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline void check_divergence(const Policy& p, std::size_t iteration) {
  const double n = p.norm();
  if (!std::isfinite(n) || n > kDivergenceNorm)
    throw NumericalError("policy parameters diverged at iteration " + std::to_string(iteration) +
                         " (norm " + csv::format(n) + ")");
}

}  // namespace detail

// Score-function policy gradient with a regime-weighted value baseline.
// Episode i of iteration j uses RNG stream (seed, j * batch + i).
inline TrainResult reinforce_train(const EnvFactory& make_env, const TrainConfig& cfg) {
  cfg.validate();
  const Environment probe = make_env();
  const std::size_t N = probe.assets(), K = probe.regimes(), T = probe.length();
  TrainResult out;
  out.policy = Policy::zeros(N, K, cfg.sigma);
  auto baseline = RegimeValueBaseline::zeros(K, out.policy.feature_dim());
  const std::size_t per_iter = cfg.batch_episodes * T;
  const std::size_t iterations = std::max<std::size_t>(1, (cfg.total_steps + per_iter - 1) / per_iter);

  std::vector<detail::EpisodeRecord> batch(cfg.batch_episodes);
  for (std::size_t it = 0; it < iterations; ++it) {
    const Policy frozen = out.policy;
    detail::parallel_for(cfg.batch_episodes, cfg.threads, [&](std::size_t e) {
      batch[e] = detail::rollout(frozen, make_env(), make_stream(cfg.seed, "reinforce_episode", it * cfg.batch_episodes + e));
    });

    std::vector<BaselineSample> samples;
    std::vector<double> advantages;
    double sum_return = 0.0, sum_penalty = 0.0;
    for (const auto& ep : batch) {
      const double penalty = utility_path_penalty(ep.rewards, cfg.delta, cfg.eta);
      sum_penalty += penalty;
      sum_return += std::accumulate(ep.rewards.begin(), ep.rewards.end(), 0.0);
      std::vector<double> G(ep.rewards.size());
      double acc = 0.0;
      for (std::size_t t = ep.rewards.size(); t-- > 0;) G[t] = acc = ep.rewards[t] + cfg.gamma * acc;
      for (std::size_t t = 0; t < G.size(); ++t) {
        const double target = G[t] - cfg.penalty_weight * penalty;
        advantages.push_back(target - baseline.predict(ep.features[t], ep.rho[t]));
        samples.push_back({ep.features[t], ep.rho[t], target});
      }
    }
    // per-batch advantage normalization
    const double mean_adv = std::accumulate(advantages.begin(), advantages.end(), 0.0) / static_cast<double>(advantages.size());
    double var_adv = 0.0;
    for (double a : advantages) var_adv += (a - mean_adv) * (a - mean_adv);
    const double sd_adv = std::sqrt(var_adv / static_cast<double>(advantages.size()));
    Matrix grad(N, out.policy.feature_dim());
    std::size_t idx = 0;
    const double inv = 1.0 / static_cast<double>(advantages.size());
    for (const auto& ep : batch)
      for (std::size_t t = 0; t < ep.rewards.size(); ++t, ++idx)
        accumulate_score(grad, ep.noise[t], ep.features[t], out.policy.sigma,
                                 (advantages[idx] - mean_adv) / (sd_adv + 1e-8) * inv);
    auto theta = out.policy.theta.data();
    const auto g = grad.data();
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += cfg.learning_rate * g[i];
    detail::check_divergence(out.policy, it);
    baseline = fit_regime_value_baseline(samples);

    const double B = static_cast<double>(cfg.batch_episodes);
    out.progress.push_back({it, sum_return / B, sum_penalty / B, out.policy.norm()});
  }
  return out;
}

struct CemConfig {
  std::size_t iterations = 30;
  std::size_t population = 32;
  double elite_frac = 0.25;
  double init_std = 1.0;
  double min_std = 0.05;
  double delta = 0.99;
  double eta = 0.05;
  double penalty_weight = 0.1;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const {
    detail::require(population >= 1, "population must be >= 1");
    detail::require(elite_frac > 0.0 && elite_frac <= 1.0, "elite_frac must lie in (0,1]");
    detail::require(init_std > 0.0 && min_std >= 0.0, "init_std must be > 0 and min_std >= 0");
  }
};

// Deterministic episode score: summed rewards minus the utility penalty.
inline double episode_score(const Policy& p, Environment env, double delta, double eta, double penalty_weight) {
  auto obs = env.reset();
  std::vector<double> rewards;
  while (!env.done()) {
    auto res = env.step(policy_act(p, obs));
    rewards.push_back(res.reward);
    obs = std::move(res.obs);
  }
  return std::accumulate(rewards.begin(), rewards.end(), 0.0) -
         penalty_weight * utility_path_penalty(rewards, delta, eta);
}

struct CemDistribution {
  std::vector<double> mean;
  std::vector<double> std;
};

// Refit to the top ceil(elite_frac * n) candidates (ties keep lower index).
inline CemDistribution cem_update(const std::vector<std::vector<double>>& candidates, const std::vector<double>& scores,
                                  double elite_frac, double min_std) {
  detail::require(!candidates.empty() && candidates.size() == scores.size(), "cem_update: bad population");
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  const auto n_elite = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(elite_frac * static_cast<double>(candidates.size()) - 1e-9)));
  const std::size_t d = candidates.front().size();
  CemDistribution out{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (std::size_t e = 0; e < n_elite; ++e)
    for (std::size_t j = 0; j < d; ++j) out.mean[j] += candidates[order[e]][j];
  for (double& m : out.mean) m /= static_cast<double>(n_elite);
  for (std::size_t e = 0; e < n_elite; ++e)
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = candidates[order[e]][j] - out.mean[j];
      out.std[j] += diff * diff;
    }
  for (double& s : out.std) s = std::max(std::sqrt(s / static_cast<double>(n_elite)), min_std);
  return out;
}

// Returns the best-scoring policy seen, starting from the zero-mean policy.
inline TrainResult cem_train(const EnvFactory& make_env, const CemConfig& cfg, double sigma = 0.5) {
  cfg.validate();
  const Environment probe = make_env();
  TrainResult out;
  out.policy = Policy::zeros(probe.assets(), probe.regimes(), sigma);
  const std::size_t d = out.policy.theta.data().size();
  CemDistribution dist{std::vector<double>(d, 0.0), std::vector<double>(d, cfg.init_std)};
  auto to_policy = [&](const std::vector<double>& v) {
    Policy p = out.policy;
    std::copy(v.begin(), v.end(), p.theta.data().begin());
    return p;
  };
  double best = episode_score(out.policy, make_env(), cfg.delta, cfg.eta, cfg.penalty_weight);

  std::vector<std::vector<double>> pop(cfg.population);
  std::vector<double> scores(cfg.population);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    auto rng = make_stream(cfg.seed, "cem_population", it);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& cand : pop) {
      cand.resize(d);
      for (std::size_t j = 0; j < d; ++j) cand[j] = dist.mean[j] + dist.std[j] * normal(rng);
    }
    detail::parallel_for(cfg.population, cfg.threads, [&](std::size_t i) {
      scores[i] = episode_score(to_policy(pop[i]), make_env(), cfg.delta, cfg.eta, cfg.penalty_weight);
    });
    for (std::size_t i = 0; i < pop.size(); ++i)
      if (scores[i] > best) {
        best = scores[i];
        out.policy = to_policy(pop[i]);
      }
    detail::check_divergence(out.policy, it);
    dist = cem_update(pop, scores, cfg.elite_frac, cfg.min_std);
    const double mean_score = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
    out.progress.push_back({it, mean_score, 0.0, out.policy.norm()});
  }
  return out;
}

inline void write_progress_csv(std::ostream& os, const std::vector<ProgressRow>& rows) {
  os << "iteration,mean_return,penalty,param_norm\n";
  for (const auto& r : rows)
    os << r.iteration << ',' << csv::format(r.mean_return) << ',' << csv::format(r.mean_penalty) << ','
       << csv::format(r.param_norm) << '\n';
}

// ---------------------------------------------------------------------------
// Ablations

enum class AblationVariant { baseline, noclip, nocost, noreset };

inline std::string to_string(AblationVariant v) {
  switch (v) {
    case AblationVariant::baseline: return "baseline";
    case AblationVariant::noclip: return "noclip";
    case AblationVariant::nocost: return "nocost";
    case AblationVariant::noreset: return "noreset";
  }
  return "?";
}

inline AblationVariant parse_ablation_variant(std::string_view s) {
  if (s == "baseline") return AblationVariant::baseline;
  if (s == "noclip") return AblationVariant::noclip;
  if (s == "nocost") return AblationVariant::nocost;
  if (s == "noreset") return AblationVariant::noreset;
  throw ValidationError("unknown ablation variant '" + std::string(s) + "'");
}

inline EnvConfig apply_variant(EnvConfig cfg, AblationVariant v) {
  switch (v) {
    case AblationVariant::baseline: break;
    case AblationVariant::noclip: cfg.no_clip = true; break;
    case AblationVariant::nocost: cfg.no_cost = true; break;
    case AblationVariant::noreset: cfg.no_reset = true; break;
  }
  return cfg;
}

struct AblationRun {
  std::uint64_t seed = 0;
  BacktestReport report;
};

struct AblationAggregate {
  std::optional<double> sharpe, sortino;  // mean over seeds where defined
  double max_drawdown = 0.0;
  double final_log_value = 0.0;
};

struct VariantResult {
  AblationVariant variant = AblationVariant::baseline;
  EnvConfig env;
  std::vector<AblationRun> runs;
  AblationAggregate aggregate;
};

using EnvBuilder = std::function<Environment(const EnvConfig&)>;

// Trains one agent per (variant, seed) in the variant's environment and
// evaluates every agent in the shared base evaluation environment.
inline std::vector<VariantResult> run_ablations(const EnvConfig& base, const TrainConfig& train,
                                                const std::vector<AblationVariant>& variants,
                                                const std::vector<std::uint64_t>& seeds, const EnvBuilder& train_env,
                                                const EnvBuilder& eval_env) {
  detail::require(!seeds.empty(), "ablation needs at least one seed");
  std::vector<AblationVariant> all{AblationVariant::baseline};
  for (auto v : variants)
    if (std::find(all.begin(), all.end(), v) == all.end()) all.push_back(v);

  std::vector<VariantResult> out;
  for (auto v : all) {
    VariantResult vr;
    vr.variant = v;
    vr.env = apply_variant(base, v);
    std::vector<double> sharpes, sortinos;
    for (auto seed : seeds) {
      TrainConfig tc = train;
      tc.seed = seed;
      const auto trained = reinforce_train([&] { return train_env(vr.env); }, tc);
      Environment env = eval_env(base);
      auto rep = backtest(as_allocator(trained.policy), env);
      if (rep.sharpe) sharpes.push_back(*rep.sharpe);
      if (rep.sortino) sortinos.push_back(*rep.sortino);
      vr.aggregate.max_drawdown += rep.max_drawdown;
      vr.aggregate.final_log_value += rep.final_log_value;
      vr.runs.push_back({seed, std::move(rep)});
    }
    const double n = static_cast<double>(seeds.size());
    vr.aggregate.max_drawdown /= n;
    vr.aggregate.final_log_value /= n;
    if (!sharpes.empty()) vr.aggregate.sharpe = detail::mean(sharpes);
    if (!sortinos.empty()) vr.aggregate.sortino = detail::mean(sortinos);
    out.push_back(std::move(vr));
  }
  return out;
}

}  // namespace ramp
