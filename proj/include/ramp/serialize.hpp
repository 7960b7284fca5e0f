#pragma once

// Versioned JSON documents for models, policies and reports.

#include <cmath>
#include <fstream>
#include <optional>
#include <string>

#include "json.hpp"
#include "ramp/agents.hpp"
#include "ramp/env.hpp"
#include "ramp/error.hpp"
#include "ramp/mcsim.hpp"
#include "ramp/metrics.hpp"
#include "ramp/regimes.hpp"
#include "ramp/stats.hpp"

namespace ramp {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

namespace detail {

inline json matrix_json(const Matrix& m) { return m.to_rows(); }

inline Matrix matrix_from_json(const json& j) {
  if (j.is_null() || j.empty()) return {};
  return Matrix::from_rows(j.get<std::vector<std::vector<double>>>());
}

// Non-finite values become null.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json optional_number(const std::optional<double>& v) { return v ? number(*v) : json(nullptr); }

inline void check_schema(const json& j, std::string_view what) {
  if (!j.contains("schema_version") || j.at("schema_version").get<int>() != kSchemaVersion)
    throw ValidationError(std::string(what) + ": unsupported or missing schema_version");
}

}  // namespace detail

inline json to_json(const RegimeModel& m) {
  json spreads = json::array();
  for (const auto& [a, b] : m.features.spread_pairs) spreads.push_back({a, b});
  return {
      {"schema_version", kSchemaVersion},
      {"kind", to_string(m.kind)},
      {"K", m.K},
      {"feature_names", m.feature_names},
      {"means", detail::matrix_json(m.means)},
      {"variances", detail::matrix_json(m.variances)},
      {"mixing_weights", m.mixing_weights},
      {"transition", detail::matrix_json(m.transition)},
      {"initial_dist", m.initial_dist},
      {"standardization", {{"mean", m.standardization.mean}, {"scale", m.standardization.scale}}},
      {"features", {{"window", m.features.window}, {"spread_pairs", spreads}}},
      {"fit_trace", m.fit_trace},
  };
}

inline RegimeModel regime_model_from_json(const json& j) {
  detail::check_schema(j, "regime model");
  try {
    RegimeModel m;
    m.kind = parse_regime_kind(j.at("kind").get<std::string>());
    m.K = j.at("K").get<std::size_t>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.means = detail::matrix_from_json(j.at("means"));
    m.variances = detail::matrix_from_json(j.value("variances", json::array()));
    m.mixing_weights = j.value("mixing_weights", std::vector<double>{});
    m.transition = detail::matrix_from_json(j.value("transition", json::array()));
    m.initial_dist = j.value("initial_dist", std::vector<double>{});
    m.standardization.mean = j.at("standardization").at("mean").get<std::vector<double>>();
    m.standardization.scale = j.at("standardization").at("scale").get<std::vector<double>>();
    if (j.contains("features")) {
      m.features.window = j["features"].at("window").get<std::size_t>();
      for (const auto& p : j["features"].at("spread_pairs"))
        m.features.spread_pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
    }
    m.fit_trace = j.value("fit_trace", std::vector<double>{});
    detail::require(m.K >= 1 && m.means.rows() == m.K, "regime model: means do not match K");
    detail::require(m.standardization.mean.size() == m.dim() && m.standardization.scale.size() == m.dim(),
                    "regime model: standardization does not match feature dimension");
    if (m.kind != RegimeKind::kmeans)
      detail::require(m.variances.rows() == m.K && m.variances.cols() == m.dim(), "regime model: bad variances");
    if (m.kind == RegimeKind::gmm) detail::require(m.mixing_weights.size() == m.K, "regime model: bad mixing weights");
    if (m.kind == RegimeKind::hmm)
      detail::require(m.transition.rows() == m.K && m.initial_dist.size() == m.K, "regime model: bad transition");
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("regime model: ") + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline json to_json(const McSummary& s) {
  return {{"mean", detail::number(s.mean)},
          {"median", detail::number(s.median)},
          {"ci_low", detail::number(s.ci_low)},
          {"ci_high", detail::number(s.ci_high)},
          {"var5", detail::number(s.var5)},
          {"cvar5", detail::number(s.cvar5)},
          {"n_paths", s.n_paths},
          {"horizon", s.horizon},
          {"total_loss_paths", s.total_loss_paths}};
}

inline json to_json(const Policy& p, const std::vector<std::string>& asset_names = {},
                    const std::string& regime_model_ref = "") {
  std::vector<std::string> layout;
  for (std::size_t i = 0; i < p.n_assets; ++i)
    layout.push_back("r:" + (i < asset_names.size() ? asset_names[i] : std::to_string(i)));
  for (std::size_t k = 0; k < p.n_regimes; ++k) layout.push_back("rho:" + std::to_string(k));
  layout.emplace_back("bias");
  return {{"schema_version", kSchemaVersion},
          {"kind", "linear_softmax"},
          {"n_assets", p.n_assets},
          {"n_regimes", p.n_regimes},
          {"sigma", p.sigma},
          {"theta", detail::matrix_json(p.theta)},
          {"feature_layout", layout},
          {"asset_names", asset_names},
          {"regime_model", regime_model_ref}};
}

inline Policy policy_from_json(const json& j) {
  detail::check_schema(j, "policy");
  try {
    Policy p;
    p.n_assets = j.at("n_assets").get<std::size_t>();
    p.n_regimes = j.at("n_regimes").get<std::size_t>();
    p.sigma = j.at("sigma").get<double>();
    p.theta = detail::matrix_from_json(j.at("theta"));
    detail::require(p.theta.rows() == p.n_assets && p.theta.cols() == p.feature_dim(), "policy: theta has wrong shape");
    detail::require(p.sigma > 0.0, "policy: sigma must be > 0");
    return p;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("policy: ") + e.what());
  }
}

inline json to_json(const EnvConfig& c) {
  return {{"lambda_cost", c.lambda_cost},       {"clip_lo", c.clip_lo},
          {"clip_hi", c.clip_hi},               {"reset_interval", c.reset_interval},
          {"shock_interval", c.shock_interval}, {"shock_size", c.shock_size},
          {"epsilon", c.epsilon},               {"var_window", c.var_window},
          {"gamma_k", c.gamma_k},               {"no_clip", c.no_clip},
          {"no_cost", c.no_cost},               {"no_reset", c.no_reset},
          {"no_shock", c.no_shock},             {"reward_mode", to_string(c.reward_mode)},
          {"initial_capital", c.initial_capital}, {"shock_mode", to_string(c.shock_mode)},
          {"shock_seed", c.shock_seed}};
}

inline json to_json(const TrainConfig& c) {
  return {{"total_steps", c.total_steps}, {"learning_rate", c.learning_rate}, {"gamma", c.gamma},
          {"batch_episodes", c.batch_episodes}, {"delta", c.delta}, {"eta", c.eta},
          {"penalty_weight", c.penalty_weight}, {"sigma", c.sigma}, {"seed", c.seed}};
}

inline json to_json(const BacktestReport& r) {
  json cagr = json::array();
  for (const auto& p : r.rolling_cagr) cagr.push_back({{"year", p.year}, {"cagr", detail::number(p.cagr)}});
  return {{"schema_version", kSchemaVersion},
          {"years", r.years},
          {"wealth_curve", r.wealth_curve},
          {"per_step_returns", r.per_step_returns},
          {"sharpe", detail::optional_number(r.sharpe)},
          {"sortino", detail::optional_number(r.sortino)},
          {"max_drawdown", detail::number(r.max_drawdown)},
          {"final_log_value", detail::number(r.final_log_value)},
          {"rolling_cagr", cagr},
          {"reward_trace", r.reward_trace},
          {"shocks", r.shocks},
          {"resets", r.resets}};
}

inline json to_json(const AlignmentReport& r) {
  json regimes = json::array();
  for (const auto& a : r.regimes)
    regimes.push_back({{"regime", a.regime},
                       {"count", a.count},
                       {"crisis_fraction", a.crisis_fraction},
                       {"noncrisis_fraction", a.noncrisis_fraction},
                       {"precision", a.precision},
                       {"recall", a.recall}});
  return {{"schema_version", kSchemaVersion}, {"regimes", regimes},
          {"crisis_count", r.crisis_count},   {"noncrisis_count", r.noncrisis_count},
          {"skipped_years", r.skipped_years}, {"warnings", r.warnings}};
}

inline json to_json(const StatsReport& r) {
  json sizes = json::object();
  for (const auto& [k, n] : r.group_sizes) sizes[std::to_string(k)] = n;
  return {{"schema_version", kSchemaVersion},
          {"f_stat", detail::number(r.anova.f)},
          {"f_p_value", detail::number(r.anova.p)},
          {"df", {r.anova.df_between, r.anova.df_within}},
          {"pairwise_groups", {r.pairwise_a, r.pairwise_b}},
          {"pairwise_diff", detail::number(r.pairwise.diff)},
          {"pairwise_q", detail::number(r.pairwise.q)},
          {"pairwise_p", detail::number(r.pairwise.p)},
          {"mutual_info_nats", detail::number(r.mutual_info.nats)},
          {"crra_mean", detail::number(r.crra_mean)},
          {"cara_mean", detail::number(r.cara_mean)},
          {"group_sizes", sizes},
          {"warnings", r.warnings},
          {"conventions",
           {{"mi_units", "nats"},
            {"binning", "quantile"},
            {"bins", r.options.bins},
            {"bins_used", r.mutual_info.bins_used},
            {"crra_gamma", r.options.crra_gamma},
            {"cara_alpha", r.options.cara_alpha}}}};
}

inline json to_json(const std::vector<VariantResult>& results) {
  json variants = json::array();
  for (const auto& v : results) {
    json runs = json::array();
    for (const auto& r : v.runs)
      runs.push_back({{"seed", r.seed},
                      {"sharpe", detail::optional_number(r.report.sharpe)},
                      {"sortino", detail::optional_number(r.report.sortino)},
                      {"max_drawdown", detail::number(r.report.max_drawdown)},
                      {"final_log_value", detail::number(r.report.final_log_value)}});
    variants.push_back({{"variant", to_string(v.variant)},
                        {"env", to_json(v.env)},
                        {"runs", runs},
                        {"aggregate",
                         {{"sharpe", detail::optional_number(v.aggregate.sharpe)},
                          {"sortino", detail::optional_number(v.aggregate.sortino)},
                          {"max_drawdown", detail::number(v.aggregate.max_drawdown)},
                          {"final_log_value", detail::number(v.aggregate.final_log_value)}}}});
  }
  return {{"schema_version", kSchemaVersion}, {"variants", variants}};
}

}  // namespace ramp
