#pragma once

// Flat key-value configuration files:
//
//   # comment
//   lambda_cost = 0.002
//   gamma_k = 1.0, 2.0, 3.0
//
// Keys for the environment match the EnvConfig field names.

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "ramp/agents.hpp"
#include "ramp/csv.hpp"
#include "ramp/env.hpp"
#include "ramp/error.hpp"

namespace ramp {

using KeyValues = std::map<std::string, std::string>;

inline KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto body = csv::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key = value", line_no, 1);
    const auto key = csv::trim(body.substr(0, eq));
    if (key.empty()) throw ParseError("empty key", line_no, 1);
    kv[std::string(key)] = std::string(csv::trim(body.substr(eq + 1)));
  }
  return kv;
}

inline KeyValues load_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path + "'");
  return parse_key_values(in);
}

namespace detail {

inline double kv_double(const std::string& key, const std::string& v) {
  const auto d = csv::parse_double(v);
  if (!d) throw ValidationError("config key '" + key + "': expected a number, got '" + v + "'");
  return *d;
}

inline std::size_t kv_size(const std::string& key, const std::string& v) {
  const auto i = csv::parse_int(v);
  if (!i || *i < 0) throw ValidationError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(*i);
}

inline bool kv_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError("config key '" + key + "': expected true/false, got '" + v + "'");
}

inline std::vector<double> kv_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  if (csv::trim(v).empty()) return out;
  for (auto cell : csv::split(v)) out.push_back(kv_double(key, std::string(cell)));
  return out;
}

}  // namespace detail

inline const std::set<std::string>& env_config_keys() {
  static const std::set<std::string> keys{
      "lambda_cost", "clip_lo", "clip_hi",  "reset_interval", "shock_interval", "shock_size",
      "epsilon",     "var_window", "gamma_k", "no_clip",      "no_cost",        "no_reset",
      "no_shock",    "reward_mode", "initial_capital", "shock_mode", "shock_seed"};
  return keys;
}

// Overlays recognized keys onto `cfg`; other keys are left to the caller.
inline EnvConfig apply_env_config(EnvConfig cfg, const KeyValues& kv) {
  for (const auto& [k, v] : kv) {
    if (k == "lambda_cost") cfg.lambda_cost = detail::kv_double(k, v);
    else if (k == "clip_lo") cfg.clip_lo = detail::kv_double(k, v);
    else if (k == "clip_hi") cfg.clip_hi = detail::kv_double(k, v);
    else if (k == "reset_interval") cfg.reset_interval = detail::kv_size(k, v);
    else if (k == "shock_interval") cfg.shock_interval = detail::kv_size(k, v);
    else if (k == "shock_size") cfg.shock_size = detail::kv_double(k, v);
    else if (k == "epsilon") cfg.epsilon = detail::kv_double(k, v);
    else if (k == "var_window") cfg.var_window = detail::kv_size(k, v);
    else if (k == "gamma_k") cfg.gamma_k = detail::kv_doubles(k, v);
    else if (k == "no_clip") cfg.no_clip = detail::kv_bool(k, v);
    else if (k == "no_cost") cfg.no_cost = detail::kv_bool(k, v);
    else if (k == "no_reset") cfg.no_reset = detail::kv_bool(k, v);
    else if (k == "no_shock") cfg.no_shock = detail::kv_bool(k, v);
    else if (k == "reward_mode") cfg.reward_mode = parse_reward_mode(v);
    else if (k == "initial_capital") cfg.initial_capital = detail::kv_double(k, v);
    else if (k == "shock_mode") cfg.shock_mode = parse_shock_mode(v);
    else if (k == "shock_seed") cfg.shock_seed = detail::kv_size(k, v);
  }
  cfg.validate();
  return cfg;
}

inline KeyValues env_config_to_kv(const EnvConfig& c) {
  std::string gamma;
  for (std::size_t i = 0; i < c.gamma_k.size(); ++i) gamma += (i ? "," : "") + csv::format(c.gamma_k[i]);
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  return {{"lambda_cost", csv::format(c.lambda_cost)},
          {"clip_lo", csv::format(c.clip_lo)},
          {"clip_hi", csv::format(c.clip_hi)},
          {"reset_interval", std::to_string(c.reset_interval)},
          {"shock_interval", std::to_string(c.shock_interval)},
          {"shock_size", csv::format(c.shock_size)},
          {"epsilon", csv::format(c.epsilon)},
          {"var_window", std::to_string(c.var_window)},
          {"gamma_k", gamma},
          {"no_clip", b(c.no_clip)},
          {"no_cost", b(c.no_cost)},
          {"no_reset", b(c.no_reset)},
          {"no_shock", b(c.no_shock)},
          {"reward_mode", to_string(c.reward_mode)},
          {"initial_capital", csv::format(c.initial_capital)},
          {"shock_mode", to_string(c.shock_mode)},
          {"shock_seed", std::to_string(c.shock_seed)}};
}

inline const std::set<std::string>& train_config_keys() {
  static const std::set<std::string> keys{"total_steps", "learning_rate", "discount_gamma", "batch_episodes",
                                          "delta",       "eta",           "penalty_weight", "sigma"};
  return keys;
}

inline TrainConfig apply_train_config(TrainConfig cfg, const KeyValues& kv) {
  for (const auto& [k, v] : kv) {
    if (k == "total_steps") cfg.total_steps = detail::kv_size(k, v);
    else if (k == "learning_rate") cfg.learning_rate = detail::kv_double(k, v);
    else if (k == "discount_gamma") cfg.gamma = detail::kv_double(k, v);
    else if (k == "batch_episodes") cfg.batch_episodes = detail::kv_size(k, v);
    else if (k == "delta") cfg.delta = detail::kv_double(k, v);
    else if (k == "eta") cfg.eta = detail::kv_double(k, v);
    else if (k == "penalty_weight") cfg.penalty_weight = detail::kv_double(k, v);
    else if (k == "sigma") cfg.sigma = detail::kv_double(k, v);
  }
  cfg.validate();
  return cfg;
}

inline void write_key_values(std::ostream& os, const KeyValues& kv) {
  for (const auto& [k, v] : kv) os << k << " = " << v << '\n';
}

}  // namespace ramp
