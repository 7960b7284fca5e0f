// ramp: regime detection, Monte Carlo simulation, RL allocation and
// statistics from the command line. Exit codes: 0 ok, 2 validation,
// 3 numerical failure, 1 anything else.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ramp/agents.hpp"
#include "ramp/config.hpp"
#include "ramp/dataio.hpp"
#include "ramp/mcsim.hpp"
#include "ramp/metrics.hpp"
#include "ramp/regimes.hpp"
#include "ramp/serialize.hpp"
#include "ramp/stats.hpp"

namespace fs = std::filesystem;
using namespace ramp;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

std::string underscored(std::string name) {
  std::replace(name.begin(), name.end(), '-', '_');
  return name;
}

// Options shared by every subcommand plus a record of input files.
struct Common {
  std::string out = ".";
  std::string config;
  std::uint64_t seed = 42;
  std::size_t threads = 1;
  std::vector<std::string> inputs;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--out", c.out, "Output directory")->capture_default_str();
  sub->add_option("--config", c.config, "Key-value config file (flags override it)");
  sub->add_option("--seed", c.seed, "Master seed")->capture_default_str();
}

void add_threads(CLI::App* sub, Common& c) {
  sub->add_option("--threads", c.threads, "Worker threads (results do not depend on it)")->capture_default_str();
}

// Config file values fill options not given on the command line.
void overlay_config(CLI::App* sub, const std::string& path) {
  if (path.empty()) return;
  for (const auto& [key, value] : load_key_values(path)) {
    if (key == "config" || key == "out" || key == "threads")
      throw ValidationError("config key '" + key + "' is not allowed in a config file");
    CLI::Option* opt = sub->get_option_no_throw("--" + dashed(key));
    if (opt == nullptr) throw ValidationError("unknown config key '" + key + "' for '" + sub->get_name() + "'");
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

// Resolved arguments for the manifest: given values, else defaults.
json resolved_args(CLI::App* sub) {
  json args = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const auto& names = opt->get_lnames();
    if (names.empty()) continue;
    const std::string& name = names.front();
    if (name == "help" || name == "out" || name == "threads" || name == "config") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      args[underscored(name)] = r.size() == 1 && opt->get_items_expected_max() <= 1 ? json(r.front()) : json(r);
    } else {
      args[underscored(name)] = opt->get_default_str();
    }
  }
  return args;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot write '" + path.string() + "'");
  os << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

template <typename F>
void write_stream(const fs::path& path, F&& f) {
  std::ostringstream os;
  f(os);
  write_text(path, os.str());
}

fs::path prepare_out(const Common& c) {
  fs::path out(c.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw ValidationError("cannot create output directory '" + c.out + "'");
  return out;
}

void write_manifest(const fs::path& out, CLI::App* sub, const Common& c) {
  json args = resolved_args(sub);
  json inputs = json::array();
  for (const auto& path : c.inputs)
    inputs.push_back({{"path", path}, {"fnv1a64", hex64(detail::fnv1a(read_file(path)))}});
  json m = {{"schema_version", kSchemaVersion},
            {"command", sub->get_name()},
            {"args", args},
            {"seed", c.seed},
            {"config_hash", hex64(detail::fnv1a(args.dump()))},
            {"inputs", inputs},
            {"versions", {{"ramp", kVersion}, {"json", "nlohmann " + std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                             std::to_string(NLOHMANN_JSON_VERSION_MINOR)},
                          {"cli11", CLI11_VERSION}}}};
  write_json(out / "manifest.json", m);
}

// ---------------------------------------------------------------------------
// Shared loading

struct RegimeData {
  RegimeModel model;
  ReturnPanel panel;  // rows aligned with the feature rows
  RegimePosterior post;
};

RegimeData load_regime_data(Common& c, const std::string& input, const std::string& regimes) {
  if (input.empty()) throw ValidationError("--input is required");
  if (regimes.empty()) throw ValidationError("--regimes is required");
  c.inputs.push_back(input);
  c.inputs.push_back(regimes);
  RegimeData d;
  d.model = regime_model_from_json(read_json_file(regimes));
  const auto full = load_return_panel(input);
  const auto x = compute_features(full, d.model.features.window, d.model.features.spread_pairs);
  d.panel = full.select_years(x.years);
  d.post = posterior(d.model, x);
  return d;
}

Matrix rows_of(const Matrix& m, std::size_t begin, std::size_t end) {
  Matrix out(end - begin, m.cols());
  for (std::size_t t = begin; t < end; ++t) std::copy_n(m.row(t).begin(), m.cols(), out.row(t - begin).begin());
  return out;
}

// Chronological split of the aligned data into training and evaluation.
struct Split {
  std::shared_ptr<const MarketData> train, eval;
  ReturnPanel train_panel;
};

Split split_market(const RegimeData& d, double train_frac) {
  detail::require(train_frac > 0.0 && train_frac < 1.0, "train_frac must lie in (0,1)");
  const std::size_t T = d.panel.periods();
  const auto n_train = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(T)));
  if (n_train < 2 || T - n_train < 2)
    throw ValidationError("train/eval split leaves fewer than 2 periods on one side (T=" + std::to_string(T) + ")");
  Split s;
  s.train_panel = d.panel.slice(0, n_train);
  const std::vector<int> train_labels(d.post.labels.begin(), d.post.labels.begin() + static_cast<std::ptrdiff_t>(n_train));
  // regime statistics come from the training years only
  const auto stats = estimate_regime_stats(s.train_panel.returns, train_labels, d.model.K);
  s.train = MarketData::make(s.train_panel, rows_of(d.post.probs, 0, n_train), stats);
  s.eval = MarketData::make(d.panel.slice(n_train, T), rows_of(d.post.probs, n_train, T), stats);
  return s;
}

// Environment and training options, all kept as strings and validated by
// the config layer so that flags and files share one code path.
struct KvOptions {
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;
  std::map<std::string, CLI::Option*> opts;

  void add(CLI::App* sub, const std::set<std::string>& keys) {
    for (const auto& k : keys) {
      if (k.rfind("no_", 0) == 0) {
        flags[k] = false;
        opts[k] = sub->add_flag("--" + dashed(k), flags[k]);
      } else {
        values[k];
        opts[k] = sub->add_option("--" + dashed(k), values[k]);
      }
    }
  }

  KeyValues given(const std::set<std::string>& keys) const {
    KeyValues kv;
    for (const auto& k : keys) {
      const auto it = opts.find(k);
      if (it == opts.end() || it->second->count() == 0) continue;
      kv[k] = flags.contains(k) ? (flags.at(k) ? "true" : "false") : values.at(k);
    }
    return kv;
  }
};

EnvConfig env_from(const KvOptions& kv, std::uint64_t seed) {
  EnvConfig cfg;
  cfg.shock_seed = derive_seed(seed, "env_shock");
  return apply_env_config(cfg, kv.given(env_config_keys()));
}

TrainConfig train_from(const KvOptions& kv, const Common& c) {
  TrainConfig tc = apply_train_config({}, kv.given(train_config_keys()));
  tc.seed = derive_seed(c.seed, "train");
  tc.threads = c.threads;
  return tc;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  int first_year = 1928;
  std::size_t periods = 96;
};

void cmd_synth(CLI::App* sub, Common& c, const SynthArgs& a) {
  const auto out = prepare_out(c);
  write_stream(out / "synth.csv",
               [&](std::ostream& os) { write_return_panel(os, generate_synthetic_panel(a.first_year, a.periods, c.seed)); });
  write_manifest(out, sub, c);
}

// ---------------------------------------------------------------------------
// detect

struct DetectArgs {
  std::string input;
  std::string model = "hmm";
  std::size_t k = 2;
  std::size_t window = kDefaultFeatureWindow;
  std::size_t max_iter = 200;
  double tol = 1e-6;
  std::vector<int> crisis_years;
};

void cmd_detect(CLI::App* sub, Common& c, const DetectArgs& a) {
  if (a.input.empty()) throw ValidationError("--input is required");
  c.inputs.push_back(a.input);
  const auto panel = load_return_panel(a.input);
  const auto spreads = default_spread_pairs(panel.asset_names);
  const auto x = compute_features(panel, a.window, spreads);
  const FitOptions opt{.K = a.k, .seed = derive_seed(c.seed, "detect"), .max_iter = a.max_iter, .tol = a.tol};
  auto model = fit_regime_model(parse_regime_kind(a.model), x, opt);
  model.features = {a.window, spreads};
  const auto post = posterior(model, x);
  const auto& crisis = a.crisis_years.empty() ? default_crisis_years() : a.crisis_years;
  const auto align = crisis_alignment(post.labels, x.years, crisis, model.K);

  const auto out = prepare_out(c);
  write_json(out / "regimes.json", to_json(model));
  write_stream(out / "posterior.csv", [&](std::ostream& os) { write_posterior(os, x.years, post); });
  write_stream(out / "features.csv", [&](std::ostream& os) { write_features(os, x); });
  write_json(out / "alignment.json", to_json(align));
  write_manifest(out, sub, c);
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string input, regimes, transition;
  std::vector<std::size_t> horizons{10, 20, 30};
  std::size_t paths = 10000;
  std::vector<std::string> strategies{"equal"};
  bool macro = false;
  MacroCoeffs coeffs;
  std::size_t sharpe_candidates = 2000;
};

// Transition matrix from consecutive labels; rows never left stay put.
Matrix empirical_transition(const std::vector<int>& labels, std::size_t K) {
  Matrix counts(K, K);
  for (std::size_t t = 1; t < labels.size(); ++t)
    counts(static_cast<std::size_t>(labels[t - 1]), static_cast<std::size_t>(labels[t])) += 1.0;
  for (std::size_t i = 0; i < K; ++i) {
    double s = 0.0;
    for (double v : counts.row(i)) s += v;
    if (s == 0.0) counts(i, i) = 1.0;
  }
  return counts;
}

Matrix load_matrix_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    std::vector<double> row;
    std::size_t col = 0;
    for (auto cell : csv::split(line)) {
      ++col;
      const auto v = csv::parse_double(cell);
      if (!v) throw ParseError("expected a number in '" + path + "'", line_no, col);
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  for (const auto& r : rows)
    if (r.size() != rows.size()) throw ValidationError("transition file '" + path + "' is not square");
  if (rows.empty()) throw ValidationError("transition file '" + path + "' is empty");
  return Matrix::from_rows(rows);
}

PortfolioWeights load_weights_file(const std::string& path, const ReturnPanel& panel) {
  const auto kv = load_key_values(path);
  PortfolioWeights w(panel.assets(), 0.0);
  for (const auto& [name, value] : kv) w[panel.asset_index(name)] = detail::kv_double(name, value);
  validate_weights(w, 1e-9);
  return w;
}

std::string strategy_name(const std::string& choice) {
  if (choice == "equal" || choice == "sharpe") return choice;
  return fs::path(choice).stem().string();
}

void cmd_simulate(CLI::App* sub, Common& c, const SimulateArgs& a) {
  const auto d = load_regime_data(c, a.input, a.regimes);
  const std::size_t K = d.model.K, N = d.panel.assets();
  if (a.horizons.empty()) throw ValidationError("at least one --horizon is required");

  std::optional<MacroSignalColumns> macro_cols;
  if (a.macro) {
    const auto cols = MacroColumns::detect(d.panel.asset_names);
    const auto missing = cols.missing();
    if (!missing.empty()) {
      std::string msg = "--macro needs spread columns; missing:";
      for (const auto& m : missing) msg += " " + m + ";";
      throw ValidationError(msg);
    }
    macro_cols = MacroSignalColumns{d.panel.asset_index(*cols.equity), d.panel.asset_index(*cols.tbill),
                                    d.panel.asset_index(*cols.corporate), d.panel.asset_index(*cols.treasury)};
  }

  // Order regimes by equal-weight return variance so index 0 is the calmest.
  const auto ew = equal_weights(N);
  std::vector<double> var(K, 0.0);
  {
    std::vector<std::vector<double>> by(K);
    for (std::size_t t = 0; t < d.panel.periods(); ++t)
      by[static_cast<std::size_t>(d.post.labels[t])].push_back(dot(d.panel.returns.row(t), ew));
    for (std::size_t k = 0; k < K; ++k)
      if (by[k].size() >= 2) var[k] = detail::sample_std(by[k]) * detail::sample_std(by[k]);
  }
  std::vector<std::size_t> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return var[x] < var[y]; });
  std::vector<int> rank(K);
  for (std::size_t r = 0; r < K; ++r) rank[order[r]] = static_cast<int>(r);
  std::vector<int> labels(d.post.labels.size());
  for (std::size_t t = 0; t < labels.size(); ++t) labels[t] = rank[static_cast<std::size_t>(d.post.labels[t])];

  Matrix P(K, K);
  if (!a.transition.empty()) {
    c.inputs.push_back(a.transition);
    P = load_matrix_csv(a.transition);
    if (P.rows() != K) throw ValidationError("transition file has " + std::to_string(P.rows()) + " rows for K=" + std::to_string(K));
  } else if (d.model.kind == RegimeKind::hmm) {
    for (std::size_t i = 0; i < K; ++i)
      for (std::size_t j = 0; j < K; ++j) P(i, j) = d.model.transition(order[i], order[j]);
  } else {
    P = empirical_transition(labels, K);
  }
  const auto transition = TransitionMatrix::normalized(P);

  std::vector<double> initial(K, 0.0);
  for (int l : labels) initial[static_cast<std::size_t>(l)] += 1.0 / static_cast<double>(labels.size());

  const auto pools = RegimeReturnPools::from_labels(d.panel.returns, labels, K);

  std::vector<std::pair<std::string, PortfolioWeights>> strategies;
  for (const auto& choice : a.strategies) {
    PortfolioWeights w;
    if (choice == "equal") {
      w = ew;
    } else if (choice == "sharpe") {
      w = sharpe_optimal_static(d.panel.returns, a.sharpe_candidates, derive_seed(c.seed, "sharpe_static"));
    } else {
      c.inputs.push_back(choice);
      w = load_weights_file(choice, d.panel);
    }
    strategies.emplace_back(strategy_name(choice), std::move(w));
  }

  const auto out = prepare_out(c);
  json horizons = json::array();
  for (std::size_t h : a.horizons) {
    json block = {{"horizon", h}, {"strategies", json::array()}};
    std::vector<std::vector<double>> terminal;
    for (const auto& [name, w] : strategies) {
      McConfig cfg;
      cfg.horizon_years = h;
      cfg.n_paths = a.paths;
      cfg.transition = transition;
      cfg.initial_regime = initial;
      cfg.pools = pools;
      cfg.strategy_weights = w;
      // one stream per horizon; strategies share draws (common random numbers)
      cfg.seed = derive_seed(c.seed, "simulate", h);
      if (a.macro) {
        cfg.macro_coeffs = a.coeffs;
        cfg.macro_columns = macro_cols;
      }
      cfg.threads = c.threads;
      const auto s = run_monte_carlo(cfg);
      block["strategies"].push_back({{"name", name}, {"weights", w}, {"summary", to_json(s)}});
      terminal.push_back(s.terminal_returns);
    }
    horizons.push_back(block);
    write_stream(out / ("terminal_h" + std::to_string(h) + ".csv"), [&](std::ostream& os) {
      std::vector<std::string> header{"path"};
      for (const auto& s : strategies) header.push_back(s.first);
      csv::write_row(os, header);
      for (std::size_t p = 0; p < a.paths; ++p) {
        std::vector<std::string> row{std::to_string(p)};
        for (const auto& col : terminal) row.push_back(csv::format(col[p]));
        csv::write_row(os, row);
      }
    });
  }
  json regimes = json::array();
  for (std::size_t r = 0; r < K; ++r)
    regimes.push_back({{"index", r}, {"model_regime", order[r]}, {"ew_variance", var[order[r]]},
                       {"initial_prob", initial[r]}, {"pool_size", pools.pools[r].rows()}});
  write_json(out / "mc_summary.json", {{"schema_version", kSchemaVersion},
                                       {"mode", a.macro ? "macro" : "regime_chain"},
                                       {"transition", detail::matrix_json(transition.matrix())},
                                       {"regimes", regimes},
                                       {"horizons", horizons}});
  write_manifest(out, sub, c);
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string input, regimes;
  std::string algo = "reinforce";
  double train_frac = 0.7;
  CemConfig cem;
};

void cmd_train(CLI::App* sub, Common& c, const TrainArgs& a, const KvOptions& kv) {
  const auto d = load_regime_data(c, a.input, a.regimes);
  const auto split = split_market(d, a.train_frac);
  const auto env_cfg = env_from(kv, c.seed);
  const auto tc = train_from(kv, c);
  const EnvFactory factory = [&] { return Environment(env_cfg, split.train); };
  TrainResult result;
  if (a.algo == "reinforce") {
    result = reinforce_train(factory, tc);
  } else if (a.algo == "cem") {
    CemConfig cc = a.cem;
    cc.delta = tc.delta;
    cc.eta = tc.eta;
    cc.penalty_weight = tc.penalty_weight;
    cc.seed = derive_seed(c.seed, "cem");
    cc.threads = c.threads;
    result = cem_train(factory, cc, tc.sigma);
  } else {
    throw ValidationError("unknown --algo '" + a.algo + "' (expected reinforce or cem)");
  }
  const auto out = prepare_out(c);
  auto pj = to_json(result.policy, d.panel.asset_names, fs::path(a.regimes).filename().string());
  pj["algo"] = a.algo;
  pj["env"] = to_json(env_cfg);
  pj["train"] = to_json(tc);
  pj["train_years"] = {split.train_panel.years.front(), split.train_panel.years.back()};
  write_json(out / "policy.json", pj);
  write_stream(out / "progress.csv", [&](std::ostream& os) { write_progress_csv(os, result.progress); });
  write_manifest(out, sub, c);
}

// ---------------------------------------------------------------------------
// backtest

struct BacktestArgs {
  std::string input, regimes;
  std::string policy = "equal_weight";
  double train_frac = 0.7;
  bool full = false;
  std::size_t cagr_window = kDefaultCagrWindow;
  std::size_t sharpe_candidates = 2000;
  std::vector<int> crisis_years;
};

void cmd_backtest(CLI::App* sub, Common& c, const BacktestArgs& a, const KvOptions& kv) {
  const auto d = load_regime_data(c, a.input, a.regimes);
  const auto env_cfg = env_from(kv, c.seed);
  std::shared_ptr<const MarketData> eval;
  Matrix fit_returns;
  if (a.full) {
    eval = MarketData::make(d.panel, d.post.probs, estimate_regime_stats(d.panel.returns, d.post.labels, d.model.K));
    fit_returns = d.panel.returns;
  } else {
    const auto split = split_market(d, a.train_frac);
    eval = split.eval;
    fit_returns = split.train_panel.returns;
  }
  Allocator alloc;
  if (a.policy == "equal_weight") {
    const auto w = equal_weights(eval->assets());
    alloc = [w](const Observation&) { return w; };
  } else if (a.policy == "sharpe") {
    const auto w = sharpe_optimal_static(fit_returns, a.sharpe_candidates, derive_seed(c.seed, "sharpe_static"));
    alloc = [w](const Observation&) { return w; };
  } else {
    c.inputs.push_back(a.policy);
    const auto p = policy_from_json(read_json_file(a.policy));
    if (p.n_assets != eval->assets() || p.n_regimes != eval->regimes())
      throw ValidationError("policy shape does not match the data");
    alloc = as_allocator(p);
  }
  Environment env(env_cfg, eval);
  const auto rep = backtest(alloc, env, a.cagr_window);
  const auto out = prepare_out(c);
  auto rj = to_json(rep);
  rj["schema_version"] = kSchemaVersion;
  rj["policy"] = a.policy == "equal_weight" || a.policy == "sharpe" ? a.policy : fs::path(a.policy).filename().string();
  rj["env"] = to_json(env_cfg);
  write_json(out / "report.json", rj);
  write_stream(out / "wealth.csv", [&](std::ostream& os) { write_wealth_csv(os, rep); });
  write_stream(out / "rolling_cagr.csv", [&](std::ostream& os) { write_rolling_cagr_csv(os, rep.rolling_cagr); });
  write_stream(out / "trace.csv", [&](std::ostream& os) { write_trace(os, eval->asset_names, rep.trace); });
  const auto& crisis = a.crisis_years.empty() ? default_crisis_years() : a.crisis_years;
  std::vector<int> in_range;
  for (int y : crisis)
    if (y >= rep.years.front() && y <= rep.years.back()) in_range.push_back(y);
  write_stream(out / "crisis_overlay.csv", [&](std::ostream& os) { write_crisis_overlay_csv(os, in_range); });
  write_manifest(out, sub, c);
}

// ---------------------------------------------------------------------------
// ablate

struct AblateArgs {
  std::string input, regimes;
  std::vector<std::string> variants{"noclip", "nocost", "noreset"};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double train_frac = 0.7;
};

void cmd_ablate(CLI::App* sub, Common& c, const AblateArgs& a, const KvOptions& kv) {
  const auto d = load_regime_data(c, a.input, a.regimes);
  const auto split = split_market(d, a.train_frac);
  const auto env_cfg = env_from(kv, c.seed);
  auto tc = train_from(kv, c);
  std::vector<AblationVariant> variants;
  for (const auto& v : a.variants) variants.push_back(parse_ablation_variant(v));
  std::vector<std::uint64_t> seeds;
  for (auto s : a.seeds) seeds.push_back(derive_seed(c.seed, "ablate", s));
  const auto results = run_ablations(
      env_cfg, tc, variants, seeds, [&](const EnvConfig& e) { return Environment(e, split.train); },
      [&](const EnvConfig& e) { return Environment(e, split.eval); });
  auto j = to_json(results);
  // runs carry derived seeds; keep the labels they came from
  j["seed_labels"] = a.seeds;
  const auto out = prepare_out(c);
  write_json(out / "ablation.json", j);
  write_manifest(out, sub, c);
}

// ---------------------------------------------------------------------------
// stats

struct StatsArgs {
  std::string input, regimes, asset;
  StatsOptions opt;
};

void cmd_stats(CLI::App* sub, Common& c, const StatsArgs& a) {
  const auto d = load_regime_data(c, a.input, a.regimes);
  std::vector<double> returns(d.panel.periods());
  if (a.asset.empty()) {
    const auto w = equal_weights(d.panel.assets());
    for (std::size_t t = 0; t < returns.size(); ++t) returns[t] = dot(d.panel.returns.row(t), w);
  } else {
    const auto i = d.panel.asset_index(a.asset);
    for (std::size_t t = 0; t < returns.size(); ++t) returns[t] = d.panel.returns(t, i);
  }
  const auto rep = regime_stats_report(d.post.labels, returns, a.opt);
  auto j = to_json(rep);
  j["schema_version"] = kSchemaVersion;
  j["series"] = a.asset.empty() ? "equal_weight" : a.asset;
  const auto out = prepare_out(c);
  write_json(out / "stats.json", j);
  write_manifest(out, sub, c);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regime-aware allocation toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common common;

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synth", "Write a synthetic annual return panel");
  add_common(s_synth, common);
  s_synth->add_option("--first-year", synth.first_year)->capture_default_str();
  s_synth->add_option("--periods", synth.periods)->capture_default_str();

  DetectArgs det;
  auto* s_detect = app.add_subcommand("detect", "Fit a regime model and write posteriors");
  add_common(s_detect, common);
  s_detect->add_option("--input", det.input, "Return panel CSV");
  s_detect->add_option("--model", det.model, "kmeans, gmm or hmm")->capture_default_str();
  s_detect->add_option("--k", det.k, "Number of regimes")->capture_default_str();
  s_detect->add_option("--window", det.window, "Feature window in periods")->capture_default_str();
  s_detect->add_option("--max-iter", det.max_iter)->capture_default_str();
  s_detect->add_option("--tol", det.tol)->capture_default_str();
  s_detect->add_option("--crisis-years", det.crisis_years, "Crisis years for alignment")->delimiter(',');

  SimulateArgs sim;
  auto* s_sim = app.add_subcommand("simulate", "Monte Carlo wealth simulation over regime paths");
  add_common(s_sim, common);
  add_threads(s_sim, common);
  s_sim->add_option("--input", sim.input, "Return panel CSV");
  s_sim->add_option("--regimes", sim.regimes, "regimes.json from detect");
  s_sim->add_option("--horizon", sim.horizons, "Horizon in years (repeatable)")->delimiter(',')->capture_default_str();
  s_sim->add_option("--paths", sim.paths)->capture_default_str();
  s_sim->add_option("--strategy", sim.strategies, "equal, sharpe, or a weights file (repeatable)")
      ->delimiter(',')
      ->capture_default_str();
  s_sim->add_option("--transition", sim.transition, "CSV transition matrix in variance order");
  s_sim->add_flag("--macro", sim.macro, "Macro-adjusted transitions (2 regimes)");
  s_sim->add_option("--macro-a0", sim.coeffs.a0)->capture_default_str();
  s_sim->add_option("--macro-a1", sim.coeffs.a1)->capture_default_str();
  s_sim->add_option("--macro-a2", sim.coeffs.a2)->capture_default_str();
  s_sim->add_option("--sharpe-candidates", sim.sharpe_candidates)->capture_default_str();

  TrainArgs tr;
  KvOptions tr_kv;
  auto* s_train = app.add_subcommand("train", "Train an allocation policy");
  add_common(s_train, common);
  add_threads(s_train, common);
  s_train->add_option("--input", tr.input, "Return panel CSV");
  s_train->add_option("--regimes", tr.regimes, "regimes.json from detect");
  s_train->add_option("--algo", tr.algo, "reinforce or cem")->capture_default_str();
  s_train->add_option("--train-frac", tr.train_frac)->capture_default_str();
  s_train->add_option("--cem-iterations", tr.cem.iterations)->capture_default_str();
  s_train->add_option("--cem-population", tr.cem.population)->capture_default_str();
  s_train->add_option("--cem-elite-frac", tr.cem.elite_frac)->capture_default_str();
  s_train->add_option("--cem-init-std", tr.cem.init_std)->capture_default_str();
  s_train->add_option("--cem-min-std", tr.cem.min_std)->capture_default_str();
  tr_kv.add(s_train, env_config_keys());
  tr_kv.add(s_train, train_config_keys());

  BacktestArgs bt;
  KvOptions bt_kv;
  auto* s_bt = app.add_subcommand("backtest", "Evaluate a policy on held-out years");
  add_common(s_bt, common);
  s_bt->add_option("--input", bt.input, "Return panel CSV");
  s_bt->add_option("--regimes", bt.regimes, "regimes.json from detect");
  s_bt->add_option("--policy", bt.policy, "equal_weight, sharpe, or a policy.json path")->capture_default_str();
  s_bt->add_option("--train-frac", bt.train_frac)->capture_default_str();
  s_bt->add_flag("--full", bt.full, "Evaluate on every aligned year instead of the held-out part");
  s_bt->add_option("--cagr-window", bt.cagr_window)->capture_default_str();
  s_bt->add_option("--sharpe-candidates", bt.sharpe_candidates)->capture_default_str();
  s_bt->add_option("--crisis-years", bt.crisis_years)->delimiter(',');
  bt_kv.add(s_bt, env_config_keys());

  AblateArgs ab;
  KvOptions ab_kv;
  auto* s_ab = app.add_subcommand("ablate", "Train and evaluate reward-mechanism ablations");
  add_common(s_ab, common);
  add_threads(s_ab, common);
  s_ab->add_option("--input", ab.input, "Return panel CSV");
  s_ab->add_option("--regimes", ab.regimes, "regimes.json from detect");
  s_ab->add_option("--variants", ab.variants, "noclip,nocost,noreset")->delimiter(',')->capture_default_str();
  s_ab->add_option("--seeds", ab.seeds, "Seed labels")->delimiter(',')->capture_default_str();
  s_ab->add_option("--train-frac", ab.train_frac)->capture_default_str();
  ab_kv.add(s_ab, env_config_keys());
  ab_kv.add(s_ab, train_config_keys());

  StatsArgs st;
  auto* s_stats = app.add_subcommand("stats", "Regime return tests, mutual information and utilities");
  add_common(s_stats, common);
  s_stats->add_option("--input", st.input, "Return panel CSV");
  s_stats->add_option("--regimes", st.regimes, "regimes.json from detect");
  s_stats->add_option("--asset", st.asset, "Asset column (default: equal-weight portfolio)");
  s_stats->add_option("--bins", st.opt.bins)->capture_default_str();
  s_stats->add_option("--crra-gamma", st.opt.crra_gamma)->capture_default_str();
  s_stats->add_option("--cara-alpha", st.opt.cara_alpha)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    overlay_config(sub, common.config);
    if (!common.config.empty()) common.inputs.push_back(common.config);
    if (sub == s_synth) {
      cmd_synth(sub, common, synth);
    } else if (sub == s_detect) {
      cmd_detect(sub, common, det);
    } else if (sub == s_sim) {
      cmd_simulate(sub, common, sim);
    } else if (sub == s_train) {
      cmd_train(sub, common, tr, tr_kv);
    } else if (sub == s_bt) {
      cmd_backtest(sub, common, bt, bt_kv);
    } else if (sub == s_ab) {
      cmd_ablate(sub, common, ab, ab_kv);
    } else {
      cmd_stats(sub, common, st);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
