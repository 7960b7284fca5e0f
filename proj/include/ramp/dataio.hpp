#pragma once

// Annual return panels and the regime-detection feature set.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ramp/csv.hpp"
#include "ramp/error.hpp"
#include "ramp/matrix.hpp"
#include "ramp/rng.hpp"

namespace ramp {

// T x N annual returns as decimal fractions (0.07 means 7%).
struct ReturnPanel {
  std::vector<int> years;
  std::vector<std::string> asset_names;
  Matrix returns;

  std::size_t periods() const noexcept { return years.size(); }
  std::size_t assets() const noexcept { return asset_names.size(); }

  std::size_t asset_index(std::string_view name) const {
    const auto it = std::find(asset_names.begin(), asset_names.end(), name);
    if (it == asset_names.end())
      throw ValidationError("unknown asset '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - asset_names.begin());
  }

  bool has_asset(std::string_view name) const {
    return std::find(asset_names.begin(), asset_names.end(), name) != asset_names.end();
  }

  // Rows whose year appears in `keep`, in panel order.
  ReturnPanel select_years(const std::vector<int>& keep) const {
    ReturnPanel out;
    out.asset_names = asset_names;
    std::vector<std::size_t> idx;
    for (int y : keep) {
      const auto it = std::lower_bound(years.begin(), years.end(), y);
      if (it == years.end() || *it != y)
        throw ValidationError("year " + std::to_string(y) + " not in panel");
      idx.push_back(static_cast<std::size_t>(it - years.begin()));
    }
    out.returns = Matrix(idx.size(), assets());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.years.push_back(years[idx[i]]);
      std::copy_n(returns.row(idx[i]).begin(), assets(), out.returns.row(i).begin());
    }
    return out;
  }

  ReturnPanel slice(std::size_t begin, std::size_t end) const {
    detail::require(begin <= end && end <= periods(), "ReturnPanel::slice out of range");
    return select_years({years.begin() + static_cast<std::ptrdiff_t>(begin),
                         years.begin() + static_cast<std::ptrdiff_t>(end)});
  }
};

struct FeatureMatrix {
  std::vector<int> years;
  std::vector<std::string> feature_names;
  Matrix values;

  std::size_t rows() const noexcept { return values.rows(); }
  std::size_t cols() const noexcept { return values.cols(); }
};

using SpreadPair = std::pair<std::string, std::string>;

// Checks the ReturnPanel invariants; sorts rows by year.
inline void validate_and_sort(ReturnPanel& panel) {
  const std::size_t n = panel.assets();
  detail::require(n >= 1, "return panel has no asset columns");
  detail::require(panel.returns.rows() == panel.years.size() && panel.returns.cols() == n,
                  "return panel matrix shape does not match years/assets");
  std::set<std::string> names(panel.asset_names.begin(), panel.asset_names.end());
  detail::require(names.size() == n, "duplicate asset column name");
  for (std::size_t t = 0; t < panel.periods(); ++t)
    for (std::size_t i = 0; i < n; ++i) {
      const double r = panel.returns(t, i);
      if (!std::isfinite(r) || r <= -1.0)
        throw ValidationError("return " + csv::format(r) + " for " + panel.asset_names[i] +
                              " in " + std::to_string(panel.years[t]) +
                              " must be finite and > -1");
    }

  std::vector<std::size_t> order(panel.periods());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return panel.years[a] < panel.years[b]; });
  ReturnPanel sorted;
  sorted.asset_names = panel.asset_names;
  sorted.returns = Matrix(order.size(), n);
  for (std::size_t k = 0; k < order.size(); ++k) {
    sorted.years.push_back(panel.years[order[k]]);
    std::copy_n(panel.returns.row(order[k]).begin(), n, sorted.returns.row(k).begin());
    if (k > 0 && sorted.years[k] == sorted.years[k - 1])
      throw ValidationError("duplicate year " + std::to_string(sorted.years[k]));
  }
  panel = std::move(sorted);
}

inline ReturnPanel parse_return_panel(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    std::string_view view = line;
    if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
    for (auto cell : csv::split(view)) header.emplace_back(cell);
    break;
  }
  if (header.empty()) throw ParseError("empty return panel", line_no, 1);
  std::string first = header.front();
  std::transform(first.begin(), first.end(), first.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (first != "year") throw ParseError("first column must be 'year'", line_no, 1);
  if (header.size() < 2) throw ParseError("no asset columns", line_no, 2);

  ReturnPanel panel;
  panel.asset_names.assign(header.begin() + 1, header.end());
  for (std::size_t c = 0; c < panel.asset_names.size(); ++c)
    if (panel.asset_names[c].empty()) throw ParseError("empty asset name", line_no, c + 2);

  const std::size_t n = panel.asset_names.size();
  std::vector<double> flat;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto cells = csv::split(line);
    if (cells.size() != n + 1)
      throw ValidationError("ragged row at line " + std::to_string(line_no) + ": expected " +
                            std::to_string(n + 1) + " cells, found " +
                            std::to_string(cells.size()));
    const auto year = csv::parse_int(cells[0]);
    if (!year) throw ParseError("malformed year '" + std::string(cells[0]) + "'", line_no, 1);
    panel.years.push_back(static_cast<int>(*year));
    for (std::size_t c = 1; c <= n; ++c) {
      const auto v = csv::parse_double(cells[c]);
      if (!v) throw ParseError("malformed return '" + std::string(cells[c]) + "'", line_no, c + 1);
      flat.push_back(*v);
    }
  }
  panel.returns = Matrix(panel.years.size(), n);
  std::copy(flat.begin(), flat.end(), panel.returns.data().begin());
  validate_and_sort(panel);
  return panel;
}

inline ReturnPanel load_return_panel(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open return panel '" + path + "'");
  return parse_return_panel(in);
}

inline void write_return_panel(std::ostream& os, const ReturnPanel& panel) {
  std::vector<std::string> header{"year"};
  header.insert(header.end(), panel.asset_names.begin(), panel.asset_names.end());
  csv::write_row(os, header);
  for (std::size_t t = 0; t < panel.periods(); ++t) {
    std::vector<std::string> row{std::to_string(panel.years[t])};
    for (double v : panel.returns.row(t)) row.push_back(csv::format(v));
    csv::write_row(os, row);
  }
}

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline std::optional<std::string> find_column(const std::vector<std::string>& names,
                                              std::initializer_list<std::string_view> keys) {
  for (auto key : keys)
    for (const auto& name : names)
      if (lower(name).find(key) != std::string::npos) return name;
  return std::nullopt;
}

}  // namespace detail

// Column roles used for macro signals and default spreads. Matched by
// case-insensitive substring on the asset names.
struct MacroColumns {
  std::optional<std::string> equity, tbill, corporate, treasury;

  static MacroColumns detect(const std::vector<std::string>& names) {
    MacroColumns m;
    m.equity = detail::find_column(names, {"sp500", "s&p", "equity", "stock"});
    m.tbill = detail::find_column(names, {"tbill", "t-bill", "t_bill", "bill"});
    m.corporate = detail::find_column(names, {"baa", "corp"});
    m.treasury = detail::find_column(names, {"t10y", "tbond", "t-bond", "treasury", "10y"});
    return m;
  }

  bool has_risk_premium() const { return equity && tbill; }
  bool has_yield_spread() const { return corporate && treasury; }

  std::vector<std::string> missing() const {
    std::vector<std::string> out;
    if (!equity) out.emplace_back("equity (e.g. SP500)");
    if (!tbill) out.emplace_back("t-bill (e.g. TBill)");
    if (!corporate) out.emplace_back("corporate bond (e.g. Baa)");
    if (!treasury) out.emplace_back("long treasury (e.g. T10Y)");
    return out;
  }
};

// (corporate, long treasury) and (equity, t-bill) when present.
inline std::vector<SpreadPair> default_spread_pairs(const std::vector<std::string>& names) {
  const auto cols = MacroColumns::detect(names);
  std::vector<SpreadPair> pairs;
  if (cols.has_yield_spread()) pairs.emplace_back(*cols.corporate, *cols.treasury);
  if (cols.has_risk_premium()) pairs.emplace_back(*cols.equity, *cols.tbill);
  return pairs;
}

inline constexpr std::size_t kDefaultFeatureWindow = 5;

// Rolling features; row t uses returns at indices t-window+1..t only.
// Columns: vol_<asset>..., dd_<asset>..., spread_<a>_<b>..., mean_<asset>...
inline FeatureMatrix compute_features(const ReturnPanel& panel, std::size_t window,
                                      const std::vector<SpreadPair>& spread_pairs) {
  const std::size_t T = panel.periods();
  const std::size_t N = panel.assets();
  detail::require(window >= 2, "feature window must be >= 2");
  detail::require(window <= T, "feature window " + std::to_string(window) +
                                   " exceeds panel length " + std::to_string(T));
  std::vector<std::pair<std::size_t, std::size_t>> spreads;
  for (const auto& [a, b] : spread_pairs) spreads.emplace_back(panel.asset_index(a), panel.asset_index(b));

  FeatureMatrix fm;
  for (const auto& a : panel.asset_names) fm.feature_names.push_back("vol_" + a);
  for (const auto& a : panel.asset_names) fm.feature_names.push_back("dd_" + a);
  for (const auto& [a, b] : spread_pairs) fm.feature_names.push_back("spread_" + a + "_" + b);
  for (const auto& a : panel.asset_names) fm.feature_names.push_back("mean_" + a);

  const std::size_t rows = T - window + 1;
  fm.values = Matrix(rows, fm.feature_names.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t t = r + window - 1;
    fm.years.push_back(panel.years[t]);
    auto out = fm.values.row(r);
    std::size_t col = 0;
    std::vector<double> means(N), dds(N), vols(N);
    for (std::size_t i = 0; i < N; ++i) {
      double sum = 0.0;
      for (std::size_t s = t + 1 - window; s <= t; ++s) sum += panel.returns(s, i);
      const double mean = sum / static_cast<double>(window);
      double ss = 0.0;
      for (std::size_t s = t + 1 - window; s <= t; ++s) {
        const double d = panel.returns(s, i) - mean;
        ss += d * d;
      }
      means[i] = mean;
      vols[i] = std::sqrt(ss / static_cast<double>(window - 1));

      // drawdown of wealth compounded from 1.0 at the window start, at its end
      double wealth = 1.0, peak = 1.0;
      for (std::size_t s = t + 1 - window; s <= t; ++s) {
        wealth *= 1.0 + panel.returns(s, i);
        peak = std::max(peak, wealth);
      }
      dds[i] = wealth / peak - 1.0;
    }
    for (double v : vols) out[col++] = v;
    for (double v : dds) out[col++] = v;
    for (const auto& [a, b] : spreads) out[col++] = panel.returns(t, a) - panel.returns(t, b);
    for (double v : means) out[col++] = v;
  }
  return fm;
}

inline void write_features(std::ostream& os, const FeatureMatrix& fm) {
  std::vector<std::string> header{"year"};
  header.insert(header.end(), fm.feature_names.begin(), fm.feature_names.end());
  csv::write_row(os, header);
  for (std::size_t t = 0; t < fm.rows(); ++t) {
    std::vector<std::string> row{std::to_string(fm.years[t])};
    for (double v : fm.values.row(t)) row.push_back(csv::format(v));
    csv::write_row(os, row);
  }
}

// Synthetic annual panel from a three-regime chain (calm, neutral, crisis)
// with a common market factor. Used for fixtures since no real dataset ships.
inline ReturnPanel generate_synthetic_panel(int first_year, std::size_t periods,
                                            std::uint64_t seed) {
  struct AssetSpec {
    const char* name;
    double mean[3];
    double vol[3];
    double beta;
  };
  static constexpr AssetSpec kAssets[] = {
      {"SP500", {0.14, 0.07, -0.18}, {0.12, 0.16, 0.22}, 1.0},
      {"SmallCap", {0.17, 0.08, -0.24}, {0.18, 0.22, 0.30}, 1.3},
      {"Baa", {0.07, 0.05, 0.00}, {0.05, 0.07, 0.10}, 0.3},
      {"T10Y", {0.04, 0.05, 0.08}, {0.06, 0.07, 0.09}, -0.2},
      {"TBill", {0.03, 0.035, 0.02}, {0.01, 0.01, 0.01}, 0.0},
      {"Gold", {0.03, 0.05, 0.12}, {0.14, 0.18, 0.22}, -0.1},
  };
  static constexpr double kTransition[3][3] = {
      {0.85, 0.12, 0.03}, {0.20, 0.70, 0.10}, {0.30, 0.30, 0.40}};

  auto rng = make_stream(seed, "synthetic_panel");
  std::normal_distribution<double> normal(0.0, 1.0);
  ReturnPanel panel;
  for (const auto& a : kAssets) panel.asset_names.emplace_back(a.name);
  panel.returns = Matrix(periods, std::size(kAssets));
  std::size_t regime = 0;
  for (std::size_t t = 0; t < periods; ++t) {
    panel.years.push_back(first_year + static_cast<int>(t));
    const double market = normal(rng);
    for (std::size_t i = 0; i < std::size(kAssets); ++i) {
      const auto& a = kAssets[i];
      const double loading = std::clamp(std::abs(a.beta), 0.0, 0.9);
      const double shock = (a.beta >= 0 ? 1.0 : -1.0) * loading * market +
                           std::sqrt(1.0 - loading * loading) * normal(rng);
      const double r = a.mean[regime] + a.vol[regime] * shock;
      panel.returns(t, i) = std::max(r, -0.95);
    }
    const std::span<const double> row(kTransition[regime], 3);
    regime = sample_categorical(row, rng);
  }
  return panel;
}

}  // namespace ramp
