#pragma once

// Statistical and economic checks of regime signals: one-way ANOVA, the
// two-group mean test, mutual information, and CRRA/CARA utilities.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "ramp/error.hpp"

namespace ramp {

namespace detail {

// Modified Lentz evaluation of the incomplete beta continued fraction.
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) return h;
  }
  throw NumericalError("incomplete beta continued fraction did not converge");
}

}  // namespace detail

// I_x(a, b).
inline double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("incomplete beta requires a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw ValidationError("incomplete beta requires x in [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // the fraction converges fast for x below the mean; use symmetry otherwise
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

// Upper tail P(F > f) of the F(d1, d2) distribution.
inline double f_survival(double f, double d1, double d2) {
  if (f <= 0.0) return 1.0;
  return regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

// Two-sided P(|T| > |t|) for Student's t with df degrees of freedom.
inline double t_two_sided_p(double t, double df) {
  return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

struct AnovaResult {
  double f = 0.0;
  double p = 1.0;
  std::size_t df_between = 0;
  std::size_t df_within = 0;
};

inline AnovaResult anova_f(const std::vector<std::vector<double>>& groups) {
  detail::require(groups.size() >= 2, "ANOVA needs at least two groups");
  std::size_t n = 0;
  double grand = 0.0;
  for (const auto& g : groups) {
    detail::require(g.size() >= 2, "each ANOVA group needs at least two values");
    n += g.size();
    grand += std::accumulate(g.begin(), g.end(), 0.0);
  }
  detail::require(n > groups.size(), "ANOVA needs more observations than groups");
  grand /= static_cast<double>(n);
  double ssb = 0.0, ssw = 0.0;
  for (const auto& g : groups) {
    const double m = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
    ssb += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double v : g) ssw += (v - m) * (v - m);
  }
  AnovaResult r;
  r.df_between = groups.size() - 1;
  r.df_within = n - groups.size();
  if (ssw == 0.0) {
    if (ssb == 0.0) throw NumericalError("ANOVA undefined: no variance within or between groups");
    r.f = std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  r.f = (ssb / static_cast<double>(r.df_between)) / (ssw / static_cast<double>(r.df_within));
  r.p = f_survival(r.f, static_cast<double>(r.df_between), static_cast<double>(r.df_within));
  return r;
}

struct PairwiseResult {
  double diff = 0.0;  // mean_a - mean_b
  double q = 0.0;     // studentized range statistic, sqrt(2) |t|
  double p = 1.0;
};

// Tukey HSD restricted to two groups: q = sqrt(2)|t| with the pooled-variance
// t statistic, whose p-value coincides with the one-way ANOVA p.
inline PairwiseResult pairwise_mean_test(const std::vector<double>& a, const std::vector<double>& b) {
  detail::require(a.size() >= 2 && b.size() >= 2, "pairwise test needs at least two values per group");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / na;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / nb;
  double ss = 0.0;
  for (double v : a) ss += (v - ma) * (v - ma);
  for (double v : b) ss += (v - mb) * (v - mb);
  const double df = na + nb - 2.0;
  PairwiseResult r;
  r.diff = ma - mb;
  if (ss == 0.0) {
    if (r.diff == 0.0) throw NumericalError("pairwise test undefined: no variance within or between groups");
    r.q = std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  const double se = std::sqrt(ss / df * (1.0 / na + 1.0 / nb));
  const double t = r.diff / se;
  r.q = std::sqrt(2.0) * std::abs(t);
  r.p = t_two_sided_p(t, df);
  return r;
}

struct MutualInfoResult {
  double nats = 0.0;
  std::size_t bins_requested = 0;
  std::size_t bins_used = 0;
};

// Equal-frequency bin index per value; ties share a bin. Depends only on ranks.
inline std::vector<std::size_t> quantile_bins(const std::vector<double>& values, std::size_t bins) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  std::vector<std::size_t> out(n);
  std::size_t first = 0;  // sorted position of the first copy of the current value
  for (std::size_t pos = 0; pos < n; ++pos) {
    if (pos > 0 && values[order[pos]] != values[order[pos - 1]]) first = pos;
    out[order[pos]] = first * bins / n;
  }
  return out;
}

inline MutualInfoResult mutual_information(const std::vector<int>& labels, const std::vector<double>& returns,
                                           std::size_t bins = 5) {
  detail::require(labels.size() == returns.size(), "mutual information: labels and returns differ in length");
  detail::require(bins >= 2, "mutual information needs bins >= 2");
  detail::require(!labels.empty(), "mutual information needs data");
  MutualInfoResult r;
  r.bins_requested = bins;
  std::vector<double> distinct = returns;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  r.bins_used = std::min(bins, distinct.size());
  const auto binned = quantile_bins(returns, r.bins_used);

  std::map<std::pair<int, std::size_t>, double> joint;
  std::map<int, double> pk;
  std::map<std::size_t, double> pb;
  const double n = static_cast<double>(labels.size());
  for (std::size_t t = 0; t < labels.size(); ++t) {
    joint[{labels[t], binned[t]}] += 1.0;
    pk[labels[t]] += 1.0;
    pb[binned[t]] += 1.0;
  }
  // counts: p(k,b) / (p(k) p(b)) = n c(k,b) / (c(k) c(b))
  for (const auto& [key, c] : joint) r.nats += c / n * std::log(n * c / (pk[key.first] * pb[key.second]));
  r.nats = std::max(r.nats, 0.0);  // rounding can leave -1e-17 on independent data
  return r;
}

inline double crra_utility(double r, double gamma) {
  if (!(r > -1.0)) throw ValidationError("CRRA utility requires returns > -1");
  if (gamma == 1.0) return std::log1p(r);
  return (std::pow(1.0 + r, 1.0 - gamma) - 1.0) / (1.0 - gamma);
}

inline double cara_utility(double r, double alpha) { return -std::exp(-alpha * r); }

inline double mean_crra_utility(const std::vector<double>& returns, double gamma) {
  detail::require(!returns.empty(), "CRRA utility needs data");
  double s = 0.0;
  for (double r : returns) s += crra_utility(r, gamma);
  return s / static_cast<double>(returns.size());
}

inline double mean_cara_utility(const std::vector<double>& returns, double alpha) {
  detail::require(!returns.empty(), "CARA utility needs data");
  double s = 0.0;
  for (double r : returns) s += cara_utility(r, alpha);
  return s / static_cast<double>(returns.size());
}

struct StatsOptions {
  std::size_t bins = 5;
  double crra_gamma = 3.0;
  double cara_alpha = 3.0;
};

struct StatsReport {
  AnovaResult anova;
  PairwiseResult pairwise;
  int pairwise_a = 0, pairwise_b = 1;
  MutualInfoResult mutual_info;
  double crra_mean = 0.0;
  double cara_mean = 0.0;
  std::map<int, std::size_t> group_sizes;
  std::vector<std::string> warnings;
  StatsOptions options;
};

// Groups returns by regime label; groups with fewer than two members are
// left out of the ANOVA. The pairwise test compares the two lowest-indexed
// remaining groups.
inline StatsReport regime_stats_report(const std::vector<int>& labels, const std::vector<double>& returns,
                                       const StatsOptions& opt = {}) {
  detail::require(labels.size() == returns.size(), "stats: labels and returns differ in length");
  StatsReport rep;
  rep.options = opt;
  std::map<int, std::vector<double>> groups;
  for (std::size_t t = 0; t < labels.size(); ++t) groups[labels[t]].push_back(returns[t]);
  std::vector<std::vector<double>> usable;
  std::vector<int> usable_labels;
  for (const auto& [k, g] : groups) {
    rep.group_sizes[k] = g.size();
    if (g.size() < 2) {
      rep.warnings.push_back("regime " + std::to_string(k) + " has fewer than two observations; excluded from tests");
      continue;
    }
    usable.push_back(g);
    usable_labels.push_back(k);
  }
  if (usable.size() < 2) throw ValidationError("stats need at least two regimes with two or more observations");
  rep.anova = anova_f(usable);
  rep.pairwise_a = usable_labels[0];
  rep.pairwise_b = usable_labels[1];
  rep.pairwise = pairwise_mean_test(usable[0], usable[1]);
  rep.mutual_info = mutual_information(labels, returns, opt.bins);
  if (rep.mutual_info.bins_used < opt.bins)
    rep.warnings.push_back("bins reduced to " + std::to_string(rep.mutual_info.bins_used) +
                           " (fewer distinct return values)");
  rep.crra_mean = mean_crra_utility(returns, opt.crra_gamma);
  rep.cara_mean = mean_cara_utility(returns, opt.cara_alpha);
  return rep;
}

}  // namespace ramp
