#pragma once

// Latent regime models (k-means, diagonal GMM, Gaussian HMM) fitted on
// standardized features, their posteriors, and crisis-year alignment.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "ramp/dataio.hpp"
#include "ramp/error.hpp"
#include "ramp/matrix.hpp"
#include "ramp/rng.hpp"

namespace ramp {

enum class RegimeKind { kmeans, gmm, hmm };

inline std::string to_string(RegimeKind k) {
  switch (k) {
    case RegimeKind::kmeans: return "kmeans";
    case RegimeKind::gmm: return "gmm";
    case RegimeKind::hmm: return "hmm";
  }
  return "?";
}

inline RegimeKind parse_regime_kind(std::string_view s) {
  if (s == "kmeans") return RegimeKind::kmeans;
  if (s == "gmm") return RegimeKind::gmm;
  if (s == "hmm") return RegimeKind::hmm;
  throw ValidationError("unknown regime model kind '" + std::string(s) + "'");
}

inline constexpr double kVarianceFloor = 1e-6;

// Per-feature z-scoring with training statistics.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardization fit(const Matrix& x) {
    Standardization s;
    const std::size_t n = x.rows(), f = x.cols();
    s.mean.assign(f, 0.0);
    s.scale.assign(f, 1.0);
    for (std::size_t j = 0; j < f; ++j) {
      double sum = 0.0;
      for (std::size_t t = 0; t < n; ++t) sum += x(t, j);
      const double m = sum / static_cast<double>(n);
      double ss = 0.0;
      for (std::size_t t = 0; t < n; ++t) ss += (x(t, j) - m) * (x(t, j) - m);
      const double sd = std::sqrt(ss / static_cast<double>(n));
      s.mean[j] = m;
      s.scale[j] = sd > 1e-12 ? sd : 1.0;  // constant columns pass through centred
    }
    return s;
  }

  static Standardization identity(std::size_t f) { return {std::vector<double>(f, 0.0), std::vector<double>(f, 1.0)}; }

  Matrix apply(const Matrix& x) const {
    detail::require(x.cols() == mean.size(), "standardization: feature dimension mismatch");
    Matrix z(x.rows(), x.cols());
    for (std::size_t t = 0; t < x.rows(); ++t)
      for (std::size_t j = 0; j < x.cols(); ++j) z(t, j) = (x(t, j) - mean[j]) / scale[j];
    return z;
  }
};

// How the features were built, so inference can rebuild them from a panel.
struct FeatureSpec {
  std::size_t window = kDefaultFeatureWindow;
  std::vector<SpreadPair> spread_pairs;
};

// Parameters live in standardized feature units; see means_original().
struct RegimeModel {
  RegimeKind kind = RegimeKind::kmeans;
  std::size_t K = 0;
  std::vector<std::string> feature_names;
  Matrix means;                        // K x F
  Matrix variances;                    // K x F diagonal (gmm/hmm)
  std::vector<double> mixing_weights;  // gmm
  Matrix transition;                   // hmm
  std::vector<double> initial_dist;    // hmm
  Standardization standardization;
  FeatureSpec features;
  // Objective per iteration: WCSS for kmeans, log-likelihood for gmm/hmm.
  std::vector<double> fit_trace;

  std::size_t dim() const noexcept { return means.cols(); }

  Matrix means_original() const {
    Matrix m(K, dim());
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t j = 0; j < dim(); ++j)
        m(k, j) = means(k, j) * standardization.scale[j] + standardization.mean[j];
    return m;
  }

  Matrix variances_original() const {
    Matrix v(variances.rows(), variances.cols());
    for (std::size_t k = 0; k < variances.rows(); ++k)
      for (std::size_t j = 0; j < variances.cols(); ++j)
        v(k, j) = variances(k, j) * standardization.scale[j] * standardization.scale[j];
    return v;
  }
};

struct RegimePosterior {
  Matrix probs;  // T x K
  std::vector<int> labels;
  double loglik = 0.0;
};

struct FitOptions {
  std::size_t K = 3;
  std::uint64_t seed = 0;
  std::size_t max_iter = 200;
  double tol = 1e-6;
};

namespace detail {

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

inline std::size_t argmax_lowest(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] > v[best]) best = k;
  return best;
}

inline double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline std::size_t distinct_rows(const Matrix& x) {
  std::set<std::vector<double>> rows;
  for (std::size_t t = 0; t < x.rows(); ++t) rows.insert(x.row_vector(t));
  return rows.size();
}

struct KMeansState {
  Matrix centers;
  std::vector<int> labels;
  std::vector<double> wcss_trace;
};

inline std::vector<int> assign_nearest(const Matrix& z, const Matrix& centers, double* wcss) {
  std::vector<int> labels(z.rows());
  double total = 0.0;
  for (std::size_t t = 0; t < z.rows(); ++t) {
    std::size_t best = 0;
    double best_d = sq_dist(z.row(t), centers.row(0));
    for (std::size_t k = 1; k < centers.rows(); ++k) {
      const double d = sq_dist(z.row(t), centers.row(k));
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    labels[t] = static_cast<int>(best);
    total += best_d;
  }
  if (wcss) *wcss = total;
  return labels;
}

// Lloyd iterations from a k-means++ seeding, on already standardized data.
inline KMeansState lloyd(const Matrix& z, std::size_t K, std::uint64_t seed, std::size_t max_iter) {
  const std::size_t n = z.rows(), f = z.cols();
  auto rng = make_stream(seed, "kmeans++");
  KMeansState st;
  st.centers = Matrix(K, f);
  std::vector<std::size_t> chosen;
  chosen.push_back(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  std::vector<double> d2(n);
  while (chosen.size() < K) {
    double total = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      double best = std::numeric_limits<double>::infinity();
      for (auto c : chosen) best = std::min(best, sq_dist(z.row(t), z.row(c)));
      d2[t] = best;
      total += best;
    }
    if (total > 0.0)
      chosen.push_back(sample_categorical(d2, rng));
    else
      chosen.push_back(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  }
  for (std::size_t k = 0; k < K; ++k)
    std::copy_n(z.row(chosen[k]).begin(), f, st.centers.row(k).begin());

  for (std::size_t it = 0; it < max_iter; ++it) {
    double wcss = 0.0;
    auto labels = assign_nearest(z, st.centers, &wcss);
    const bool changed = labels != st.labels;
    st.labels = std::move(labels);
    st.wcss_trace.push_back(wcss);
    if (!changed) break;
    Matrix sums(K, f);
    std::vector<std::size_t> counts(K, 0);
    for (std::size_t t = 0; t < n; ++t) {
      const auto k = static_cast<std::size_t>(st.labels[t]);
      ++counts[k];
      for (std::size_t j = 0; j < f; ++j) sums(k, j) += z(t, j);
    }
    for (std::size_t k = 0; k < K; ++k)
      if (counts[k] > 0)  // an empty cluster keeps its previous center
        for (std::size_t j = 0; j < f; ++j) st.centers(k, j) = sums(k, j) / static_cast<double>(counts[k]);
  }
  return st;
}

inline double log_gaussian_diag(std::span<const double> x, std::span<const double> mean,
                                std::span<const double> var) {
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double d = x[j] - mean[j];
    s += -0.5 * (std::log(2.0 * std::numbers::pi * var[j]) + d * d / var[j]);
  }
  return s;
}

inline Matrix log_emissions(const Matrix& z, const Matrix& means, const Matrix& variances) {
  Matrix out(z.rows(), means.rows());
  for (std::size_t t = 0; t < z.rows(); ++t)
    for (std::size_t k = 0; k < means.rows(); ++k)
      out(t, k) = log_gaussian_diag(z.row(t), means.row(k), variances.row(k));
  return out;
}

// Emission means/variances from a hard assignment, floored.
inline void moments_from_labels(const Matrix& z, const std::vector<int>& labels, std::size_t K,
                                Matrix& means, Matrix& variances, std::vector<double>& weights) {
  const std::size_t n = z.rows(), f = z.cols();
  means = Matrix(K, f);
  variances = Matrix(K, f, 1.0);
  weights.assign(K, 0.0);
  std::vector<double> counts(K, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const auto k = static_cast<std::size_t>(labels[t]);
    counts[k] += 1.0;
    for (std::size_t j = 0; j < f; ++j) means(k, j) += z(t, j);
  }
  for (std::size_t k = 0; k < K; ++k)
    if (counts[k] > 0)
      for (std::size_t j = 0; j < f; ++j) means(k, j) /= counts[k];
  Matrix ss(K, f);
  for (std::size_t t = 0; t < n; ++t) {
    const auto k = static_cast<std::size_t>(labels[t]);
    for (std::size_t j = 0; j < f; ++j) ss(k, j) += (z(t, j) - means(k, j)) * (z(t, j) - means(k, j));
  }
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    if (counts[k] >= 2)
      for (std::size_t j = 0; j < f; ++j) variances(k, j) = std::max(ss(k, j) / counts[k], kVarianceFloor);
    weights[k] = std::max(counts[k], 1.0);
    total += weights[k];
  }
  for (auto& w : weights) w /= total;
}

struct ForwardBackward {
  Matrix gamma;              // T x K smoothed marginals
  Matrix xi_sum;             // K x K expected transition counts
  double loglik = 0.0;
};

// Scaled forward-backward. Emissions enter as log densities and are
// shifted by their per-step maximum before exponentiation.
inline ForwardBackward forward_backward(std::span<const double> initial, const Matrix& transition,
                                        const Matrix& log_b, bool want_backward = true) {
  const std::size_t T = log_b.rows(), K = log_b.cols();
  Matrix b(T, K), alpha(T, K);
  std::vector<double> shift(T), scale(T);
  for (std::size_t t = 0; t < T; ++t) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) m = std::max(m, log_b(t, k));
    shift[t] = m;
    for (std::size_t k = 0; k < K; ++k) b(t, k) = std::exp(log_b(t, k) - m);
  }
  ForwardBackward fb;
  for (std::size_t t = 0; t < T; ++t) {
    double c = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
      double pred = 0.0;
      if (t == 0) {
        pred = initial[j];
      } else {
        for (std::size_t i = 0; i < K; ++i) pred += alpha(t - 1, i) * transition(i, j);
      }
      alpha(t, j) = pred * b(t, j);
      c += alpha(t, j);
    }
    if (!(c > 0.0)) throw NumericalError("forward pass underflow: observation has zero likelihood");
    for (std::size_t j = 0; j < K; ++j) alpha(t, j) /= c;
    scale[t] = c;
    fb.loglik += std::log(c) + shift[t];
  }
  if (!want_backward) return fb;

  Matrix beta(T, K, 1.0);
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t i = 0; i < K; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < K; ++j) s += transition(i, j) * b(t + 1, j) * beta(t + 1, j);
      beta(t, i) = s / scale[t + 1];
    }
  }
  fb.gamma = Matrix(T, K);
  for (std::size_t t = 0; t < T; ++t) {
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += (fb.gamma(t, k) = alpha(t, k) * beta(t, k));
    for (std::size_t k = 0; k < K; ++k) fb.gamma(t, k) /= s;
  }
  fb.xi_sum = Matrix(K, K);
  for (std::size_t t = 0; t + 1 < T; ++t)
    for (std::size_t i = 0; i < K; ++i)
      for (std::size_t j = 0; j < K; ++j)
        fb.xi_sum(i, j) += alpha(t, i) * transition(i, j) * b(t + 1, j) * beta(t + 1, j) / scale[t + 1];
  return fb;
}

inline Matrix standardized_input(const RegimeModel& model, const FeatureMatrix& x) {
  if (x.cols() != model.dim())
    throw ValidationError("feature dimension " + std::to_string(x.cols()) +
                          " does not match model dimension " + std::to_string(model.dim()));
  if (!model.feature_names.empty() && !x.feature_names.empty() && model.feature_names != x.feature_names)
    throw ValidationError("feature names do not match the fitted model");
  return model.standardization.apply(x.values);
}

inline void check_fit_inputs(const FeatureMatrix& x, const FitOptions& opt) {
  if (x.rows() == 0 || x.cols() == 0) throw ValidationError("empty feature matrix");
  detail::require(opt.K >= 1, "regime count K must be >= 1");
  detail::require(opt.max_iter >= 1, "max_iter must be >= 1");
  if (opt.K > x.rows())
    throw ValidationError("K=" + std::to_string(opt.K) + " exceeds the " + std::to_string(x.rows()) +
                          " available feature rows");
}

inline RegimeModel model_shell(RegimeKind kind, const FeatureMatrix& x, const FitOptions& opt) {
  RegimeModel m;
  m.kind = kind;
  m.K = opt.K;
  m.feature_names = x.feature_names;
  m.standardization = Standardization::fit(x.values);
  return m;
}

}  // namespace detail

inline RegimeModel kmeans_fit(const FeatureMatrix& x, const FitOptions& opt) {
  detail::check_fit_inputs(x, opt);
  auto model = detail::model_shell(RegimeKind::kmeans, x, opt);
  const Matrix z = model.standardization.apply(x.values);
  auto st = detail::lloyd(z, opt.K, opt.seed, opt.max_iter);
  model.means = std::move(st.centers);
  model.fit_trace = std::move(st.wcss_trace);
  return model;
}

inline RegimeModel gmm_fit(const FeatureMatrix& x, const FitOptions& opt) {
  detail::check_fit_inputs(x, opt);
  detail::require(opt.tol > 0.0, "tol must be > 0");
  auto model = detail::model_shell(RegimeKind::gmm, x, opt);
  const Matrix z = model.standardization.apply(x.values);
  if (opt.K > detail::distinct_rows(z))
    throw ValidationError("K=" + std::to_string(opt.K) + " exceeds the number of distinct feature rows");
  const std::size_t n = z.rows(), f = z.cols(), K = opt.K;

  const auto init = detail::lloyd(z, K, opt.seed, opt.max_iter);
  detail::moments_from_labels(z, init.labels, K, model.means, model.variances, model.mixing_weights);

  Matrix resp(n, K);
  auto e_step = [&]() {
    const Matrix lb = detail::log_emissions(z, model.means, model.variances);
    double ll = 0.0;
    std::vector<double> row(K);
    for (std::size_t t = 0; t < n; ++t) {
      for (std::size_t k = 0; k < K; ++k) row[k] = std::log(model.mixing_weights[k]) + lb(t, k);
      const double lse = detail::log_sum_exp(row);
      ll += lse;
      for (std::size_t k = 0; k < K; ++k) resp(t, k) = std::exp(row[k] - lse);
    }
    return ll;
  };

  for (std::size_t it = 0; it < opt.max_iter; ++it) {
    const double ll = e_step();
    model.fit_trace.push_back(ll);
    if (it > 0 && ll - model.fit_trace[it - 1] < opt.tol) break;
    for (std::size_t k = 0; k < K; ++k) {
      double nk = 0.0;
      for (std::size_t t = 0; t < n; ++t) nk += resp(t, k);
      if (nk <= 0.0) continue;  // component lost all mass; keep its parameters
      model.mixing_weights[k] = nk / static_cast<double>(n);
      for (std::size_t j = 0; j < f; ++j) {
        double m = 0.0;
        for (std::size_t t = 0; t < n; ++t) m += resp(t, k) * z(t, j);
        m /= nk;
        double v = 0.0;
        for (std::size_t t = 0; t < n; ++t) v += resp(t, k) * (z(t, j) - m) * (z(t, j) - m);
        model.means(k, j) = m;
        model.variances(k, j) = std::max(v / nk, kVarianceFloor);
      }
    }
    if (it + 1 == opt.max_iter) model.fit_trace.push_back(e_step());
  }
  double total = 0.0;
  for (double w : model.mixing_weights) total += w;
  for (auto& w : model.mixing_weights) w /= total;
  return model;
}

inline RegimeModel hmm_fit(const FeatureMatrix& x, const FitOptions& opt) {
  detail::check_fit_inputs(x, opt);
  detail::require(opt.tol > 0.0, "tol must be > 0");
  auto model = detail::model_shell(RegimeKind::hmm, x, opt);
  const Matrix z = model.standardization.apply(x.values);
  if (opt.K > detail::distinct_rows(z))
    throw ValidationError("K=" + std::to_string(opt.K) + " exceeds the number of distinct feature rows");
  const std::size_t n = z.rows(), f = z.cols(), K = opt.K;

  const auto init = detail::lloyd(z, K, opt.seed, opt.max_iter);
  std::vector<double> unused;
  detail::moments_from_labels(z, init.labels, K, model.means, model.variances, unused);
  // uniform rows with extra diagonal mass, renormalized
  model.transition = Matrix(K, K);
  for (std::size_t i = 0; i < K; ++i) {
    const double total = 1.0 + 0.5;
    for (std::size_t j = 0; j < K; ++j)
      model.transition(i, j) = (1.0 / static_cast<double>(K) + (i == j ? 0.5 : 0.0)) / total;
  }
  model.initial_dist.assign(K, 1.0 / static_cast<double>(K));

  auto evaluate = [&]() {
    return detail::forward_backward(model.initial_dist, model.transition,
                                    detail::log_emissions(z, model.means, model.variances));
  };

  for (std::size_t it = 0; it < opt.max_iter; ++it) {
    const auto fb = evaluate();
    model.fit_trace.push_back(fb.loglik);
    if (it > 0 && fb.loglik - model.fit_trace[it - 1] < opt.tol) break;

    for (std::size_t k = 0; k < K; ++k) model.initial_dist[k] = fb.gamma(0, k);
    for (std::size_t i = 0; i < K; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < K; ++j) row += fb.xi_sum(i, j);
      if (row <= 0.0) continue;  // state never left; any row is optimal, keep it
      for (std::size_t j = 0; j < K; ++j) model.transition(i, j) = fb.xi_sum(i, j) / row;
    }
    for (std::size_t k = 0; k < K; ++k) {
      double nk = 0.0;
      for (std::size_t t = 0; t < n; ++t) nk += fb.gamma(t, k);
      if (nk <= 0.0) continue;
      for (std::size_t j = 0; j < f; ++j) {
        double m = 0.0;
        for (std::size_t t = 0; t < n; ++t) m += fb.gamma(t, k) * z(t, j);
        m /= nk;
        double v = 0.0;
        for (std::size_t t = 0; t < n; ++t) v += fb.gamma(t, k) * (z(t, j) - m) * (z(t, j) - m);
        model.means(k, j) = m;
        model.variances(k, j) = std::max(v / nk, kVarianceFloor);
      }
    }
    if (it + 1 == opt.max_iter) model.fit_trace.push_back(evaluate().loglik);
  }
  return model;
}

inline RegimeModel fit_regime_model(RegimeKind kind, const FeatureMatrix& x, const FitOptions& opt) {
  switch (kind) {
    case RegimeKind::kmeans: return kmeans_fit(x, opt);
    case RegimeKind::gmm: return gmm_fit(x, opt);
    case RegimeKind::hmm: return hmm_fit(x, opt);
  }
  throw ValidationError("unknown regime model kind");
}

inline RegimePosterior posterior(const RegimeModel& model, const FeatureMatrix& x) {
  const Matrix z = detail::standardized_input(model, x);
  const std::size_t n = z.rows(), K = model.K;
  RegimePosterior post;
  post.probs = Matrix(n, K);
  switch (model.kind) {
    case RegimeKind::kmeans: {
      double wcss = 0.0;
      const auto labels = detail::assign_nearest(z, model.means, &wcss);
      for (std::size_t t = 0; t < n; ++t) post.probs(t, static_cast<std::size_t>(labels[t])) = 1.0;
      post.loglik = -wcss;  // k-means has no likelihood; report the negated WCSS
      break;
    }
    case RegimeKind::gmm: {
      const Matrix lb = detail::log_emissions(z, model.means, model.variances);
      std::vector<double> row(K);
      for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t k = 0; k < K; ++k) row[k] = std::log(model.mixing_weights[k]) + lb(t, k);
        const double lse = detail::log_sum_exp(row);
        post.loglik += lse;
        double s = 0.0;
        for (std::size_t k = 0; k < K; ++k) s += (post.probs(t, k) = std::exp(row[k] - lse));
        for (std::size_t k = 0; k < K; ++k) post.probs(t, k) /= s;
      }
      break;
    }
    case RegimeKind::hmm: {
      auto fb = detail::forward_backward(model.initial_dist, model.transition,
                                         detail::log_emissions(z, model.means, model.variances));
      post.probs = std::move(fb.gamma);
      post.loglik = fb.loglik;
      break;
    }
  }
  post.labels.resize(n);
  for (std::size_t t = 0; t < n; ++t) post.labels[t] = static_cast<int>(detail::argmax_lowest(post.probs.row(t)));
  return post;
}

// Log-likelihood of an HMM given per-step log emission densities.
inline double hmm_forward_loglik(std::span<const double> initial, const Matrix& transition,
                                 const Matrix& log_emission) {
  return detail::forward_backward(initial, transition, log_emission, false).loglik;
}

inline double hmm_loglik(const RegimeModel& model, const FeatureMatrix& x) {
  detail::require(model.kind == RegimeKind::hmm, "hmm_loglik requires an hmm model");
  const Matrix z = detail::standardized_input(model, x);
  return hmm_forward_loglik(model.initial_dist, model.transition,
                            detail::log_emissions(z, model.means, model.variances));
}

// Most likely state path; ties resolved toward the lowest state index.
inline std::vector<int> viterbi_path(std::span<const double> initial, const Matrix& transition,
                                     const Matrix& log_emission) {
  const std::size_t T = log_emission.rows(), K = log_emission.cols();
  std::vector<int> path(T);
  if (T == 0) return path;
  auto safe_log = [](double p) { return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity(); };
  Matrix delta(T, K);
  std::vector<std::vector<int>> back(T, std::vector<int>(K, 0));
  for (std::size_t k = 0; k < K; ++k) delta(0, k) = safe_log(initial[k]) + log_emission(0, k);
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t j = 0; j < K; ++j) {
      std::size_t best = 0;
      double best_v = delta(t - 1, 0) + safe_log(transition(0, j));
      for (std::size_t i = 1; i < K; ++i) {
        const double v = delta(t - 1, i) + safe_log(transition(i, j));
        if (v > best_v) {
          best_v = v;
          best = i;
        }
      }
      delta(t, j) = best_v + log_emission(t, j);
      back[t][j] = static_cast<int>(best);
    }
  path[T - 1] = static_cast<int>(detail::argmax_lowest(delta.row(T - 1)));
  for (std::size_t t = T - 1; t > 0; --t) path[t - 1] = back[t][static_cast<std::size_t>(path[t])];
  return path;
}

inline std::vector<int> viterbi(const RegimeModel& model, const FeatureMatrix& x) {
  if (model.kind != RegimeKind::hmm)
    throw ValidationError("viterbi requires an hmm model, got " + to_string(model.kind));
  const Matrix z = detail::standardized_input(model, x);
  return viterbi_path(model.initial_dist, model.transition,
                      detail::log_emissions(z, model.means, model.variances));
}

inline void write_posterior(std::ostream& os, const std::vector<int>& years, const RegimePosterior& post) {
  std::vector<std::string> header{"year"};
  for (std::size_t k = 0; k < post.probs.cols(); ++k) header.push_back("rho_" + std::to_string(k));
  header.emplace_back("label");
  csv::write_row(os, header);
  for (std::size_t t = 0; t < post.probs.rows(); ++t) {
    std::vector<std::string> row{std::to_string(years[t])};
    for (double p : post.probs.row(t)) row.push_back(csv::format(p));
    row.push_back(std::to_string(post.labels[t]));
    csv::write_row(os, row);
  }
}

// ---------------------------------------------------------------------------
// Crisis alignment

inline const std::vector<int>& default_crisis_years() {
  static const std::vector<int> years{1929, 1930, 1931, 1937, 1973, 1974, 1987,
                                      2000, 2001, 2002, 2008, 2020, 2022};
  return years;
}

struct RegimeAlignment {
  int regime = 0;
  std::size_t count = 0;            // years labeled with this regime
  double crisis_fraction = 0.0;     // share of crisis years labeled k
  double noncrisis_fraction = 0.0;  // share of non-crisis years labeled k
  double precision = 0.0;           // P(crisis | label k); 0 when k is unused
  double recall = 0.0;              // P(label k | crisis)
};

struct AlignmentReport {
  std::vector<RegimeAlignment> regimes;
  std::size_t crisis_count = 0;
  std::size_t noncrisis_count = 0;
  std::vector<int> skipped_years;
  std::vector<std::string> warnings;
};

inline AlignmentReport crisis_alignment(const std::vector<int>& labels, const std::vector<int>& years,
                                        const std::vector<int>& crisis_years, std::size_t K = 0) {
  detail::require(labels.size() == years.size(), "crisis_alignment: labels and years differ in length");
  for (int l : labels) {
    detail::require(l >= 0, "crisis_alignment: negative label");
    K = std::max(K, static_cast<std::size_t>(l) + 1);
  }
  AlignmentReport rep;
  std::set<int> crisis;
  const std::set<int> present(years.begin(), years.end());
  for (int y : crisis_years) {
    if (present.contains(y)) {
      crisis.insert(y);
    } else if (std::find(rep.skipped_years.begin(), rep.skipped_years.end(), y) == rep.skipped_years.end()) {
      rep.skipped_years.push_back(y);
      rep.warnings.push_back("crisis year " + std::to_string(y) + " outside panel range; skipped");
    }
  }
  std::vector<std::size_t> in_crisis(K, 0), outside(K, 0);
  for (std::size_t t = 0; t < labels.size(); ++t) {
    const auto k = static_cast<std::size_t>(labels[t]);
    if (crisis.contains(years[t])) {
      ++in_crisis[k];
      ++rep.crisis_count;
    } else {
      ++outside[k];
      ++rep.noncrisis_count;
    }
  }
  auto ratio = [](std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
  for (std::size_t k = 0; k < K; ++k) {
    RegimeAlignment a;
    a.regime = static_cast<int>(k);
    a.count = in_crisis[k] + outside[k];
    a.crisis_fraction = ratio(in_crisis[k], rep.crisis_count);
    a.noncrisis_fraction = ratio(outside[k], rep.noncrisis_count);
    a.precision = ratio(in_crisis[k], a.count);
    a.recall = a.crisis_fraction;
    rep.regimes.push_back(a);
  }
  return rep;
}

}  // namespace ramp
