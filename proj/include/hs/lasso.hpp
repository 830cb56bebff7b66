#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hs/error.hpp"
#include "hs/types.hpp"
#include "hs/util.hpp"

namespace hs::predict {

/// Linear GDS model on internally standardized columns.
struct LassoModel {
  double intercept = 0.0;
  std::vector<double> coef;  // standardized-space slopes
  std::vector<std::string> feature_names;
  double lambda = 0.0;
  std::vector<double> means;
  std::vector<double> scales;
  std::vector<bool> constant;
  int sweeps = 0;

  std::size_t width() const { return coef.size(); }

  double standardized(std::size_t j, double v) const { return constant[j] ? 0.0 : (v - means[j]) / scales[j]; }

  /// Slopes and intercept expressed on the original feature scale.
  std::pair<double, std::vector<double>> raw_coefficients() const {
    std::vector<double> raw(coef.size(), 0.0);
    double b0 = intercept;
    for (std::size_t j = 0; j < coef.size(); ++j) {
      if (constant[j]) continue;
      raw[j] = coef[j] / scales[j];
      b0 -= raw[j] * means[j];
    }
    return {b0, raw};
  }

  /// Indices of nonzero slopes.
  std::vector<std::size_t> support() const {
    std::vector<std::size_t> s;
    for (std::size_t j = 0; j < coef.size(); ++j)
      if (coef[j] != 0.0) s.push_back(j);
    return s;
  }
};

struct LassoOptions {
  double tolerance = 1e-7;  // max |coefficient change| per sweep
  int max_sweeps = 10'000;
  bool record_objective = false;
};

struct LassoFit {
  LassoModel model;
  std::vector<double> objective_trace;  // after each sweep, when recorded
};

inline double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

namespace detail {
inline void check_xy(const Matrix& x, std::span<const double> y) {
  if (x.rows == 0 || y.empty()) throw PreconditionError("lasso: empty data");
  if (x.rows != y.size()) throw ShapeError("lasso: row count differs from target length");
  for (double v : x.data)
    if (!std::isfinite(v)) throw PreconditionError("lasso: non-finite feature value");
  for (double v : y)
    if (!std::isfinite(v)) throw PreconditionError("lasso: non-finite target");
}

inline double lasso_objective(std::span<const double> resid, std::span<const double> beta, double lambda) {
  double rss = 0.0;
  for (double r : resid) rss += r * r;
  double l1 = 0.0;
  for (double b : beta) l1 += std::abs(b);
  return rss / (2.0 * static_cast<double>(resid.size())) + lambda * l1;
}
}  // namespace detail

/// Minimizes (1/2N)||y - b0 - Z b||^2 + lambda ||b||_1 over standardized Z by
/// cyclic coordinate descent with soft-thresholding.
inline LassoFit fit_lasso_traced(const Matrix& x, std::span<const double> y, double lambda,
                                 const LassoOptions& opt = {}, std::vector<std::string> names = {}) {
  detail::check_xy(x, y);
  if (x.rows < 2) throw PreconditionError("lasso: need at least 2 samples");
  if (!(lambda >= 0.0)) throw PreconditionError("lasso: lambda must be >= 0");
  const std::size_t n = x.rows, p = x.cols;
  const auto st = Standardizer::fit(x);
  LassoFit fit;
  auto& m = fit.model;
  m.means = st.means;
  m.scales = st.scales;
  m.constant = st.constant;
  m.lambda = lambda;
  m.coef.assign(p, 0.0);
  m.feature_names = names.empty() ? std::vector<std::string>(p) : std::move(names);
  if (m.feature_names.size() != p) throw ShapeError("lasso: feature name count differs from column count");
  m.intercept = mean(y);

  // Covariance-form updates: g = Z'r / N is kept current, so a coordinate
  // step costs O(p) rather than O(N).
  std::vector<double> z(n * p);  // column-major standardized copy
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t i = 0; i < n; ++i) z[j * n + i] = st.apply(j, x(i, j));
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> gram(p * p, 0.0), g(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    const double* zj = z.data() + j * n;
    for (std::size_t k = 0; k <= j; ++k) {
      const double* zk = z.data() + k * n;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += zj[i] * zk[i];
      gram[j * p + k] = gram[k * p + j] = acc * inv_n;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += zj[i] * (y[i] - m.intercept);
    g[j] = acc * inv_n;
  }
  auto objective = [&] {
    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - m.intercept;
    for (std::size_t j = 0; j < p; ++j)
      if (m.coef[j] != 0.0)
        for (std::size_t i = 0; i < n; ++i) resid[i] -= z[j * n + i] * m.coef[j];
    return detail::lasso_objective(resid, m.coef, lambda);
  };

  for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double zz = gram[j * p + j];
      if (m.constant[j] || zz <= 0.0) continue;
      const double old = m.coef[j];
      const double updated = soft_threshold(g[j] + zz * old, lambda) / zz;
      const double delta = updated - old;
      if (delta != 0.0) {
        const double* gj = gram.data() + j * p;
        for (std::size_t k = 0; k < p; ++k) g[k] -= gj[k] * delta;
        m.coef[j] = updated;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    m.sweeps = sweep + 1;
    if (opt.record_objective) fit.objective_trace.push_back(objective());
    if (max_change < opt.tolerance) break;
  }
  return fit;
}

inline LassoModel fit_lasso(const Matrix& x, std::span<const double> y, double lambda, const LassoOptions& opt = {},
                            std::vector<std::string> names = {}) {
  return fit_lasso_traced(x, y, lambda, opt, std::move(names)).model;
}

/// Smallest lambda at which every standardized slope is zero.
inline double lambda_max(const Matrix& x, std::span<const double> y) {
  detail::check_xy(x, y);
  const auto st = Standardizer::fit(x);
  const double ybar = mean(y);
  double best = 0.0;
  for (std::size_t j = 0; j < x.cols; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) s += st.apply(j, x(i, j)) * (y[i] - ybar);
    best = std::max(best, std::abs(s) / static_cast<double>(x.rows));
  }
  return best;
}

/// b0 + sum_j b_j * standardized(x_j).
inline double predict_gds(const LassoModel& m, std::span<const double> x) {
  if (x.size() != m.width())
    throw ShapeError("predict_gds: got " + std::to_string(x.size()) + " features, model has " +
                     std::to_string(m.width()));
  double y = m.intercept;
  for (std::size_t j = 0; j < x.size(); ++j) y += m.coef[j] * m.standardized(j, x[j]);
  return y;
}

/// Named form: the feature names must equal the model's, in order.
inline double predict_gds(const LassoModel& m, std::span<const double> x, std::span<const std::string> names) {
  if (names.size() != m.feature_names.size() || !std::equal(names.begin(), names.end(), m.feature_names.begin()))
    throw ShapeError("predict_gds: feature names do not match the model");
  return predict_gds(m, x);
}

/// Rounded and clamped to the 0..15 scale.
inline GdsScore to_gds_score(double raw) {
  const long r = std::lround(raw);
  return GdsScore(static_cast<int>(std::clamp<long>(r, kGdsMin, kGdsMax)));
}

inline double rmsd(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw ShapeError("rmsd: length mismatch");
  if (pred.empty()) throw PreconditionError("rmsd: no samples");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (truth[i] - pred[i]) * (truth[i] - pred[i]);
  return std::sqrt(s / static_cast<double>(pred.size()));
}

// ----------------------------------------------------- lambda selection

enum class LambdaRule {
  MinError,          // grid point with the lowest CV error
  OneStandardError,  // largest lambda within one SE of the minimum
};

struct LambdaSearch {
  int folds = 5;
  int grid_points = 30;
  double min_ratio = 1e-2;  // smallest grid lambda as a fraction of lambda_max
  LambdaRule rule = LambdaRule::OneStandardError;
  std::uint64_t seed = 17;
  LassoOptions fit{};
};

struct LambdaCurve {
  std::vector<double> lambdas;  // decreasing
  std::vector<double> cv_mse;
  std::vector<double> cv_se;
  double chosen = 0.0;
};

inline std::vector<double> lambda_grid(double lmax, int points, double min_ratio) {
  std::vector<double> g;
  if (lmax <= 0.0) return {0.0};
  for (int i = 0; i < points; ++i) {
    const double frac = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
    g.push_back(lmax * std::pow(min_ratio, frac));
  }
  return g;
}

/// K-fold cross-validated choice of lambda over a logarithmic grid.
inline LambdaCurve select_lambda_cv(const Matrix& x, std::span<const double> y, const LambdaSearch& cfg = {}) {
  detail::check_xy(x, y);
  const std::size_t n = x.rows;
  const int k = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(std::max(cfg.folds, 2)), n));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(cfg.seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> fold_of(n);
  for (std::size_t i = 0; i < n; ++i) fold_of[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(k));

  LambdaCurve curve;
  curve.lambdas = lambda_grid(lambda_max(x, y), cfg.grid_points, cfg.min_ratio);
  std::vector<std::vector<double>> fold_mse(curve.lambdas.size(), std::vector<double>(k, 0.0));
  for (int f = 0; f < k; ++f) {
    std::vector<std::size_t> tr, te;
    for (std::size_t i = 0; i < n; ++i) (fold_of[i] == f ? te : tr).push_back(i);
    if (tr.size() < 2 || te.empty()) continue;
    const Matrix xtr = x.select_rows(tr);
    std::vector<double> ytr;
    for (auto i : tr) ytr.push_back(y[i]);
    for (std::size_t l = 0; l < curve.lambdas.size(); ++l) {
      const auto m = fit_lasso(xtr, ytr, curve.lambdas[l], cfg.fit);
      double se = 0.0;
      for (auto i : te) {
        const double d = predict_gds(m, x.row(i)) - y[i];
        se += d * d;
      }
      fold_mse[l][f] = se / static_cast<double>(te.size());
    }
  }
  std::size_t best = 0;
  for (std::size_t l = 0; l < curve.lambdas.size(); ++l) {
    curve.cv_mse.push_back(mean(fold_mse[l]));
    curve.cv_se.push_back(stddev(fold_mse[l]) / std::sqrt(static_cast<double>(k)));
    if (curve.cv_mse[l] < curve.cv_mse[best]) best = l;
  }
  std::size_t pick = best;
  if (cfg.rule == LambdaRule::OneStandardError) {
    const double limit = curve.cv_mse[best] + curve.cv_se[best];
    for (std::size_t l = 0; l <= best; ++l)
      if (curve.cv_mse[l] <= limit) {
        pick = l;
        break;
      }
  }
  curve.chosen = curve.lambdas[pick];
  return curve;
}

inline LassoModel fit_lasso_cv(const Matrix& x, std::span<const double> y, const LambdaSearch& cfg = {},
                               std::vector<std::string> names = {}) {
  const auto curve = select_lambda_cv(x, y, cfg);
  return fit_lasso(x, y, curve.chosen, cfg.fit, std::move(names));
}

}  // namespace hs::predict
