#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hs/error.hpp"
#include "hs/types.hpp"
#include "hs/util.hpp"
#include "hs/validation.hpp"

namespace hs::predict {

using Scores = std::array<double, kNumLevels>;

/// Highest score wins; ties go to the lower class index.
inline DepressionLevel argmax_level(const Scores& s) {
  return static_cast<DepressionLevel>(std::max_element(s.begin(), s.end()) - s.begin());
}

namespace detail {
inline void require_two_classes(std::span<const Sample> train) {
  const auto c = level_counts(train);
  if (std::count_if(c.begin(), c.end(), [](std::size_t v) { return v > 0; }) < 2)
    throw TrainingError("classifier needs at least 2 classes in the training set");
}

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) d += (a[j] - b[j]) * (a[j] - b[j]);
  return d;
}

/// Training rows sorted by (label, features) so solvers see a canonical order.
inline std::vector<std::size_t> canonical_order(std::span<const Sample> train) {
  std::vector<std::size_t> idx(train.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (train[a].level != train[b].level) return train[a].level < train[b].level;
    return train[a].x < train[b].x;
  });
  return idx;
}

/// Feature scaling fitted over the canonical order, so its sums do not depend on input order.
inline Standardizer canonical_standardizer(std::span<const Sample> train, std::span<const std::size_t> order) {
  Matrix m(order.size(), train.front().x.size());
  for (std::size_t r = 0; r < order.size(); ++r)
    std::copy(train[order[r]].x.begin(), train[order[r]].x.end(), m.row(r).begin());
  return Standardizer::fit(m);
}
}  // namespace detail

// -------------------------------------------------------------------- SVM

struct SvmOptions {
  double c = 10.0;
  /// RBF gamma; <= 0 means 1 / median pairwise distance^2 on standardized data.
  double gamma = 0.0;
  double tolerance = 1e-3;
  long max_iterations = 10'000'000;
};

/// Dual soft-margin solution for one binary problem, y in {-1,+1}.
struct BinarySvm {
  std::vector<double> coef;  // alpha_i * y_i for support vectors
  std::vector<std::vector<double>> support;
  double rho = 0.0;
  long iterations = 0;
  bool degenerate = false;  // no positive examples
};

namespace detail {

/// SMO with second-order working-set selection on a precomputed kernel.
inline BinarySvm solve_smo(const std::vector<double>& kernel, std::span<const int> y, double c, double eps,
                           long max_iter, std::span<const std::vector<double>> rows) {
  const std::size_t n = y.size();
  constexpr double kTau = 1e-12;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> alpha(n, 0.0), grad(n, -1.0);
  auto K = [&](std::size_t i, std::size_t j) { return kernel[i * n + j]; };
  auto upper = [&](std::size_t t) { return alpha[t] >= c; };
  auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

  BinarySvm out;
  long iter = 0;
  for (; iter < max_iter; ++iter) {
    double gmax = -kInf;
    std::ptrdiff_t i = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] == 1) {
        if (!upper(t) && -grad[t] >= gmax) gmax = -grad[t], i = static_cast<std::ptrdiff_t>(t);
      } else {
        if (!lower(t) && grad[t] >= gmax) gmax = grad[t], i = static_cast<std::ptrdiff_t>(t);
      }
    }
    if (i < 0) break;
    const auto ii = static_cast<std::size_t>(i);
    double gmax2 = -kInf, obj_min = kInf;
    std::ptrdiff_t j = -1;
    for (std::size_t t = 0; t < n; ++t) {
      double grad_diff = 0.0, quad = 0.0;
      if (y[t] == 1) {
        if (lower(t)) continue;
        gmax2 = std::max(gmax2, grad[t]);
        grad_diff = gmax + grad[t];
        quad = K(ii, ii) + K(t, t) - 2.0 * K(ii, t);
      } else {
        if (upper(t)) continue;
        gmax2 = std::max(gmax2, -grad[t]);
        grad_diff = gmax - grad[t];
        quad = K(ii, ii) + K(t, t) - 2.0 * K(ii, t);
      }
      if (grad_diff > 0) {
        const double obj = -(grad_diff * grad_diff) / (quad > 0 ? quad : kTau);
        if (obj <= obj_min) obj_min = obj, j = static_cast<std::ptrdiff_t>(t);
      }
    }
    if (gmax + gmax2 < eps || j < 0) break;
    const auto jj = static_cast<std::size_t>(j);

    const double qij = y[ii] * y[jj] * K(ii, jj);
    const double old_i = alpha[ii], old_j = alpha[jj];
    if (y[ii] != y[jj]) {
      double quad = K(ii, ii) + K(jj, jj) + 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[ii] - grad[jj]) / quad;
      const double diff = alpha[ii] - alpha[jj];
      alpha[ii] += delta;
      alpha[jj] += delta;
      if (diff > 0) {
        if (alpha[jj] < 0) alpha[jj] = 0, alpha[ii] = diff;
      } else {
        if (alpha[ii] < 0) alpha[ii] = 0, alpha[jj] = -diff;
      }
      if (diff > 0) {
        if (alpha[ii] > c) alpha[ii] = c, alpha[jj] = c - diff;
      } else {
        if (alpha[jj] > c) alpha[jj] = c, alpha[ii] = c + diff;
      }
    } else {
      double quad = K(ii, ii) + K(jj, jj) - 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (grad[ii] - grad[jj]) / quad;
      const double sum = alpha[ii] + alpha[jj];
      alpha[ii] -= delta;
      alpha[jj] += delta;
      if (sum > c) {
        if (alpha[ii] > c) alpha[ii] = c, alpha[jj] = sum - c;
      } else {
        if (alpha[jj] < 0) alpha[jj] = 0, alpha[ii] = sum;
      }
      if (sum > c) {
        if (alpha[jj] > c) alpha[jj] = c, alpha[ii] = sum - c;
      } else {
        if (alpha[ii] < 0) alpha[ii] = 0, alpha[jj] = sum;
      }
    }
    const double da_i = alpha[ii] - old_i, da_j = alpha[jj] - old_j;
    for (std::size_t t = 0; t < n; ++t)
      grad[t] += y[t] * (y[ii] * K(ii, t) * da_i + y[jj] * K(jj, t) * da_j);
  }
  out.iterations = iter;

  double ub = kInf, lb = -kInf, sum_free = 0.0;
  int n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (upper(t)) {
      if (y[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  out.rho = n_free > 0 ? sum_free / n_free : (ub + lb) / 2.0;
  for (std::size_t t = 0; t < n; ++t)
    if (alpha[t] > 0) {
      out.coef.push_back(alpha[t] * y[t]);
      out.support.push_back(rows[t]);
    }
  return out;
}

}  // namespace detail

/// One-vs-rest RBF soft-margin SVM on standardized features.
class SvmClassifier {
 public:
  static SvmClassifier fit(std::span<const Sample> train, const SvmOptions& opt = {}) {
    detail::require_two_classes(train);
    SvmClassifier m;
    const auto order = detail::canonical_order(train);
    m.standardizer_ = detail::canonical_standardizer(train, order);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (auto i : order) {
      rows.push_back(m.standardizer_.apply(train[i].x));
      labels.push_back(static_cast<int>(train[i].level));
    }
    const std::size_t n = rows.size();
    m.gamma_ = opt.gamma;
    if (m.gamma_ <= 0) {
      std::vector<double> d;
      d.reserve(n * (n - 1) / 2);
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) d.push_back(std::sqrt(detail::sq_dist(rows[a], rows[b])));
      double med = 1.0;
      if (!d.empty()) {
        auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
        std::nth_element(d.begin(), mid, d.end());
        med = *mid;
      }
      m.gamma_ = med > 0 ? 1.0 / (med * med) : 1.0;
    }
    std::vector<double> kernel(n * n);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a; b < n; ++b)
        kernel[a * n + b] = kernel[b * n + a] = std::exp(-m.gamma_ * detail::sq_dist(rows[a], rows[b]));
    for (int c = 0; c < kNumLevels; ++c) {
      std::vector<int> y(n);
      bool any = false;
      for (std::size_t t = 0; t < n; ++t) {
        y[t] = labels[t] == c ? 1 : -1;
        any = any || y[t] == 1;
      }
      if (!any) {
        m.machines_[c].degenerate = true;
        continue;
      }
      m.machines_[c] = detail::solve_smo(kernel, y, opt.c, opt.tolerance, opt.max_iterations, rows);
    }
    return m;
  }

  /// Per-class one-vs-rest decision values; -inf for classes absent in training.
  Scores decision(std::span<const double> x) const {
    const auto z = standardizer_.apply(x);
    Scores s{};
    for (int c = 0; c < kNumLevels; ++c) {
      const auto& mc = machines_[c];
      if (mc.degenerate) {
        s[c] = -std::numeric_limits<double>::infinity();
        continue;
      }
      double f = -mc.rho;
      for (std::size_t k = 0; k < mc.coef.size(); ++k)
        f += mc.coef[k] * std::exp(-gamma_ * detail::sq_dist(mc.support[k], z));
      s[c] = f;
    }
    return s;
  }

  Scores scores(std::span<const double> x) const { return decision(x); }
  DepressionLevel predict(std::span<const double> x) const { return argmax_level(decision(x)); }
  double gamma() const { return gamma_; }
  const BinarySvm& machine(int c) const { return machines_[c]; }

 private:
  Standardizer standardizer_;
  double gamma_ = 1.0;
  std::array<BinarySvm, kNumLevels> machines_{};
};

// -------------------------------------------------------------------- KNN

struct KnnOptions {
  int k = 5;
};

class KnnClassifier {
 public:
  static KnnClassifier fit(std::span<const Sample> train, const KnnOptions& opt = {}) {
    detail::require_two_classes(train);
    if (opt.k < 1) throw PreconditionError("knn: k must be >= 1");
    KnnClassifier m;
    m.k_ = opt.k;
    const auto order = detail::canonical_order(train);
    m.standardizer_ = detail::canonical_standardizer(train, order);
    for (auto i : order) {
      m.rows_.push_back(m.standardizer_.apply(train[i].x));
      m.labels_.push_back(static_cast<int>(train[i].level));
    }
    return m;
  }

  /// Vote fractions among the k nearest rows; equal distances resolve toward the lower class index.
  Scores scores(std::span<const double> x) const {
    const auto z = standardizer_.apply(x);
    std::vector<std::pair<double, std::size_t>> d(rows_.size());
    for (std::size_t i = 0; i < rows_.size(); ++i) d[i] = {detail::sq_dist(rows_[i], z), i};
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(k_), d.size());
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      if (labels_[a.second] != labels_[b.second]) return labels_[a.second] < labels_[b.second];
      return a.second < b.second;
    });
    Scores s{};
    for (std::size_t i = 0; i < k; ++i) s[labels_[d[i].second]] += 1.0 / static_cast<double>(k);
    return s;
  }

  DepressionLevel predict(std::span<const double> x) const { return argmax_level(scores(x)); }

 private:
  int k_ = 5;
  Standardizer standardizer_;
  std::vector<std::vector<double>> rows_;
  std::vector<int> labels_;
};

// -------------------------------------------------------------------- MLP

struct MlpOptions {
  int hidden1 = 64;
  int hidden2 = 32;
  double learning_rate = 0.1;
  int epochs = 100;
  int batch_size = 8;
  std::uint64_t seed = 1;
};

/// in -> logistic(h1) -> logistic(h2) -> softmax(3), trained on cross-entropy.
class MlpClassifier {
 public:
  struct Weights {
    std::vector<double> w1, b1, w2, b2, w3, b3;  // row-major [out][in]
    std::array<std::vector<double>*, 6> tensors() { return {&w1, &b1, &w2, &b2, &w3, &b3}; }
    std::array<const std::vector<double>*, 6> tensors() const { return {&w1, &b1, &w2, &b2, &w3, &b3}; }
  };

  static MlpClassifier initialize(std::size_t inputs, const MlpOptions& opt) {
    MlpClassifier m;
    m.opt_ = opt;
    m.in_ = inputs;
    Rng rng(opt.seed);
    auto init = [&](std::vector<double>& w, std::size_t fan_in, std::size_t fan_out) {
      const double lim = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      std::uniform_real_distribution<double> u(-lim, lim);
      w.resize(fan_in * fan_out);
      for (auto& v : w) v = u(rng);
    };
    const auto h1 = static_cast<std::size_t>(opt.hidden1), h2 = static_cast<std::size_t>(opt.hidden2);
    init(m.w_.w1, inputs, h1);
    m.w_.b1.assign(h1, 0.0);
    init(m.w_.w2, h1, h2);
    m.w_.b2.assign(h2, 0.0);
    init(m.w_.w3, h2, kNumLevels);
    m.w_.b3.assign(kNumLevels, 0.0);
    m.standardizer_.means.assign(inputs, 0.0);
    m.standardizer_.scales.assign(inputs, 1.0);
    m.standardizer_.constant.assign(inputs, false);
    return m;
  }

  static MlpClassifier fit(std::span<const Sample> train, const MlpOptions& opt = {}) {
    detail::require_two_classes(train);
    auto m = initialize(train.front().x.size(), opt);
    const auto canon = detail::canonical_order(train);
    m.standardizer_ = detail::canonical_standardizer(train, canon);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (auto i : canon) {
      rows.push_back(m.standardizer_.apply(train[i].x));
      labels.push_back(static_cast<int>(train[i].level));
    }
    Weights grad = m.zero_like();
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(opt.seed + 1);
    for (int e = 0; e < opt.epochs; ++e) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(opt.batch_size)) {
        const std::size_t end = std::min(order.size(), s + static_cast<std::size_t>(opt.batch_size));
        for (auto* t : grad.tensors()) std::fill(t->begin(), t->end(), 0.0);
        for (std::size_t q = s; q < end; ++q) m.accumulate(rows[order[q]], labels[order[q]], grad);
        const double step = opt.learning_rate / static_cast<double>(end - s);
        auto w = m.w_.tensors();
        auto g = grad.tensors();
        for (std::size_t t = 0; t < w.size(); ++t)
          for (std::size_t i = 0; i < w[t]->size(); ++i) (*w[t])[i] -= step * (*g[t])[i];
      }
    }
    return m;
  }

  Weights zero_like() const {
    Weights z = w_;
    for (auto* t : z.tensors()) std::fill(t->begin(), t->end(), 0.0);
    return z;
  }

  /// Cross-entropy of one standardized row; adds its gradient into grad.
  double accumulate(std::span<const double> z, int label, Weights& grad) const {
    const auto h1n = w_.b1.size(), h2n = w_.b2.size();
    std::vector<double> h1(h1n), h2(h2n);
    Scores p{};
    forward(z, h1, h2, p);
    Scores d3{};
    for (int c = 0; c < kNumLevels; ++c) d3[c] = p[c] - (c == label ? 1.0 : 0.0);
    std::vector<double> d2(h2n, 0.0), d1(h1n, 0.0);
    for (int c = 0; c < kNumLevels; ++c) {
      grad.b3[c] += d3[c];
      for (std::size_t j = 0; j < h2n; ++j) {
        grad.w3[c * h2n + j] += d3[c] * h2[j];
        d2[j] += d3[c] * w_.w3[c * h2n + j];
      }
    }
    for (std::size_t j = 0; j < h2n; ++j) {
      const double dz = d2[j] * h2[j] * (1.0 - h2[j]);
      grad.b2[j] += dz;
      for (std::size_t i = 0; i < h1n; ++i) {
        grad.w2[j * h1n + i] += dz * h1[i];
        d1[i] += dz * w_.w2[j * h1n + i];
      }
    }
    for (std::size_t i = 0; i < h1n; ++i) {
      const double dz = d1[i] * h1[i] * (1.0 - h1[i]);
      grad.b1[i] += dz;
      for (std::size_t k = 0; k < in_; ++k) grad.w1[i * in_ + k] += dz * z[k];
    }
    return -std::log(p[label]);
  }

  /// Class probabilities.
  Scores scores(std::span<const double> x) const {
    const auto z = standardizer_.apply(x);
    std::vector<double> h1(w_.b1.size()), h2(w_.b2.size());
    Scores p{};
    forward(z, h1, h2, p);
    return p;
  }

  DepressionLevel predict(std::span<const double> x) const { return argmax_level(scores(x)); }

  Weights& weights() { return w_; }
  const Weights& weights() const { return w_; }

 private:
  static double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

  void forward(std::span<const double> z, std::vector<double>& h1, std::vector<double>& h2, Scores& p) const {
    const auto h1n = h1.size(), h2n = h2.size();
    for (std::size_t i = 0; i < h1n; ++i) {
      double s = w_.b1[i];
      for (std::size_t k = 0; k < in_; ++k) s += w_.w1[i * in_ + k] * z[k];
      h1[i] = logistic(s);
    }
    for (std::size_t j = 0; j < h2n; ++j) {
      double s = w_.b2[j];
      for (std::size_t i = 0; i < h1n; ++i) s += w_.w2[j * h1n + i] * h1[i];
      h2[j] = logistic(s);
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < kNumLevels; ++c) {
      double s = w_.b3[c];
      for (std::size_t j = 0; j < h2n; ++j) s += w_.w3[c * h2n + j] * h2[j];
      p[c] = s;
      mx = std::max(mx, s);
    }
    double tot = 0.0;
    for (auto& v : p) tot += (v = std::exp(v - mx));
    for (auto& v : p) v /= tot;
  }

  MlpOptions opt_;
  std::size_t in_ = 0;
  Standardizer standardizer_;
  Weights w_;
};

// -------------------------------------------------------------- dispatch

enum class ClassifierKind { Svm, Knn, Mlp };

inline std::string_view to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::Svm: return "svm";
    case ClassifierKind::Knn: return "knn";
    case ClassifierKind::Mlp: return "mlp";
  }
  return "?";
}

inline ClassifierKind parse_classifier_kind(std::string_view s) {
  if (s == "svm") return ClassifierKind::Svm;
  if (s == "knn") return ClassifierKind::Knn;
  if (s == "mlp") return ClassifierKind::Mlp;
  throw PreconditionError("unknown classifier '" + std::string(s) + "' (svm, knn, mlp)");
}

struct ClassifierOptions {
  SvmOptions svm{};
  KnnOptions knn{};
  MlpOptions mlp{};
};

class AnyClassifier {
 public:
  static AnyClassifier fit(ClassifierKind kind, std::span<const Sample> train, const ClassifierOptions& opt = {}) {
    switch (kind) {
      case ClassifierKind::Svm: return AnyClassifier(SvmClassifier::fit(train, opt.svm));
      case ClassifierKind::Knn: return AnyClassifier(KnnClassifier::fit(train, opt.knn));
      case ClassifierKind::Mlp: return AnyClassifier(MlpClassifier::fit(train, opt.mlp));
    }
    throw PreconditionError("unknown classifier kind");
  }

  Scores scores(std::span<const double> x) const {
    return std::visit([&](const auto& m) { return m.scores(x); }, impl_);
  }
  DepressionLevel predict(std::span<const double> x) const { return argmax_level(scores(x)); }

 private:
  template <typename T>
  explicit AnyClassifier(T m) : impl_(std::move(m)) {}
  std::variant<SvmClassifier, KnnClassifier, MlpClassifier> impl_;
};

struct LevelPrediction {
  DepressionLevel level = DepressionLevel::Absence;
  Scores scores{};
};

}  // namespace hs::predict
