#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hs/error.hpp"
#include "hs/types.hpp"
#include "hs/util.hpp"

namespace hs::predict {

/// A rate that may be undefined (empty denominator). Never NaN.
using Rate = std::optional<double>;

inline std::string format_rate(const Rate& r, int digits = 6) {
  return r ? format_fixed(*r, digits) : std::string("undefined");
}

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) first, (1,1) last
  double auc = 0.0;
};

/// Sweeps the threshold down through every distinct score; samples scoring
/// at or above the threshold are called positive. Undefined without both
/// positives and negatives.
inline std::optional<RocCurve> roc_curve(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.size() != positive.size()) throw ShapeError("roc: length mismatch");
  const auto pos = static_cast<double>(std::count(positive.begin(), positive.end(), true));
  const auto neg = static_cast<double>(positive.size()) - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  RocCurve roc;
  roc.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  double tp = 0, fp = 0;
  for (std::size_t k = 0; k < idx.size();) {
    const double thr = scores[idx[k]];
    while (k < idx.size() && scores[idx[k]] == thr) {
      (positive[idx[k]] ? tp : fp) += 1;
      ++k;
    }
    roc.points.push_back({thr, fp / neg, tp / pos});
  }
  roc.points.push_back({-std::numeric_limits<double>::infinity(), 1.0, 1.0});
  for (std::size_t k = 1; k < roc.points.size(); ++k) {
    const auto& a = roc.points[k - 1];
    const auto& b = roc.points[k];
    roc.auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  return roc;
}

struct ClassMetrics {
  std::size_t support = 0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  Rate sensitivity, specificity, precision, f1, accuracy;
  std::optional<RocCurve> roc;
};

struct EvalReport {
  std::array<std::array<std::size_t, kNumLevels>, kNumLevels> confusion{};  // [truth][predicted]
  std::array<ClassMetrics, kNumLevels> per_class{};
  double accuracy = 0.0;            // trace / total
  Rate macro_accuracy;              // mean one-vs-rest accuracy over classes present
  Rate balanced_accuracy;           // mean sensitivity over classes present
  std::size_t total = 0;
};

inline Rate ratio(double num, double den) {
  if (den == 0) return std::nullopt;
  return num / den;
}

/// One-vs-rest metrics per level. `scores`, when given, holds one score per
/// class per sample and drives the ROC curves.
inline EvalReport evaluate(std::span<const DepressionLevel> predictions, std::span<const DepressionLevel> truths,
                           std::span<const std::array<double, kNumLevels>> scores = {}) {
  if (predictions.size() != truths.size()) throw ShapeError("evaluate: length mismatch");
  if (truths.empty()) throw PreconditionError("evaluate: no samples");
  if (!scores.empty() && scores.size() != truths.size()) throw ShapeError("evaluate: score count mismatch");
  EvalReport r;
  r.total = truths.size();
  for (std::size_t i = 0; i < truths.size(); ++i)
    ++r.confusion[static_cast<int>(truths[i])][static_cast<int>(predictions[i])];
  std::size_t trace = 0;
  for (int c = 0; c < kNumLevels; ++c) trace += r.confusion[c][c];
  r.accuracy = static_cast<double>(trace) / static_cast<double>(r.total);

  double acc_sum = 0, sens_sum = 0;
  int present = 0;
  for (int c = 0; c < kNumLevels; ++c) {
    auto& m = r.per_class[c];
    m.tp = r.confusion[c][c];
    for (int k = 0; k < kNumLevels; ++k) {
      m.support += r.confusion[c][k];
      if (k != c) {
        m.fn += r.confusion[c][k];
        m.fp += r.confusion[k][c];
      }
    }
    m.tn = r.total - m.tp - m.fp - m.fn;
    m.sensitivity = ratio(double(m.tp), double(m.tp + m.fn));
    m.specificity = ratio(double(m.tn), double(m.tn + m.fp));
    m.precision = ratio(double(m.tp), double(m.tp + m.fp));
    m.f1 = m.support == 0 ? Rate{} : ratio(2.0 * m.tp, 2.0 * m.tp + m.fp + m.fn);
    m.accuracy = m.support == 0 ? Rate{} : ratio(double(m.tp + m.tn), double(r.total));
    if (m.support > 0) {
      ++present;
      acc_sum += *m.accuracy;
      sens_sum += *m.sensitivity;
    }
    if (!scores.empty()) {
      std::vector<double> s(truths.size());
      auto posv = std::make_unique<bool[]>(truths.size());
      for (std::size_t i = 0; i < truths.size(); ++i) {
        s[i] = scores[i][c];
        posv[i] = static_cast<int>(truths[i]) == c;
      }
      m.roc = roc_curve(s, std::span<const bool>(posv.get(), truths.size()));
    }
  }
  if (present > 0) {
    r.macro_accuracy = acc_sum / present;
    r.balanced_accuracy = sens_sum / present;
  }
  return r;
}

/// class,support,sensitivity,specificity,precision,f1,accuracy,auc followed by an overall row.
inline std::string format_metrics_csv(const EvalReport& r) {
  std::string out = "class,support,sensitivity,specificity,precision,f1,accuracy,auc\n";
  for (int c = 0; c < kNumLevels; ++c) {
    const auto& m = r.per_class[c];
    out += std::string(to_string(static_cast<DepressionLevel>(c))) + "," + std::to_string(m.support) + "," +
           format_rate(m.sensitivity) + "," + format_rate(m.specificity) + "," + format_rate(m.precision) + "," +
           format_rate(m.f1) + "," + format_rate(m.accuracy) + "," +
           (m.roc ? format_fixed(m.roc->auc, 6) : std::string("undefined")) + "\n";
  }
  out += "overall," + std::to_string(r.total) + ",,,,," + format_fixed(r.accuracy, 6) + ",\n";
  out += "macro,," + format_rate(r.balanced_accuracy) + ",,,," + format_rate(r.macro_accuracy) + ",\n";
  return out;
}

inline std::string format_threshold(double t) {
  if (std::isinf(t)) return t > 0 ? "inf" : "-inf";
  return format_double(t);
}

/// class,threshold,fpr,tpr; classes with undefined curves are omitted.
inline std::string format_roc_csv(const EvalReport& r) {
  std::string out = "class,threshold,fpr,tpr\n";
  for (int c = 0; c < kNumLevels; ++c) {
    const auto& roc = r.per_class[c].roc;
    if (!roc) continue;
    for (const auto& p : roc->points)
      out += std::string(to_string(static_cast<DepressionLevel>(c))) + "," + format_threshold(p.threshold) + "," +
             format_double(p.fpr) + "," + format_double(p.tpr) + "\n";
  }
  return out;
}

}  // namespace hs::predict
