#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hs/error.hpp"
#include "hs/lasso.hpp"
#include "hs/types.hpp"
#include "hs/util.hpp"

namespace hs::predict {

/// One labeled participant-week as seen by the learners.
struct Sample {
  std::string participant_id;
  std::vector<double> x;
  DepressionLevel level = DepressionLevel::Absence;
  double gds = 0.0;
  // provenance of oversampled points: x = x[source_a] + u * (x[source_b] - x[source_a])
  bool synthetic = false;
  std::size_t source_a = 0;
  std::size_t source_b = 0;
  double u = 0.0;
};

inline Matrix design_matrix(std::span<const Sample> s, std::span<const std::size_t> cols = {}) {
  if (s.empty()) return {};
  const std::size_t width = cols.empty() ? s.front().x.size() : cols.size();
  Matrix m(s.size(), width);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (cols.empty()) {
      if (s[i].x.size() != width) throw ShapeError("ragged samples");
      std::copy(s[i].x.begin(), s[i].x.end(), m.row(i).begin());
    } else {
      for (std::size_t j = 0; j < width; ++j) m(i, j) = s[i].x.at(cols[j]);
    }
  }
  return m;
}

inline std::vector<double> gds_targets(std::span<const Sample> s) {
  std::vector<double> y;
  y.reserve(s.size());
  for (const auto& v : s) y.push_back(v.gds);
  return y;
}

inline std::array<std::size_t, kNumLevels> level_counts(std::span<const Sample> s) {
  std::array<std::size_t, kNumLevels> c{};
  for (const auto& v : s) ++c[static_cast<int>(v.level)];
  return c;
}

// ----------------------------------------------------------- re-balancing

struct OversampleOptions {
  int neighbors = 3;
  /// Classes that must be present; absence raises PreconditionError.
  std::vector<DepressionLevel> required{};
};

/// Raises every present minority class to the majority count. New points lie
/// on the segment between a sampled member and one of its nearest same-class
/// neighbors (distances on standardized features); a class with a single
/// member is duplicated instead.
inline std::vector<Sample> oversample(std::span<const Sample> train, std::uint64_t seed,
                                      const OversampleOptions& opt = {}) {
  if (train.empty()) throw PreconditionError("oversample: empty training set");
  const auto counts = level_counts(train);
  for (auto lvl : opt.required)
    if (counts[static_cast<int>(lvl)] == 0)
      throw PreconditionError("oversample: class " + std::string(to_string(lvl)) + " is empty");
  const std::size_t majority = *std::max_element(counts.begin(), counts.end());

  const auto st = Standardizer::fit(design_matrix(train));
  std::vector<std::vector<double>> z;
  z.reserve(train.size());
  for (const auto& s : train) z.push_back(st.apply(s.x));
  auto dist2 = [&](std::size_t a, std::size_t b) {
    double d = 0.0;
    for (std::size_t j = 0; j < z[a].size(); ++j) d += (z[a][j] - z[b][j]) * (z[a][j] - z[b][j]);
    return d;
  };

  std::vector<Sample> out(train.begin(), train.end());
  Rng rng(seed);
  for (int c = 0; c < kNumLevels; ++c) {
    if (counts[c] == 0 || counts[c] == majority) continue;
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < train.size(); ++i)
      if (static_cast<int>(train[i].level) == c) members.push_back(i);
    // k nearest same-class neighbors of every member, each computed once
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(opt.neighbors), members.size() - 1);
    std::vector<std::vector<std::size_t>> nearest(members.size());
    if (k > 0) {
      for (std::size_t mi = 0; mi < members.size(); ++mi) {
        std::vector<std::pair<double, std::size_t>> d;
        d.reserve(members.size() - 1);
        for (std::size_t mj = 0; mj < members.size(); ++mj)
          if (mj != mi) d.push_back({dist2(members[mi], members[mj]), members[mj]});
        std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
        for (std::size_t q = 0; q < k; ++q) nearest[mi].push_back(d[q].second);
      }
    }
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t made = counts[c]; made < majority; ++made) {
      const std::size_t mi = pick(rng);
      const std::size_t a = members[mi];
      Sample s = train[a];
      s.synthetic = true;
      s.source_a = a;
      s.source_b = a;
      if (k > 0) {
        const std::size_t b = nearest[mi][std::uniform_int_distribution<std::size_t>(0, k - 1)(rng)];
        const double u = unit(rng);
        for (std::size_t j = 0; j < s.x.size(); ++j) s.x[j] = train[a].x[j] + u * (train[b].x[j] - train[a].x[j]);
        s.gds = train[a].gds + u * (train[b].gds - train[a].gds);
        s.source_b = b;
        s.u = u;
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

/// Reduces every present class to the minority count by seeded sampling without replacement.
inline std::vector<Sample> undersample(std::span<const Sample> train, std::uint64_t seed) {
  if (train.empty()) throw PreconditionError("undersample: empty training set");
  const auto counts = level_counts(train);
  std::size_t minority = std::numeric_limits<std::size_t>::max();
  for (auto c : counts)
    if (c > 0) minority = std::min(minority, c);
  Rng rng(seed);
  std::vector<Sample> out;
  for (int c = 0; c < kNumLevels; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < train.size(); ++i)
      if (static_cast<int>(train[i].level) == c) members.push_back(i);
    std::shuffle(members.begin(), members.end(), rng);
    members.resize(std::min(members.size(), minority));
    std::sort(members.begin(), members.end());
    for (auto i : members) out.push_back(train[i]);
  }
  return out;
}

// ------------------------------------------------------------------ LOOCV

enum class Balance { None, Oversample, Undersample };

struct LoocvOptions {
  Balance balance = Balance::None;
  std::uint64_t seed = 1;
};

template <typename R>
struct Fold {
  std::string participant_id;
  std::vector<std::size_t> test_indices;
  std::vector<R> predictions;
  std::set<std::string> train_participants;
  std::size_t train_size = 0;
};

inline std::vector<std::string> participants_of(std::span<const Sample> data) {
  std::set<std::string> ids;
  for (const auto& s : data) ids.insert(s.participant_id);
  return {ids.begin(), ids.end()};
}

/// Leave-one-participant-out. `fit(train)` returns a predictor callable on a
/// Sample; re-balancing, when enabled, sees only the training participants.
template <typename FitFn>
auto loocv(std::span<const Sample> data, FitFn&& fit, const LoocvOptions& opt = {}) {
  using Predictor = std::invoke_result_t<FitFn&, std::span<const Sample>>;
  using R = std::invoke_result_t<Predictor&, const Sample&>;
  const auto ids = participants_of(data);
  if (ids.size() < 2) throw PreconditionError("loocv: need at least 2 participants");
  std::vector<Fold<R>> folds;
  folds.reserve(ids.size());
  for (std::size_t f = 0; f < ids.size(); ++f) {
    Fold<R> fold;
    fold.participant_id = ids[f];
    std::vector<Sample> train;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data[i].participant_id == ids[f]) {
        fold.test_indices.push_back(i);
      } else {
        train.push_back(data[i]);
        fold.train_participants.insert(data[i].participant_id);
      }
    }
    const std::uint64_t fold_seed = opt.seed * 1000003ULL + f;
    if (opt.balance == Balance::Oversample) train = oversample(train, fold_seed);
    if (opt.balance == Balance::Undersample) train = undersample(train, fold_seed);
    for (const auto& s : train)
      if (s.participant_id == ids[f]) throw std::logic_error("loocv: test participant leaked into training");
    fold.train_size = train.size();
    auto predictor = fit(std::span<const Sample>(train));
    for (auto i : fold.test_indices) fold.predictions.push_back(predictor(data[i]));
    folds.push_back(std::move(fold));
  }
  return folds;
}

/// Predictions re-assembled in dataset order.
template <typename R>
std::vector<R> gather(std::span<const Fold<R>> folds, std::size_t n) {
  std::vector<R> out(n);
  for (const auto& f : folds)
    for (std::size_t k = 0; k < f.test_indices.size(); ++k) out[f.test_indices[k]] = f.predictions[k];
  return out;
}

/// LOOCV RMSD of a fixed-lambda lasso on a column subset. An empty subset is
/// the intercept-only model.
inline double lasso_loocv_rmsd(std::span<const Sample> data, std::span<const std::size_t> cols, double lambda,
                               const LoocvOptions& opt = {}) {
  const std::vector<std::size_t> subset(cols.begin(), cols.end());
  auto folds = loocv(
      data,
      [&](std::span<const Sample> train) -> std::function<double(const Sample&)> {
        if (subset.empty()) {
          const double m = mean(gds_targets(train));
          return [m](const Sample&) { return m; };
        }
        auto model = fit_lasso(design_matrix(train, subset), gds_targets(train), lambda);
        return [model = std::move(model), &subset](const Sample& s) {
          std::vector<double> x;
          for (auto c : subset) x.push_back(s.x[c]);
          return predict_gds(model, x);
        };
      },
      opt);
  const auto pred = gather<double>(folds, data.size());
  return rmsd(pred, gds_targets(data));
}

// --------------------------------------------------------- wrapper search

struct WrapperResult {
  std::vector<std::size_t> selected;  // in order of addition
  std::vector<double> rmsd_trace;     // evaluator score after each addition
  double rmsd = 0.0;                  // score of the returned subset
  double full_rmsd = 0.0;             // score with every candidate
  bool fell_back_to_full = false;
};

using SubsetEvaluator = std::function<double(std::span<const std::size_t>)>;

/// Greedy forward selection: add the candidate that lowers the evaluator the
/// most, stop once no addition improves by more than min_gain, and return the
/// full candidate set instead if that scores better still.
inline WrapperResult wrapper_select(std::span<const std::size_t> candidates, const SubsetEvaluator& evaluate,
                                    double min_gain = 1e-6) {
  if (candidates.empty()) throw PreconditionError("wrapper_select: no candidate features");
  WrapperResult res;
  std::vector<std::size_t> current;
  double best = evaluate(current);
  std::vector<std::size_t> remaining(candidates.begin(), candidates.end());
  while (!remaining.empty()) {
    double step_best = std::numeric_limits<double>::infinity();
    std::size_t step_pick = 0;
    for (std::size_t r = 0; r < remaining.size(); ++r) {
      auto trial = current;
      trial.push_back(remaining[r]);
      const double score = evaluate(trial);
      if (score < step_best) {
        step_best = score;
        step_pick = r;
      }
    }
    if (!(step_best < best - min_gain)) break;
    best = step_best;
    current.push_back(remaining[step_pick]);
    res.rmsd_trace.push_back(step_best);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(step_pick));
  }
  res.full_rmsd = evaluate(candidates);
  if (current.empty() || res.full_rmsd < best) {
    res.selected.assign(candidates.begin(), candidates.end());
    res.rmsd = res.full_rmsd;
    res.fell_back_to_full = true;
  } else {
    res.selected = std::move(current);
    res.rmsd = best;
  }
  return res;
}

}  // namespace hs::predict
