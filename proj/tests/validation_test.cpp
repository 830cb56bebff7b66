#include <gtest/gtest.h>

#include "hs/validation.hpp"

using namespace hs;
using namespace hs::predict;

namespace {

std::string pid(int k) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "P%02d", k + 1);
  return buf;
}

// Participants with a fixed level each; column 0 holds a participant-unique sentinel.
std::vector<Sample> cohort_like(const std::array<int, 3>& per_level, int weeks, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0, 1);
  std::vector<Sample> out;
  int k = 0;
  for (int lvl = 0; lvl < 3; ++lvl)
    for (int p = 0; p < per_level[lvl]; ++p, ++k)
      for (int w = 0; w < weeks; ++w) {
        Sample s;
        s.participant_id = pid(k);
        s.level = static_cast<DepressionLevel>(lvl);
        s.gds = 2 + 5 * lvl;
        s.x = {1000.0 + 17.0 * k, lvl + g(rng), g(rng), g(rng)};
        out.push_back(std::move(s));
      }
  return out;
}

// One informative column (index `informative`) among Gaussian noise.
std::vector<Sample> planted(int participants, int weeks, int width, std::size_t informative, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0, 1), noise(0, 0.7);
  std::vector<Sample> out;
  for (int p = 0; p < participants; ++p)
    for (int w = 0; w < weeks; ++w) {
      Sample s;
      s.participant_id = pid(p);
      s.x.resize(static_cast<std::size_t>(width));
      for (auto& v : s.x) v = g(rng);
      s.gds = std::clamp(std::round(7 + 3 * s.x[informative] + noise(rng)), 0.0, 15.0);
      s.level = classify_level(static_cast<int>(s.gds));
      out.push_back(std::move(s));
    }
  return out;
}

bool on_segment(const Sample& s, const Sample& a, const Sample& b) {
  for (std::size_t j = 0; j < s.x.size(); ++j) {
    const double want = a.x[j] + s.u * (b.x[j] - a.x[j]);
    if (std::abs(s.x[j] - want) > 1e-9) return false;
    const double lo = std::min(a.x[j], b.x[j]), hi = std::max(a.x[j], b.x[j]);
    if (s.x[j] < lo - 1e-9 || s.x[j] > hi + 1e-9) return false;
  }
  return s.u >= 0 && s.u <= 1;
}

}  // namespace

TEST(Loocv, OneFoldPerParticipantWithoutLeakage) {
  const auto data = cohort_like({23, 7, 3}, 4, 1);
  std::vector<std::set<double>> seen;
  const auto folds = loocv(
      data,
      [&](std::span<const Sample> train) {
        std::set<double> s;
        for (const auto& t : train) s.insert(t.x[0]);
        seen.push_back(std::move(s));
        return [](const Sample& x) { return x.participant_id; };
      },
      {Balance::Oversample, 3});
  ASSERT_EQ(folds.size(), 33u);
  std::set<std::string> tested;
  std::size_t covered = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    tested.insert(folds[f].participant_id);
    covered += folds[f].test_indices.size();
    EXPECT_FALSE(folds[f].train_participants.contains(folds[f].participant_id));
    const double sentinel = data[folds[f].test_indices.front()].x[0];
    EXPECT_FALSE(seen[f].contains(sentinel)) << folds[f].participant_id;
    for (const auto& p : folds[f].predictions) EXPECT_EQ(p, folds[f].participant_id);
  }
  EXPECT_EQ(tested.size(), 33u);
  EXPECT_EQ(covered, data.size());
}

TEST(Loocv, BalancingOnlyInsideTrainingFolds) {
  const auto data = cohort_like({23, 7, 3}, 2, 2);
  const auto folds = loocv(
      data,
      [&](std::span<const Sample> train) {
        const auto c = level_counts(train);
        const auto m = *std::max_element(c.begin(), c.end());
        for (auto v : c) EXPECT_EQ(v, m);
        return [](const Sample& s) { return s.synthetic; };
      },
      {Balance::Oversample, 5});
  // test rows are always the untouched originals
  for (const auto& f : folds)
    for (bool synthetic : f.predictions) EXPECT_FALSE(synthetic);
}

TEST(Loocv, DeterministicAndNeedsTwoParticipants) {
  const auto data = cohort_like({4, 2, 2}, 3, 3);
  auto run = [&] {
    return loocv(
        data, [](std::span<const Sample> train) {
          double s = 0;
          for (const auto& t : train) s += t.x[1];
          return [s](const Sample&) { return s; };
        },
        {Balance::Oversample, 9});
  };
  const auto a = run(), b = run();
  for (std::size_t f = 0; f < a.size(); ++f) EXPECT_EQ(a[f].predictions, b[f].predictions);
  const auto one = cohort_like({1, 0, 0}, 3, 3);
  EXPECT_THROW(loocv(one, [](std::span<const Sample>) { return [](const Sample&) { return 0; }; }), PreconditionError);
}

TEST(Oversample, EqualizesToMajority) {
  const auto data = cohort_like({23, 7, 3}, 1, 4);
  const auto out = oversample(data, 1);
  const auto c = level_counts(out);
  EXPECT_EQ(c, (std::array<std::size_t, 3>{23, 23, 23}));
  for (std::size_t i = 0; i < data.size(); ++i) EXPECT_EQ(out[i].x, data[i].x);
}

TEST(Oversample, SyntheticPointsAreConvexCombinations) {
  const auto data = cohort_like({23, 7, 3}, 2, 5);
  const auto out = oversample(data, 2);
  std::size_t synthetic = 0;
  for (const auto& s : out) {
    if (!s.synthetic) continue;
    ++synthetic;
    const auto& a = data[s.source_a];
    const auto& b = data[s.source_b];
    EXPECT_EQ(a.level, s.level);
    EXPECT_EQ(b.level, s.level);
    EXPECT_NE(s.source_a, s.source_b);
    EXPECT_TRUE(on_segment(s, a, b));
  }
  EXPECT_EQ(synthetic, out.size() - data.size());
}

TEST(Oversample, BalancedInputUnchangedAndSingletonDuplicated) {
  const auto data = cohort_like({3, 3, 3}, 1, 6);
  const auto out = oversample(data, 7);
  ASSERT_EQ(out.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) EXPECT_EQ(out[i].x, data[i].x);

  const auto skew = cohort_like({3, 1, 0}, 1, 6);
  const auto dup = oversample(skew, 7);
  EXPECT_EQ(level_counts(dup), (std::array<std::size_t, 3>{3, 3, 0}));
  for (const auto& s : dup)
    if (s.synthetic) {
      EXPECT_EQ(s.x, skew[3].x);
    }
  OversampleOptions need;
  need.required = {DepressionLevel::Severe};
  EXPECT_THROW(oversample(skew, 7, need), PreconditionError);
}

TEST(Undersample, EqualizesToMinority) {
  const auto data = cohort_like({23, 7, 3}, 1, 8);
  EXPECT_EQ(level_counts(undersample(data, 1)), (std::array<std::size_t, 3>{3, 3, 3}));
}

TEST(Wrapper, PlantedFeaturePickedFirst) {
  int first = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const std::size_t informative = seed % 6;
    const auto data = planted(12, 4, 6, informative, 50 + seed);
    std::vector<std::size_t> cand(6);
    std::iota(cand.begin(), cand.end(), 0);
    const auto r = wrapper_select(cand, [&](std::span<const std::size_t> cols) {
      return lasso_loocv_rmsd(data, cols, 0.05);
    });
    ASSERT_FALSE(r.selected.empty());
    first += r.selected.front() == informative;
    EXPECT_LE(r.rmsd, r.full_rmsd);
  }
  EXPECT_GE(first, 5);
}

TEST(Wrapper, StopsWhenNothingHelpsAndRejectsEmpty) {
  // evaluator with a unique optimum at {2, 4}
  auto eval = [](std::span<const std::size_t> cols) {
    std::set<std::size_t> s(cols.begin(), cols.end());
    double score = 10;
    if (s.contains(2)) score -= 3;
    if (s.contains(4)) score -= 2;
    return score + 0.5 * static_cast<double>(s.size() - s.contains(2) - s.contains(4));
  };
  const std::vector<std::size_t> cand = {0, 1, 2, 3, 4};
  const auto r = wrapper_select(cand, eval);
  EXPECT_EQ(r.selected, (std::vector<std::size_t>{2, 4}));
  EXPECT_EQ(r.rmsd, 5.0);
  EXPECT_EQ(r.full_rmsd, 6.5);
  EXPECT_THROW(wrapper_select({}, eval), PreconditionError);
}

TEST(Wrapper, FallsBackToFullSetWhenBetter) {
  // only the complete set scores well
  auto eval = [](std::span<const std::size_t> cols) { return cols.size() == 3 ? 1.0 : 5.0; };
  const std::vector<std::size_t> cand = {0, 1, 2};
  const auto r = wrapper_select(cand, eval);
  EXPECT_TRUE(r.fell_back_to_full);
  EXPECT_EQ(r.selected, cand);
  EXPECT_EQ(r.rmsd, 1.0);
}
