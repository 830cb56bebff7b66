#include <gtest/gtest.h>

#include "hs/classifiers.hpp"

using namespace hs;
using namespace hs::predict;

namespace {

std::vector<Sample> blobs(int per_class, double spread, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0, spread);
  const std::array<std::array<double, 3>, 3> centers = {{{0, 0, 0}, {6, 0, 3}, {0, 6, -3}}};
  std::vector<Sample> out;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < per_class; ++i) {
      Sample s;
      s.participant_id = "P" + std::to_string(i);
      s.level = static_cast<DepressionLevel>(c);
      for (double m : centers[c]) s.x.push_back(m + g(rng));
      out.push_back(std::move(s));
    }
  return out;
}

template <typename M>
double train_accuracy(const M& m, std::span<const Sample> data) {
  int hit = 0;
  for (const auto& s : data) hit += m.predict(s.x) == s.level;
  return double(hit) / double(data.size());
}

}  // namespace

TEST(Classifiers, SeparableBlobsFitPerfectly) {
  const auto data = blobs(20, 0.5, 1);
  EXPECT_DOUBLE_EQ(train_accuracy(SvmClassifier::fit(data), data), 1.0);
  EXPECT_DOUBLE_EQ(train_accuracy(KnnClassifier::fit(data), data), 1.0);
  EXPECT_DOUBLE_EQ(train_accuracy(MlpClassifier::fit(data), data), 1.0);
  for (auto kind : {ClassifierKind::Svm, ClassifierKind::Knn, ClassifierKind::Mlp})
    EXPECT_DOUBLE_EQ(train_accuracy(AnyClassifier::fit(kind, data), data), 1.0) << to_string(kind);
}

TEST(Classifiers, SingleNeighborMemorizes) {
  const auto data = blobs(15, 4.0, 2);  // heavily overlapping
  KnnOptions opt;
  opt.k = 1;
  EXPECT_DOUBLE_EQ(train_accuracy(KnnClassifier::fit(data, opt), data), 1.0);
  opt.k = 0;
  EXPECT_THROW(KnnClassifier::fit(data, opt), PreconditionError);
}

TEST(Classifiers, SvmOrderInvariant) {
  auto data = blobs(15, 1.5, 3);
  const auto a = SvmClassifier::fit(data);
  Rng rng(4);
  std::shuffle(data.begin(), data.end(), rng);
  const auto b = SvmClassifier::fit(data);
  for (const auto& s : blobs(5, 2.0, 8)) {
    const auto da = a.decision(s.x), db = b.decision(s.x);
    for (int c = 0; c < 3; ++c) EXPECT_EQ(da[c], db[c]);
  }
}

TEST(Classifiers, SvmAbsentClassScoresMinusInfinity) {
  auto data = blobs(10, 0.5, 5);
  data.erase(std::remove_if(data.begin(), data.end(), [](const Sample& s) { return s.level == DepressionLevel::Severe; }),
             data.end());
  const auto m = SvmClassifier::fit(data);
  EXPECT_TRUE(std::isinf(m.decision(data[0].x)[2]));
  EXPECT_NE(m.predict(data[0].x), DepressionLevel::Severe);
}

TEST(Classifiers, SingleClassRejected) {
  auto data = blobs(10, 0.5, 5);
  data.resize(10);
  EXPECT_THROW(SvmClassifier::fit(data), TrainingError);
  EXPECT_THROW(KnnClassifier::fit(data), TrainingError);
  EXPECT_THROW(MlpClassifier::fit(data), TrainingError);
  EXPECT_THROW(parse_classifier_kind("tree"), PreconditionError);
}

TEST(Classifiers, KnnScoresAreVoteFractions) {
  const auto data = blobs(10, 0.5, 6);
  const auto m = KnnClassifier::fit(data);
  const auto s = m.scores(data[0].x);
  EXPECT_NEAR(s[0] + s[1] + s[2], 1.0, 1e-12);
  for (double v : s) EXPECT_NEAR(v * 5, std::round(v * 5), 1e-12);
}

TEST(Classifiers, MlpGradientMatchesFiniteDifferences) {
  MlpOptions opt;
  opt.hidden1 = 5;
  opt.hidden2 = 4;
  opt.seed = 11;
  auto m = MlpClassifier::initialize(3, opt);
  const auto data = blobs(2, 1.0, 7);  // 6 points, use the first 5
  auto loss = [&](const MlpClassifier& net) {
    double l = 0;
    for (int i = 0; i < 5; ++i) l -= std::log(net.scores(data[i].x)[static_cast<int>(data[i].level)]);
    return l;
  };
  auto grad = m.zero_like();
  double analytic_loss = 0;
  for (int i = 0; i < 5; ++i) analytic_loss += m.accumulate(data[i].x, static_cast<int>(data[i].level), grad);
  EXPECT_NEAR(analytic_loss, loss(m), 1e-12);
  const double eps = 1e-6;
  auto w = m.weights().tensors();
  const auto g = grad.tensors();
  for (std::size_t t = 0; t < w.size(); ++t)
    for (std::size_t i = 0; i < w[t]->size(); ++i) {
      double& v = (*w[t])[i];
      const double saved = v;
      v = saved + eps;
      const double up = loss(m);
      v = saved - eps;
      const double down = loss(m);
      v = saved;
      const double numeric = (up - down) / (2 * eps);
      const double a = (*g[t])[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-5});
      EXPECT_LT(rel, 1e-4) << "tensor " << t << " entry " << i << " analytic " << a << " numeric " << numeric;
    }
}

TEST(Classifiers, MlpDeterministic) {
  const auto data = blobs(10, 1.0, 9);
  const auto a = MlpClassifier::fit(data), b = MlpClassifier::fit(data);
  for (const auto& s : data) EXPECT_EQ(a.scores(s.x), b.scores(s.x));
}
