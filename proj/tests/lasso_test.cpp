#include <gtest/gtest.h>

#include "hs/lasso.hpp"
#include "oracles.hpp"

using namespace hs;
using namespace hs::predict;

namespace {

struct Planted {
  Matrix x;
  std::vector<double> y;
};

// y = 3 x1 - 2 x5 + N(0, 0.1^2) with 24 decoy columns.
Planted planted(std::uint64_t seed, std::size_t n = 100) {
  Rng rng(seed);
  std::normal_distribution<double> g(0, 1), noise(0, 0.1);
  Planted p{Matrix(n, 26), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 26; ++j) p.x(i, j) = g(rng);
    p.y[i] = 3 * p.x(i, 1) - 2 * p.x(i, 5) + noise(rng);
  }
  return p;
}

}  // namespace

TEST(Lasso, ZeroLambdaMatchesNormalEquations) {
  Rng rng(1);
  std::normal_distribution<double> g(0, 1);
  Matrix x(80, 6);
  std::vector<double> y(80);
  for (std::size_t i = 0; i < 80; ++i) {
    for (std::size_t j = 0; j < 6; ++j) x(i, j) = g(rng) * double(j + 1) + double(j);
    y[i] = 4 + 0.5 * x(i, 0) - 1.5 * x(i, 3) + g(rng);
  }
  LassoOptions opt;
  opt.tolerance = 1e-12;
  const auto m = fit_lasso(x, y, 0.0, opt);
  const auto [b0, raw] = m.raw_coefficients();
  const auto [ref0, ref] = oracle::least_squares(x, y);
  EXPECT_NEAR(b0, ref0, 1e-6);
  for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(raw[j], ref[j], 1e-6);
}

TEST(Lasso, LambdaMaxKillsAllSlopes) {
  const auto p = planted(3);
  const double lmax = lambda_max(p.x, p.y);
  for (double l : {lmax, 1.5 * lmax}) {
    const auto m = fit_lasso(p.x, p.y, l);
    EXPECT_TRUE(m.support().empty());
    EXPECT_NEAR(m.intercept, mean(p.y), 1e-12);
  }
  EXPECT_FALSE(fit_lasso(p.x, p.y, 0.95 * lmax).support().empty());
}

TEST(Lasso, PlantedSupportRecovered) {
  int hits = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto p = planted(100 + s);
    const auto m = fit_lasso_cv(p.x, p.y);
    hits += m.support() == std::vector<std::size_t>{1, 5};
  }
  EXPECT_GE(hits, 19);
}

TEST(Lasso, ObjectiveNeverIncreases) {
  LassoOptions opt;
  opt.record_objective = true;
  opt.tolerance = 1e-10;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto p = planted(s, 40);
    for (double l : {0.0, 0.01, 0.1, 0.5}) {
      const auto fit = fit_lasso_traced(p.x, p.y, l, opt);
      ASSERT_FALSE(fit.objective_trace.empty());
      for (std::size_t k = 1; k < fit.objective_trace.size(); ++k)
        EXPECT_LE(fit.objective_trace[k], fit.objective_trace[k - 1] + 1e-12) << s << " " << l << " " << k;
    }
  }
}

TEST(Lasso, ConstantColumnIgnored) {
  auto p = planted(4);
  for (std::size_t i = 0; i < p.x.rows; ++i) p.x(i, 0) = 7.0;
  const auto m = fit_lasso(p.x, p.y, 0.01);
  EXPECT_EQ(m.coef[0], 0.0);
  EXPECT_NEAR(m.coef[1] / m.scales[1], 3.0, 0.1);
}

TEST(Lasso, InputErrors) {
  Matrix x(3, 2);
  EXPECT_THROW(fit_lasso(Matrix{}, std::vector<double>{}, 0.1), PreconditionError);
  EXPECT_THROW(fit_lasso(x, std::vector<double>{1, 2}, 0.1), ShapeError);
  x(1, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(fit_lasso(x, std::vector<double>{1, 2, 3}, 0.1), PreconditionError);
}

TEST(Predict, HandModels) {
  LassoModel zero;
  zero.intercept = 6.5;
  zero.coef = {0, 0};
  zero.means = {1, 2};
  zero.scales = {1, 1};
  zero.constant = {false, false};
  EXPECT_EQ(predict_gds(zero, std::vector<double>{100, -3}), 6.5);

  LassoModel m;
  m.intercept = 2;
  m.coef = {1};
  m.means = {0};
  m.scales = {1};
  m.constant = {false};
  m.feature_names = {"ST_week"};
  EXPECT_DOUBLE_EQ(predict_gds(m, std::vector<double>{3}), 5.0);
  EXPECT_THROW(predict_gds(m, std::vector<double>{3, 4}), ShapeError);
  EXPECT_THROW(predict_gds(m, std::vector<double>{3}, std::vector<std::string>{"WT_week"}), ShapeError);
  EXPECT_DOUBLE_EQ(predict_gds(m, std::vector<double>{3}, std::vector<std::string>{"ST_week"}), 5.0);
}

TEST(Predict, ClampToScale) {
  EXPECT_EQ(to_gds_score(17.2).value(), 15);
  EXPECT_EQ(to_gds_score(-3).value(), 0);
  EXPECT_EQ(to_gds_score(4.4).value(), 4);
  for (double raw = -5; raw <= 20; raw += 0.25) {
    const int s = to_gds_score(raw).value();
    const auto lvl = classify_level(to_gds_score(raw));
    EXPECT_EQ(lvl, s < 5 ? DepressionLevel::Absence : s <= 9 ? DepressionLevel::MildModerate : DepressionLevel::Severe);
  }
}

TEST(Levels, Thresholds) {
  EXPECT_EQ(classify_level(4), DepressionLevel::Absence);
  EXPECT_EQ(classify_level(5), DepressionLevel::MildModerate);
  EXPECT_EQ(classify_level(9), DepressionLevel::MildModerate);
  EXPECT_EQ(classify_level(10), DepressionLevel::Severe);
  EXPECT_THROW(classify_level(16), RangeError);
  EXPECT_THROW(classify_level(-1), RangeError);
}

TEST(Rmsd, HandValues) {
  const std::vector<double> a = {1, 2, 3}, b = {2, 2, 5};
  EXPECT_NEAR(rmsd(a, b), std::sqrt(5.0 / 3.0), 1e-12);
  EXPECT_EQ(rmsd(a, a), 0.0);
  const std::vector<double> shifted = {1.75, 2.75, 3.75};
  EXPECT_NEAR(rmsd(shifted, a), 0.75, 1e-12);
  EXPECT_THROW(rmsd(a, std::vector<double>{1}), ShapeError);
  EXPECT_THROW(rmsd(std::vector<double>{}, std::vector<double>{}), PreconditionError);
}

TEST(LambdaSearch, GridAndRules) {
  const auto g = lambda_grid(2.0, 30, 1e-3);
  ASSERT_EQ(g.size(), 30u);
  EXPECT_DOUBLE_EQ(g.front(), 2.0);
  EXPECT_NEAR(g.back(), 2e-3, 1e-15);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_LT(g[i], g[i - 1]);

  const auto p = planted(9);
  LambdaSearch min_rule;
  min_rule.rule = LambdaRule::MinError;
  const auto c_min = select_lambda_cv(p.x, p.y, min_rule);
  const auto c_1se = select_lambda_cv(p.x, p.y);
  EXPECT_GE(c_1se.chosen, c_min.chosen);
  EXPECT_EQ(select_lambda_cv(p.x, p.y).chosen, c_1se.chosen);
}
