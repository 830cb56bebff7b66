#include <gtest/gtest.h>

#include <sstream>

#include "hs/cohort.hpp"
#include "hs/har.hpp"
#include "oracles.hpp"

using namespace hs;
using namespace hs::har;

TEST(LayerAccounting, StandardConvolution) {
  EXPECT_EQ(std_conv_weights({3, 60, 60, 1, 1, 1}), 10'800);
  EXPECT_EQ(std_conv_weights({1, 1, 1, 1, 1, 1}), 1);
  EXPECT_EQ(std_conv_weights({2, 4, 3, 1, 1, 1}), 24);
  EXPECT_EQ(std_conv_cost({3, 60, 60, 1, 121, 1}), 1'306'800);
  EXPECT_EQ(std_conv_cost({1, 1, 1, 1, 1, 1}), 1);
}

TEST(LayerAccounting, DepthwiseConvolution) {
  EXPECT_EQ(dw_conv_weights({3, 60, 60, 1, 1, 1, true}), 3'600);
  EXPECT_EQ(dw_conv_weights({1, 1, 1, 1, 1, 1, true}), 1);
  EXPECT_EQ(dw_conv_cost({3, 60, 60, 1, 121, 1, true}), 435'600);
  EXPECT_EQ(dw_conv_cost({1, 1, 1, 1, 1, 1, true}), 1);
  const ConvSpec s{3, 60, 60, 1, 121, 1, true};
  EXPECT_EQ(std_conv_weights(s), 3 * dw_conv_weights(s));
}

TEST(LayerAccounting, ModelTensorsMatchFormulas) {
  const Architecture a;
  const auto p = Params::zeros(a);
  EXPECT_EQ(static_cast<std::int64_t>(p.dw_w.size()), dw_conv_weights(a.depthwise_spec()));
  EXPECT_EQ(static_cast<std::int64_t>(p.pw_w.size()), std_conv_weights(a.pointwise_spec()));
  EXPECT_EQ(static_cast<std::int64_t>(p.c2_w.size()), std_conv_weights(a.conv2_spec()));
  EXPECT_EQ(a.depthwise_spec().f_w, 121);
  EXPECT_THROW((ConvSpec{3, 61, 1, 1, 1, 1, true}.validate()), SpecError);
  EXPECT_THROW((ConvSpec{0, 1, 1, 1, 1, 1}.validate()), SpecError);
}

TEST(Architecture, ShapeChain) {
  const Architecture a;
  EXPECT_EQ(a.dw_channels(), 60);
  EXPECT_EQ(a.conv1_len(), 121);
  EXPECT_EQ(a.pool_out_len(), 51);
  EXPECT_EQ(a.conv2_len(), 46);
  EXPECT_EQ(a.flat_size(), 276);
  EXPECT_NO_THROW(a.validate());
  auto bad = a;
  bad.conv2_kernel = 60;
  EXPECT_THROW(bad.validate(), ShapeError);
}

TEST(Depthwise, EqualsMaterializedStandardConvolution) {
  Rng rng(5);
  std::normal_distribution<double> n(0, 1);
  const int c = 3, m = 20, k = 60, len = 180;
  std::vector<double> w(static_cast<std::size_t>(c) * m * k), b(c * m);
  for (auto& v : w) v = n(rng);
  for (auto& v : b) v = n(rng);
  const auto dense_w = oracle::materialize_depthwise(w, c, m, k);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> in(static_cast<std::size_t>(c) * len);
    for (auto& v : in) v = n(rng);
    std::vector<double> out(static_cast<std::size_t>(c) * m * (len - k + 1));
    ops::depthwise_conv1d(in, c, len, w, b, m, k, out);
    const auto ref = oracle::dense_conv(in, c, len, dense_w, b, c * m, k);
    for (std::size_t i = 0; i < out.size(); ++i) ASSERT_NEAR(out[i], ref[i], 1e-9);
  }
}

TEST(Depthwise, SeparableBlockEqualsCollapsedConvolution) {
  const Architecture a;
  const auto model = CnnModel::initialize(a, 9);
  const auto [w, b] = oracle::collapse_separable(a, model.params);
  Rng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    const auto win = oracle::random_window(a.input_len, rng);
    Workspace ws(a);
    detail::load_input(a, win, ws.input);
    ops::depthwise_conv1d(ws.input, 3, a.input_len, model.params.dw_w, model.params.dw_b, a.dw_multiplier,
                          a.conv1_kernel, ws.a1);
    ops::pointwise_conv1d(ws.a1, a.dw_channels(), a.conv1_len(), model.params.pw_w, model.params.pw_b, a.conv1_depth,
                          ws.a2);
    const auto ref = oracle::dense_conv(ws.input, 3, a.input_len, w, b, a.conv1_depth, a.conv1_kernel);
    for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(ws.a2[i], ref[i], 1e-9);
  }
}

TEST(Forward, ZeroModelIsUniformAndPredictsSitting) {
  CnnModel m{Architecture{}, Params::zeros(Architecture{}), {}};
  Rng rng(1);
  const auto w = oracle::random_window(180, rng);
  const auto p = forward(m, w);
  ASSERT_EQ(p.size(), 6u);
  for (double v : p) EXPECT_NEAR(v, 1.0 / 6.0, 1e-12);
  EXPECT_EQ(predict(m, w), ActivityLabel::Sitting);
}

TEST(Forward, ProbabilitiesSumToOneAndArgmaxWins) {
  auto m = CnnModel::initialize(Architecture{}, 3);
  Rng rng(2);
  for (int i = 0; i < 5; ++i) {
    const auto p = forward(m, oracle::random_window(180, rng, 3.0));
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-6);
  }
  CnnModel z{Architecture{}, Params::zeros(Architecture{}), {}};
  z.params.out_b = {std::log(0.01), std::log(0.9), std::log(0.02), std::log(0.03), std::log(0.02), std::log(0.02)};
  const auto w = oracle::random_window(180, rng);
  EXPECT_NEAR(forward(z, w)[1], 0.9, 1e-12);
  EXPECT_EQ(predict(z, w), ActivityLabel::Walking);
}

TEST(Forward, ShapeMismatchRejected) {
  const auto m = CnnModel::initialize(Architecture{}, 3);
  Rng rng(2);
  EXPECT_THROW(forward(m, oracle::random_window(179, rng)), ShapeError);
  auto broken = m;
  broken.params.fc_w.pop_back();
  EXPECT_THROW(broken.validate(), ShapeError);
}

TEST(Gradient, DownscaledModelMatchesFiniteDifferences) {
  const auto a = Architecture::downscaled();
  Rng rng(21);
  for (std::uint64_t seed : {1u, 2u}) {
    const auto model = CnnModel::initialize(a, seed);
    const auto win = oracle::random_window(a.input_len, rng);
    for (const auto& r : oracle::check_gradients(model, win, static_cast<int>(seed) % 6))
      EXPECT_LT(r.rel_error, 1e-4) << r.tensor;
  }
}

TEST(Train, SingleSampleIsMemorized) {
  const auto data = cohort::synth_labeled_windows(1, 4);
  std::vector<LabeledWindow> one = {data[3 * 1]};  // one jogging window
  ASSERT_EQ(one[0].label, ActivityLabel::Jogging);
  TrainConfig cfg;
  cfg.require_all_classes = false;
  const auto res = train(CnnModel::initialize(Architecture{}, 1), one, cfg);
  EXPECT_EQ(res.loss_trace.size(), 12u);
  EXPECT_DOUBLE_EQ(accuracy(res.model, one), 1.0);
  EXPECT_LT(res.loss_trace.back(), res.loss_trace.front());
}

TEST(Train, MissingClassRejected) {
  const auto data = cohort::synth_labeled_windows(1, 4);
  std::vector<LabeledWindow> partial(data.begin(), data.begin() + 3);
  EXPECT_THROW(train(CnnModel::initialize(Architecture{}, 1), partial, {}), TrainingError);
  EXPECT_THROW(train(CnnModel::initialize(Architecture{}, 1), std::span<const LabeledWindow>{}, {}), TrainingError);
}

TEST(Train, NonFiniteLossNamesEpoch) {
  auto data = cohort::synth_labeled_windows(1, 4);
  data[0].window.samples[0].x = std::numeric_limits<double>::quiet_NaN();
  try {
    train(CnnModel::initialize(Architecture{}, 1), data, {});
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.epoch(), 1);
  }
}

TEST(Train, DeterministicAndOrderIndependent) {
  const auto a = Architecture::downscaled();
  Rng rng(8);
  std::vector<LabeledWindow> data;
  for (int i = 0; i < 36; ++i) data.push_back({oracle::random_window(a.input_len, rng), static_cast<ActivityLabel>(i % 6)});
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 5;
  const auto r1 = train(CnnModel::initialize(a, 2), data, cfg);
  const auto r2 = train(CnnModel::initialize(a, 2), data, cfg);
  EXPECT_EQ(r1.model.params, r2.model.params);
  std::reverse(data.begin(), data.end());
  const auto r3 = train(CnnModel::initialize(a, 2), data, cfg);
  EXPECT_EQ(r1.model.params, r3.model.params);
  cfg.seed = 6;
  const auto r4 = train(CnnModel::initialize(a, 2), data, cfg);
  EXPECT_NE(r1.model.params, r4.model.params);
}

TEST(Train, SyntheticActivitiesLossDecreases) {
  const auto data = cohort::synth_labeled_windows(40, 12);
  ASSERT_EQ(data.size(), 240u);
  TrainConfig cfg;
  cfg.epochs = 4;
  const auto res = train(CnnModel::initialize(Architecture{}, 3), data, cfg);
  EXPECT_LT(res.loss_trace.back(), res.loss_trace.front());
  const auto probe = cohort::synth_labeled_windows(6, 99);
  int jog_hits = 0, jogs = 0;
  for (const auto& w : probe)
    if (w.label == ActivityLabel::Jogging) {
      ++jogs;
      jog_hits += predict(res.model, w.window) == ActivityLabel::Jogging;
    }
  EXPECT_GE(jog_hits, jogs - 1);
}

TEST(Checkpoint, RoundTripIsExact) {
  auto m = CnnModel::initialize(Architecture{}, 17);
  m.hyper.learning_rate = 0.03;
  m.hyper.epochs = 7;
  std::stringstream ss;
  save_checkpoint(m, ss);
  const auto back = load_checkpoint(ss);
  EXPECT_EQ(back.arch, m.arch);
  EXPECT_EQ(back.params, m.params);
  EXPECT_EQ(back.hyper.epochs, 7);
  EXPECT_DOUBLE_EQ(back.hyper.learning_rate, 0.03);

  std::stringstream bad("NOTACNN!rest");
  EXPECT_THROW(load_checkpoint(bad), ParseError);
}

TEST(Checkpoint, ArchitectureMismatchRejected) {
  const auto m = CnnModel::initialize(Architecture::downscaled(), 1);
  std::stringstream ss;
  save_checkpoint(m, ss);
  auto bytes = ss.str();
  // corrupt fc_units (field 10) so the stored tensors no longer fit
  const std::size_t off = 8 + 4 + 9 * 8;
  bytes[off] = static_cast<char>(bytes[off] + 1);
  std::stringstream in(bytes);
  EXPECT_THROW(load_checkpoint(in), ShapeError);
}
