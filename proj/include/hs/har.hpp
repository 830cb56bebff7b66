#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hs/error.hpp"
#include "hs/signal.hpp"
#include "hs/types.hpp"
#include "hs/util.hpp"

namespace hs::har {

// --------------------------------------------------------- cost accounting

struct ConvSpec {
  std::int64_t c_in = 1;
  std::int64_t c_out = 1;
  std::int64_t k_w = 1;
  std::int64_t k_h = 1;
  std::int64_t f_w = 1;
  std::int64_t f_h = 1;
  bool depthwise = false;

  void validate() const {
    for (auto v : {c_in, c_out, k_w, k_h, f_w, f_h})
      if (v <= 0) throw SpecError("ConvSpec fields must be positive");
    if (depthwise && c_out % c_in != 0) throw SpecError("depthwise c_out must be a multiple of c_in");
  }
};

/// Weights of a standard convolution: C_in * k_w * k_h * C_out.
constexpr std::int64_t std_conv_weights(const ConvSpec& s) { return s.c_in * s.k_w * s.k_h * s.c_out; }

/// Multiply-accumulates to produce the f_w x f_h output maps of a standard convolution.
constexpr std::int64_t std_conv_cost(const ConvSpec& s) { return std_conv_weights(s) * s.f_w * s.f_h; }

/// Weights of a depthwise convolution: each output channel sees one input channel.
constexpr std::int64_t dw_conv_weights(const ConvSpec& s) { return s.k_w * s.k_h * s.c_out; }

constexpr std::int64_t dw_conv_cost(const ConvSpec& s) { return dw_conv_weights(s) * s.f_w * s.f_h; }

// ------------------------------------------------------------ architecture

struct Architecture {
  int input_len = signal::kWindowLength;
  int in_channels = 3;
  int dw_multiplier = 20;  // depthwise 3 -> 60
  int conv1_kernel = 60;
  int conv1_depth = 60;    // pointwise output channels
  int pool_len = 20;
  int pool_stride = 2;
  int conv2_kernel = 6;
  int conv2_depth = 6;
  int fc_units = 1000;
  int classes = kNumActivities;

  int dw_channels() const { return in_channels * dw_multiplier; }
  int conv1_len() const { return input_len - conv1_kernel + 1; }
  int pool_out_len() const { return (conv1_len() - pool_len) / pool_stride + 1; }
  int conv2_len() const { return pool_out_len() - conv2_kernel + 1; }
  int flat_size() const { return conv2_depth * conv2_len(); }

  std::array<std::int64_t, 11> fields() const {
    return {input_len, in_channels, dw_multiplier, conv1_kernel, conv1_depth, pool_len,
            pool_stride, conv2_kernel, conv2_depth, fc_units, classes};
  }

  static Architecture from_fields(std::span<const std::int64_t> f) {
    if (f.size() != 11) throw ShapeError("architecture needs 11 fields");
    Architecture a;
    int* dst[] = {&a.input_len, &a.in_channels, &a.dw_multiplier, &a.conv1_kernel,
                  &a.conv1_depth, &a.pool_len, &a.pool_stride, &a.conv2_kernel,
                  &a.conv2_depth, &a.fc_units, &a.classes};
    for (std::size_t i = 0; i < 11; ++i) {
      if (f[i] <= 0 || f[i] > (1 << 24)) throw ShapeError("architecture field out of range");
      *dst[i] = static_cast<int>(f[i]);
    }
    return a;
  }

  /// Throws ShapeError unless the layer chain produces a non-empty output at every stage.
  void validate() const {
    for (auto v : fields())
      if (v <= 0) throw ShapeError("architecture fields must be positive");
    if (conv1_len() < pool_len) throw ShapeError("conv1 output shorter than the pooling window");
    if (conv2_len() < 1) throw ShapeError("conv2 kernel longer than pooled sequence");
  }

  /// Input 20x3, depths 4/2, FC 10; used for gradient checking.
  static Architecture downscaled() {
    Architecture a;
    a.input_len = 20;
    a.dw_multiplier = 2;
    a.conv1_kernel = 5;
    a.conv1_depth = 4;
    a.pool_len = 4;
    a.pool_stride = 2;
    a.conv2_kernel = 2;
    a.conv2_depth = 2;
    a.fc_units = 10;
    return a;
  }

  ConvSpec depthwise_spec() const {
    return {in_channels, dw_channels(), conv1_kernel, 1, conv1_len(), 1, true};
  }
  ConvSpec pointwise_spec() const { return {dw_channels(), conv1_depth, 1, 1, conv1_len(), 1, false}; }
  ConvSpec conv2_spec() const { return {conv1_depth, conv2_depth, conv2_kernel, 1, conv2_len(), 1, false}; }

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

// -------------------------------------------------------------- layer ops
//
// Activations are channel-major: x[c * len + t].

namespace ops {

/// out[o][t] = b[o] + sum_k w[o][k] * in[o / multiplier][t + k]
inline void depthwise_conv1d(std::span<const double> in, int channels, int len, std::span<const double> w,
                             std::span<const double> b, int multiplier, int kernel, std::span<double> out) {
  const int out_len = len - kernel + 1;
  const int out_ch = channels * multiplier;
  for (int o = 0; o < out_ch; ++o) {
    const double* src = in.data() + static_cast<std::size_t>(o / multiplier) * len;
    double* dst = out.data() + static_cast<std::size_t>(o) * out_len;
    std::fill(dst, dst + out_len, b[o]);
    for (int k = 0; k < kernel; ++k) {
      const double wk = w[static_cast<std::size_t>(o) * kernel + k];
      const double* s = src + k;
      for (int t = 0; t < out_len; ++t) dst[t] += wk * s[t];
    }
  }
}

/// Standard (dense) 1-D convolution, w[o][c][k].
inline void conv1d(std::span<const double> in, int c_in, int len, std::span<const double> w,
                   std::span<const double> b, int c_out, int kernel, std::span<double> out) {
  const int out_len = len - kernel + 1;
  for (int o = 0; o < c_out; ++o) {
    double* dst = out.data() + static_cast<std::size_t>(o) * out_len;
    std::fill(dst, dst + out_len, b[o]);
    for (int c = 0; c < c_in; ++c) {
      const double* src = in.data() + static_cast<std::size_t>(c) * len;
      const double* wk = w.data() + (static_cast<std::size_t>(o) * c_in + c) * kernel;
      for (int k = 0; k < kernel; ++k) {
        const double wv = wk[k];
        const double* s = src + k;
        for (int t = 0; t < out_len; ++t) dst[t] += wv * s[t];
      }
    }
  }
}

inline void pointwise_conv1d(std::span<const double> in, int c_in, int len, std::span<const double> w,
                             std::span<const double> b, int c_out, std::span<double> out) {
  conv1d(in, c_in, len, w, b, c_out, 1, out);
}

/// Max over [u*stride, u*stride + pool_len); the first maximal position wins.
inline void maxpool1d(std::span<const double> in, int channels, int len, int pool_len, int stride,
                      std::span<double> out, std::span<int> argmax) {
  const int out_len = (len - pool_len) / stride + 1;
  for (int c = 0; c < channels; ++c) {
    const double* src = in.data() + static_cast<std::size_t>(c) * len;
    for (int u = 0; u < out_len; ++u) {
      int best = u * stride;
      for (int r = 1; r < pool_len; ++r)
        if (src[u * stride + r] > src[best]) best = u * stride + r;
      out[static_cast<std::size_t>(c) * out_len + u] = src[best];
      argmax[static_cast<std::size_t>(c) * out_len + u] = best;
    }
  }
}

inline void softmax(std::span<double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double& x : v) {
    x = std::exp(x - m);
    s += x;
  }
  for (double& x : v) x /= s;
}

}  // namespace ops

// -------------------------------------------------------------- parameters

struct Params {
  std::vector<double> dw_w, dw_b;    // [dwC][k1], [dwC]
  std::vector<double> pw_w, pw_b;    // [D1][dwC], [D1]
  std::vector<double> c2_w, c2_b;    // [D2][D1][k2], [D2]
  std::vector<double> fc_w, fc_b;    // [F][flat], [F]
  std::vector<double> out_w, out_b;  // [classes][F], [classes]

  static constexpr std::array<const char*, 10> kNames = {"dw_w", "dw_b", "pw_w", "pw_b", "c2_w",
                                                         "c2_b", "fc_w", "fc_b", "out_w", "out_b"};

  static Params zeros(const Architecture& a) {
    Params p;
    const auto dwc = static_cast<std::size_t>(a.dw_channels());
    p.dw_w.assign(dwc * a.conv1_kernel, 0.0);
    p.dw_b.assign(dwc, 0.0);
    p.pw_w.assign(static_cast<std::size_t>(a.conv1_depth) * dwc, 0.0);
    p.pw_b.assign(a.conv1_depth, 0.0);
    p.c2_w.assign(static_cast<std::size_t>(a.conv2_depth) * a.conv1_depth * a.conv2_kernel, 0.0);
    p.c2_b.assign(a.conv2_depth, 0.0);
    p.fc_w.assign(static_cast<std::size_t>(a.fc_units) * a.flat_size(), 0.0);
    p.fc_b.assign(a.fc_units, 0.0);
    p.out_w.assign(static_cast<std::size_t>(a.classes) * a.fc_units, 0.0);
    p.out_b.assign(a.classes, 0.0);
    return p;
  }

  /// All tensors in declaration order.
  std::array<std::vector<double>*, 10> tensors() {
    return {&dw_w, &dw_b, &pw_w, &pw_b, &c2_w, &c2_b, &fc_w, &fc_b, &out_w, &out_b};
  }
  std::array<const std::vector<double>*, 10> tensors() const {
    return {&dw_w, &dw_b, &pw_w, &pw_b, &c2_w, &c2_b, &fc_w, &fc_b, &out_w, &out_b};
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto* t : tensors()) n += t->size();
    return n;
  }

  friend bool operator==(const Params&, const Params&) = default;
};

struct TrainConfig {
  int epochs = 12;
  int batch_size = 10;
  double learning_rate = 0.05;
  std::uint64_t seed = 1;
  bool require_all_classes = true;
};

struct CnnModel {
  Architecture arch;
  Params params;
  TrainConfig hyper;

  /// Glorot-uniform weights, zero biases.
  static CnnModel initialize(const Architecture& arch, std::uint64_t seed) {
    arch.validate();
    CnnModel m{arch, Params::zeros(arch), {}};
    m.hyper.seed = seed;
    Rng rng(seed);
    auto fill = [&](std::vector<double>& w, double fan_in, double fan_out) {
      const double lim = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> u(-lim, lim);
      for (double& v : w) v = u(rng);
    };
    fill(m.params.dw_w, arch.conv1_kernel, arch.conv1_kernel);
    fill(m.params.pw_w, arch.dw_channels(), arch.conv1_depth);
    fill(m.params.c2_w, double(arch.conv1_depth) * arch.conv2_kernel, double(arch.conv2_depth) * arch.conv2_kernel);
    fill(m.params.fc_w, arch.flat_size(), arch.fc_units);
    fill(m.params.out_w, arch.fc_units, arch.classes);
    return m;
  }

  /// Throws ShapeError unless every tensor has the size the architecture implies.
  void validate() const {
    arch.validate();
    const auto expected = Params::zeros(arch);
    const auto have = params.tensors();
    const auto want = expected.tensors();
    for (std::size_t i = 0; i < have.size(); ++i)
      if (have[i]->size() != want[i]->size())
        throw ShapeError(std::string("tensor ") + Params::kNames[i] + " has " + std::to_string(have[i]->size()) +
                         " values, architecture needs " + std::to_string(want[i]->size()));
  }
};

// --------------------------------------------------------- forward/backward

/// Scratch buffers for one sample; reusable across calls on the same architecture.
struct Workspace {
  std::vector<double> input, a1, a2, pooled, a3, hidden, probs;
  std::vector<int> argmax;
  std::vector<double> d_hidden, d_flat, d_pooled, d_a2, d_a1;

  explicit Workspace(const Architecture& a) {
    const auto L1 = static_cast<std::size_t>(a.conv1_len());
    const auto Lp = static_cast<std::size_t>(a.pool_out_len());
    input.resize(static_cast<std::size_t>(a.in_channels) * a.input_len);
    a1.resize(static_cast<std::size_t>(a.dw_channels()) * L1);
    a2.resize(static_cast<std::size_t>(a.conv1_depth) * L1);
    pooled.resize(static_cast<std::size_t>(a.conv1_depth) * Lp);
    argmax.resize(pooled.size());
    a3.resize(static_cast<std::size_t>(a.flat_size()));
    hidden.resize(a.fc_units);
    probs.resize(a.classes);
    d_hidden.resize(a.fc_units);
    d_flat.resize(a3.size());
    d_pooled.resize(pooled.size());
    d_a2.resize(a2.size());
    d_a1.resize(a1.size());
  }
};

namespace detail {

inline void load_input(const Architecture& a, const signal::ActivityWindow& w, std::vector<double>& dst) {
  if (static_cast<int>(w.length()) != a.input_len || a.in_channels != 3)
    throw ShapeError("window has " + std::to_string(w.length()) + " samples, model expects " +
                     std::to_string(a.input_len) + "x" + std::to_string(a.in_channels));
  const auto L = static_cast<std::size_t>(a.input_len);
  for (std::size_t t = 0; t < L; ++t) {
    dst[t] = w.samples[t].x;
    dst[L + t] = w.samples[t].y;
    dst[2 * L + t] = w.samples[t].z;
  }
}

inline void forward(const CnnModel& m, Workspace& ws) {
  const auto& a = m.arch;
  const auto& p = m.params;
  ops::depthwise_conv1d(ws.input, a.in_channels, a.input_len, p.dw_w, p.dw_b, a.dw_multiplier, a.conv1_kernel, ws.a1);
  ops::pointwise_conv1d(ws.a1, a.dw_channels(), a.conv1_len(), p.pw_w, p.pw_b, a.conv1_depth, ws.a2);
  ops::maxpool1d(ws.a2, a.conv1_depth, a.conv1_len(), a.pool_len, a.pool_stride, ws.pooled, ws.argmax);
  ops::conv1d(ws.pooled, a.conv1_depth, a.pool_out_len(), p.c2_w, p.c2_b, a.conv2_depth, a.conv2_kernel, ws.a3);

  const auto flat = static_cast<std::size_t>(a.flat_size());
  for (int j = 0; j < a.fc_units; ++j) {
    const double* wj = p.fc_w.data() + static_cast<std::size_t>(j) * flat;
    double s = p.fc_b[j];
    for (std::size_t i = 0; i < flat; ++i) s += wj[i] * ws.a3[i];
    ws.hidden[j] = std::tanh(s);
  }
  const auto F = static_cast<std::size_t>(a.fc_units);
  for (int c = 0; c < a.classes; ++c) {
    const double* wc = p.out_w.data() + static_cast<std::size_t>(c) * F;
    double s = p.out_b[c];
    for (std::size_t j = 0; j < F; ++j) s += wc[j] * ws.hidden[j];
    ws.probs[c] = s;
  }
  ops::softmax(ws.probs);
}

/// Accumulates d(-log p[label]) into grad; forward must have run on ws.
inline void backward(const CnnModel& m, Workspace& ws, int label, Params& grad) {
  const auto& a = m.arch;
  const auto& p = m.params;
  const auto F = static_cast<std::size_t>(a.fc_units);
  const auto flat = static_cast<std::size_t>(a.flat_size());

  std::fill(ws.d_hidden.begin(), ws.d_hidden.end(), 0.0);
  for (int c = 0; c < a.classes; ++c) {
    const double dl = ws.probs[c] - (c == label ? 1.0 : 0.0);
    grad.out_b[c] += dl;
    double* gw = grad.out_w.data() + static_cast<std::size_t>(c) * F;
    const double* wc = p.out_w.data() + static_cast<std::size_t>(c) * F;
    for (std::size_t j = 0; j < F; ++j) {
      gw[j] += dl * ws.hidden[j];
      ws.d_hidden[j] += dl * wc[j];
    }
  }

  std::fill(ws.d_flat.begin(), ws.d_flat.end(), 0.0);
  for (std::size_t j = 0; j < F; ++j) {
    const double dz = ws.d_hidden[j] * (1.0 - ws.hidden[j] * ws.hidden[j]);
    grad.fc_b[j] += dz;
    double* gw = grad.fc_w.data() + j * flat;
    const double* wj = p.fc_w.data() + j * flat;
    for (std::size_t i = 0; i < flat; ++i) {
      gw[i] += dz * ws.a3[i];
      ws.d_flat[i] += dz * wj[i];
    }
  }

  // conv2
  const int Lp = a.pool_out_len();
  const int L3 = a.conv2_len();
  const int K2 = a.conv2_kernel;
  std::fill(ws.d_pooled.begin(), ws.d_pooled.end(), 0.0);
  for (int o = 0; o < a.conv2_depth; ++o) {
    const double* d3 = ws.d_flat.data() + static_cast<std::size_t>(o) * L3;
    double bsum = 0.0;
    for (int t = 0; t < L3; ++t) bsum += d3[t];
    grad.c2_b[o] += bsum;
    for (int c = 0; c < a.conv1_depth; ++c) {
      const double* src = ws.pooled.data() + static_cast<std::size_t>(c) * Lp;
      double* dsrc = ws.d_pooled.data() + static_cast<std::size_t>(c) * Lp;
      const std::size_t wbase = (static_cast<std::size_t>(o) * a.conv1_depth + c) * K2;
      for (int k = 0; k < K2; ++k) {
        double g = 0.0;
        const double wv = p.c2_w[wbase + k];
        for (int t = 0; t < L3; ++t) {
          g += d3[t] * src[t + k];
          dsrc[t + k] += wv * d3[t];
        }
        grad.c2_w[wbase + k] += g;
      }
    }
  }

  // max-pool routes gradient to the winning position
  std::fill(ws.d_a2.begin(), ws.d_a2.end(), 0.0);
  const auto L1 = static_cast<std::size_t>(a.conv1_len());
  for (int c = 0; c < a.conv1_depth; ++c)
    for (int u = 0; u < Lp; ++u) {
      const std::size_t idx = static_cast<std::size_t>(c) * Lp + u;
      ws.d_a2[static_cast<std::size_t>(c) * L1 + ws.argmax[idx]] += ws.d_pooled[idx];
    }

  // pointwise
  const int dwc = a.dw_channels();
  std::fill(ws.d_a1.begin(), ws.d_a1.end(), 0.0);
  for (int o = 0; o < a.conv1_depth; ++o) {
    const double* d2 = ws.d_a2.data() + static_cast<std::size_t>(o) * L1;
    double bsum = 0.0;
    for (std::size_t t = 0; t < L1; ++t) bsum += d2[t];
    grad.pw_b[o] += bsum;
    for (int c = 0; c < dwc; ++c) {
      const double* src = ws.a1.data() + static_cast<std::size_t>(c) * L1;
      double* d1 = ws.d_a1.data() + static_cast<std::size_t>(c) * L1;
      const double wv = p.pw_w[static_cast<std::size_t>(o) * dwc + c];
      double g = 0.0;
      for (std::size_t t = 0; t < L1; ++t) {
        g += d2[t] * src[t];
        d1[t] += wv * d2[t];
      }
      grad.pw_w[static_cast<std::size_t>(o) * dwc + c] += g;
    }
  }

  // depthwise
  const int K1 = a.conv1_kernel;
  const auto L0 = static_cast<std::size_t>(a.input_len);
  for (int o = 0; o < dwc; ++o) {
    const double* d1 = ws.d_a1.data() + static_cast<std::size_t>(o) * L1;
    const double* src = ws.input.data() + static_cast<std::size_t>(o / a.dw_multiplier) * L0;
    double bsum = 0.0;
    for (std::size_t t = 0; t < L1; ++t) bsum += d1[t];
    grad.dw_b[o] += bsum;
    for (int k = 0; k < K1; ++k) {
      double g = 0.0;
      for (std::size_t t = 0; t < L1; ++t) g += d1[t] * src[t + k];
      grad.dw_w[static_cast<std::size_t>(o) * K1 + k] += g;
    }
  }
}

}  // namespace detail

/// Class probabilities for one window.
inline std::vector<double> forward(const CnnModel& model, const signal::ActivityWindow& window) {
  Workspace ws(model.arch);
  detail::load_input(model.arch, window, ws.input);
  detail::forward(model, ws);
  return ws.probs;
}

/// Loss -log p(label) and its gradient with respect to every parameter.
inline std::pair<double, Params> loss_and_gradient(const CnnModel& model, const signal::ActivityWindow& window,
                                                   int label) {
  Workspace ws(model.arch);
  detail::load_input(model.arch, window, ws.input);
  detail::forward(model, ws);
  Params grad = Params::zeros(model.arch);
  detail::backward(model, ws, label, grad);
  return {-std::log(ws.probs[label]), std::move(grad)};
}

/// Argmax of forward, ties to the lowest class index.
inline ActivityLabel predict(const CnnModel& model, const signal::ActivityWindow& window) {
  const auto probs = forward(model, window);
  return static_cast<ActivityLabel>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

inline std::vector<ActivityLabel> predict_all(const CnnModel& model, std::span<const signal::ActivityWindow> windows) {
  Workspace ws(model.arch);
  std::vector<ActivityLabel> out;
  out.reserve(windows.size());
  for (const auto& w : windows) {
    detail::load_input(model.arch, w, ws.input);
    detail::forward(model, ws);
    out.push_back(static_cast<ActivityLabel>(std::max_element(ws.probs.begin(), ws.probs.end()) - ws.probs.begin()));
  }
  return out;
}

struct LabeledWindow {
  signal::ActivityWindow window;
  ActivityLabel label = ActivityLabel::Sitting;
};

struct TrainResult {
  CnnModel model;
  std::vector<double> loss_trace;  // mean loss per epoch
};

/// Mini-batch SGD on mean negative log-likelihood. Samples are put in a
/// canonical order before the seeded shuffle, so the result does not depend
/// on the order of `data`.
inline TrainResult train(CnnModel model, std::span<const LabeledWindow> data, const TrainConfig& cfg) {
  model.validate();
  if (data.empty()) throw TrainingError("empty training set");
  if (cfg.batch_size < 1 || cfg.epochs < 1) throw TrainingError("batch size and epochs must be >= 1");
  if (cfg.require_all_classes) {
    std::vector<int> counts(model.arch.classes, 0);
    for (const auto& s : data) ++counts.at(static_cast<int>(s.label));
    for (int c = 0; c < model.arch.classes; ++c)
      if (counts[c] == 0)
        throw TrainingError("no training windows for class " + std::string(to_string(static_cast<ActivityLabel>(c))));
  }

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const auto& a = data[i];
    const auto& b = data[j];
    if (a.label != b.label) return a.label < b.label;
    if (a.window.participant_id != b.window.participant_id) return a.window.participant_id < b.window.participant_id;
    if (a.window.start_t_ns != b.window.start_t_ns) return a.window.start_t_ns < b.window.start_t_ns;
    return std::lexicographical_compare(
        a.window.samples.begin(), a.window.samples.end(), b.window.samples.begin(), b.window.samples.end(),
        [](const signal::Triple& p, const signal::Triple& q) {
          return std::tie(p.x, p.y, p.z) < std::tie(q.x, q.y, q.z);
        });
  });

  model.hyper = cfg;
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  Workspace ws(model.arch);
  Params grad = Params::zeros(model.arch);
  TrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      for (auto* t : grad.tensors()) std::fill(t->begin(), t->end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const auto& s = data[order[i]];
        detail::load_input(model.arch, s.window, ws.input);
        detail::forward(model, ws);
        const int label = static_cast<int>(s.label);
        loss_sum += -std::log(std::max(ws.probs[label], 1e-300));
        detail::backward(model, ws, label, grad);
      }
      const double step = cfg.learning_rate / static_cast<double>(end - start);
      auto params = model.params.tensors();
      auto grads = grad.tensors();
      for (std::size_t t = 0; t < params.size(); ++t) {
        auto& pv = *params[t];
        const auto& gv = *grads[t];
        for (std::size_t i = 0; i < pv.size(); ++i) pv[i] -= step * gv[i];
      }
    }
    const double mean_loss = loss_sum / static_cast<double>(data.size());
    if (!std::isfinite(mean_loss))
      throw DivergenceError("training diverged at epoch " + std::to_string(epoch + 1), epoch + 1);
    result.loss_trace.push_back(mean_loss);
  }
  result.model = std::move(model);
  return result;
}

inline double accuracy(const CnnModel& model, std::span<const LabeledWindow> data) {
  if (data.empty()) return 0.0;
  std::size_t hit = 0;
  Workspace ws(model.arch);
  for (const auto& s : data) {
    detail::load_input(model.arch, s.window, ws.input);
    detail::forward(model, ws);
    const auto pred = std::max_element(ws.probs.begin(), ws.probs.end()) - ws.probs.begin();
    hit += pred == static_cast<int>(s.label);
  }
  return static_cast<double>(hit) / static_cast<double>(data.size());
}

// -------------------------------------------------------------- checkpoint
//
// "HSCNN001" | u32 field count | i64 architecture fields | f64 lr | i64 batch |
// i64 epochs | u64 seed | u32 tensor count | per tensor: u64 length, f64 values.
// All little-endian.

inline constexpr char kCheckpointMagic[8] = {'H', 'S', 'C', 'N', 'N', '0', '0', '1'};

inline void save_checkpoint(const CnnModel& model, std::ostream& os) {
  model.validate();
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const auto fields = model.arch.fields();
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(fields.size()));
  for (auto f : fields) write_le<std::int64_t>(os, f);
  write_le<double>(os, model.hyper.learning_rate);
  write_le<std::int64_t>(os, model.hyper.batch_size);
  write_le<std::int64_t>(os, model.hyper.epochs);
  write_le<std::uint64_t>(os, model.hyper.seed);
  const auto tensors = model.params.tensors();
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto* t : tensors) {
    write_le<std::uint64_t>(os, t->size());
    for (double v : *t) write_le<double>(os, v);
  }
}

inline CnnModel load_checkpoint(std::istream& is) {
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || !std::equal(magic, magic + 8, kCheckpointMagic))
    throw ParseError("not a CNN checkpoint (bad version tag)", 1);
  const auto nfields = read_le<std::uint32_t>(is);
  if (nfields != 11) throw ShapeError("checkpoint lists " + std::to_string(nfields) + " layer fields, expected 11");
  std::vector<std::int64_t> fields(nfields);
  for (auto& f : fields) f = read_le<std::int64_t>(is);
  CnnModel m;
  m.arch = Architecture::from_fields(fields);
  m.arch.validate();
  m.hyper.learning_rate = read_le<double>(is);
  m.hyper.batch_size = static_cast<int>(read_le<std::int64_t>(is));
  m.hyper.epochs = static_cast<int>(read_le<std::int64_t>(is));
  m.hyper.seed = read_le<std::uint64_t>(is);
  m.params = Params::zeros(m.arch);
  const auto ntensors = read_le<std::uint32_t>(is);
  auto tensors = m.params.tensors();
  if (ntensors != tensors.size()) throw ShapeError("checkpoint tensor count mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto len = read_le<std::uint64_t>(is);
    if (len != tensors[i]->size())
      throw ShapeError(std::string("checkpoint tensor ") + Params::kNames[i] + " has " + std::to_string(len) +
                       " values, layer chain needs " + std::to_string(tensors[i]->size()));
    for (auto& v : *tensors[i]) v = read_le<double>(is);
  }
  return m;
}

inline void save_checkpoint(const CnnModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot write '" + path + "'");
  save_checkpoint(model, os);
}

inline CnnModel load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  return load_checkpoint(is);
}

}  // namespace hs::har
