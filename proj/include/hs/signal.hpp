#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hs/error.hpp"
#include "hs/util.hpp"

namespace hs::signal {

inline constexpr double kSampleRateHz = 20.0;
inline constexpr double kGravityCutoffHz = 0.3;
inline constexpr double kNoiseCutoffHz = 5.0;
inline constexpr double kMaxGapSeconds = 2.0;
inline constexpr double kMaxAbsAccel = 40.0;  // m/s^2
inline constexpr int kWindowLength = 180;     // 9 s at 20 Hz
inline constexpr double kWindowOverlap = 0.5;

struct Triple {
  double x = 0, y = 0, z = 0;
  friend bool operator==(const Triple&, const Triple&) = default;
};

struct AccelSample {
  std::int64_t t_ns = 0;
  double x = 0, y = 0, z = 0;
  friend bool operator==(const AccelSample&, const AccelSample&) = default;
};

/// Throws RangeError unless every axis is finite and within +/-40 m/s^2.
inline void validate_sample(const AccelSample& s) {
  for (double v : {s.x, s.y, s.z})
    if (!std::isfinite(v) || std::abs(v) > kMaxAbsAccel)
      throw RangeError("acceleration " + format_double(v) + " outside +/-40 m/s^2");
}

// ------------------------------------------------------------- resampling

inline std::int64_t period_ns(double rate_hz) { return std::llround(1e9 / rate_hz); }

/// Resamples onto a uniform 1/target_hz grid by linear interpolation. The
/// stream is split wherever consecutive samples are more than 2 s apart; each
/// returned segment has its own grid anchored at its first input sample.
inline std::vector<std::vector<AccelSample>> regularize_timestamps(std::span<const AccelSample> stream,
                                                                   double target_hz = kSampleRateHz,
                                                                   double max_gap_s = kMaxGapSeconds) {
  if (stream.size() < 2) throw EmptyStreamError("regularize_timestamps: need at least 2 samples");
  if (!(target_hz > 0)) throw SpecError("regularize_timestamps: target rate must be positive");
  for (std::size_t i = 1; i < stream.size(); ++i)
    if (stream[i].t_ns <= stream[i - 1].t_ns)
      throw OrderingError("regularize_timestamps: timestamps not strictly increasing at index " +
                          std::to_string(i));

  const double step_ns = 1e9 / target_hz;
  const auto max_gap_ns = static_cast<std::int64_t>(std::llround(max_gap_s * 1e9));

  std::vector<std::vector<AccelSample>> segments;
  std::size_t seg_begin = 0;
  auto emit = [&](std::size_t first, std::size_t last) {  // inclusive input range
    std::vector<AccelSample> out;
    const std::int64_t t0 = stream[first].t_ns;
    const std::int64_t t_end = stream[last].t_ns;
    std::size_t j = first;
    for (std::int64_t k = 0;; ++k) {
      const std::int64_t t = t0 + std::llround(static_cast<double>(k) * step_ns);
      if (t > t_end) break;
      while (j < last && stream[j + 1].t_ns <= t) ++j;
      const auto& a = stream[j];
      if (a.t_ns == t || j == last) {
        out.push_back({t, a.x, a.y, a.z});
        continue;
      }
      const auto& b = stream[j + 1];
      const double u = static_cast<double>(t - a.t_ns) / static_cast<double>(b.t_ns - a.t_ns);
      out.push_back({t, a.x + u * (b.x - a.x), a.y + u * (b.y - a.y), a.z + u * (b.z - a.z)});
    }
    segments.push_back(std::move(out));
  };
  for (std::size_t i = 1; i < stream.size(); ++i) {
    if (stream[i].t_ns - stream[i - 1].t_ns > max_gap_ns) {
      emit(seg_begin, i - 1);
      seg_begin = i;
    }
  }
  emit(seg_begin, stream.size() - 1);
  return segments;
}

/// True when consecutive samples are one period apart (to within 1 ns).
inline bool is_uniform(std::span<const AccelSample> stream, double rate_hz) {
  const double step = 1e9 / rate_hz;
  for (std::size_t i = 1; i < stream.size(); ++i)
    if (std::abs(static_cast<double>(stream[i].t_ns - stream[i - 1].t_ns) - step) > 1.0) return false;
  return true;
}

// ------------------------------------------------------------- Butterworth

struct ButterworthSpec {
  int order = 3;
  double cutoff_hz = kGravityCutoffHz;
  double sample_rate_hz = kSampleRateHz;

  void validate() const {
    if (order != 3) throw SpecError("Butterworth order must be 3");
    if (!(sample_rate_hz > 0)) throw SpecError("sample rate must be positive");
    if (!(cutoff_hz > 0) || !(cutoff_hz < sample_rate_hz / 2))
      throw SpecError("cutoff " + format_double(cutoff_hz) + " Hz must lie in (0, Nyquist)");
  }
};

/// Direct-form transfer function b(z)/a(z) with a[0] == 1.
struct Iir3 {
  std::array<double, 4> b{};
  std::array<double, 4> a{};

  double dc_gain() const {
    return (b[0] + b[1] + b[2] + b[3]) / (a[0] + a[1] + a[2] + a[3]);
  }

  std::complex<double> response(double freq_hz, double sample_rate_hz) const {
    const double w = 2.0 * std::numbers::pi * freq_hz / sample_rate_hz;
    const std::complex<double> zinv = std::polar(1.0, -w);
    std::complex<double> num = 0, den = 0, p = 1;
    for (int i = 0; i < 4; ++i) {
      num += b[i] * p;
      den += a[i] * p;
      p *= zinv;
    }
    return num / den;
  }

  double magnitude(double freq_hz, double sample_rate_hz) const {
    return std::abs(response(freq_hz, sample_rate_hz));
  }
};

/// Bilinear transform of the analog prototype 1/((s+1)(s^2+s+1)) with the
/// cutoff prewarped so the digital response is exactly -3.01 dB at cutoff_hz.
inline Iir3 design_butterworth(const ButterworthSpec& spec) {
  spec.validate();
  const double k = std::tan(std::numbers::pi * spec.cutoff_hz / spec.sample_rate_hz);
  const double k2 = k * k;

  // first-order section (real pole)
  const double d1 = 1.0 + k;
  const std::array<double, 2> b1{k / d1, k / d1};
  const std::array<double, 2> a1{1.0, (k - 1.0) / d1};
  // second-order section (complex pair, Q = 1)
  const double d2 = 1.0 + k + k2;
  const std::array<double, 3> b2{k2 / d2, 2.0 * k2 / d2, k2 / d2};
  const std::array<double, 3> a2{1.0, 2.0 * (k2 - 1.0) / d2, (1.0 - k + k2) / d2};

  Iir3 f;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) {
      f.b[i + j] += b1[i] * b2[j];
      f.a[i + j] += a1[i] * a2[j];
    }
  return f;
}

enum class FilterInit {
  Zero,         // filter starts at rest
  SteadyState,  // state primed as if the first input had been held forever
};

/// Causal forward filtering (transposed direct form II).
inline std::vector<double> apply_filter(const Iir3& f, std::span<const double> signal,
                                        FilterInit init = FilterInit::Zero) {
  std::vector<double> out(signal.size());
  if (signal.empty()) return out;
  std::array<double, 3> z{};
  if (init == FilterInit::SteadyState) {
    // With unity DC gain y == x0 at rest.
    const double x0 = signal[0];
    z[2] = (f.b[3] - f.a[3]) * x0;
    z[1] = (f.b[2] - f.a[2]) * x0 + z[2];
    z[0] = (f.b[1] - f.a[1]) * x0 + z[1];
  }
  for (std::size_t n = 0; n < signal.size(); ++n) {
    const double x = signal[n];
    const double y = f.b[0] * x + z[0];
    z[0] = f.b[1] * x - f.a[1] * y + z[1];
    z[1] = f.b[2] * x - f.a[2] * y + z[2];
    z[2] = f.b[3] * x - f.a[3] * y;
    out[n] = y;
  }
  return out;
}

inline std::vector<double> butterworth_lowpass(std::span<const double> signal, const ButterworthSpec& spec,
                                               FilterInit init = FilterInit::Zero) {
  for (double v : signal)
    if (!std::isfinite(v)) throw PreconditionError("butterworth_lowpass: non-finite input");
  return apply_filter(design_butterworth(spec), signal, init);
}

namespace detail {
inline std::array<std::vector<double>, 3> split_axes(std::span<const AccelSample> s) {
  std::array<std::vector<double>, 3> axes;
  for (auto& a : axes) a.resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    axes[0][i] = s[i].x;
    axes[1][i] = s[i].y;
    axes[2][i] = s[i].z;
  }
  return axes;
}
}  // namespace detail

struct GravitySplit {
  std::vector<Triple> gravity;
  std::vector<Triple> body;
};

/// gravity = per-axis 0.3 Hz low-pass, body = raw - gravity.
inline GravitySplit separate_gravity(std::span<const AccelSample> stream, double sample_rate_hz = kSampleRateHz,
                                     double cutoff_hz = kGravityCutoffHz,
                                     FilterInit init = FilterInit::SteadyState) {
  if (!is_uniform(stream, sample_rate_hz))
    throw PreconditionError("separate_gravity: stream is not uniform at " + format_double(sample_rate_hz) + " Hz");
  const auto filt = design_butterworth({3, cutoff_hz, sample_rate_hz});
  const auto axes = detail::split_axes(stream);
  const auto gx = apply_filter(filt, axes[0], init);
  const auto gy = apply_filter(filt, axes[1], init);
  const auto gz = apply_filter(filt, axes[2], init);
  GravitySplit out;
  out.gravity.resize(stream.size());
  out.body.resize(stream.size());
  for (std::size_t i = 0; i < stream.size(); ++i) {
    out.gravity[i] = {gx[i], gy[i], gz[i]};
    out.body[i] = {axes[0][i] - gx[i], axes[1][i] - gy[i], axes[2][i] - gz[i]};
  }
  return out;
}

/// Per-axis noise-peak removal; timestamps are kept.
inline std::vector<AccelSample> denoise(std::span<const AccelSample> stream, double sample_rate_hz = kSampleRateHz,
                                        double cutoff_hz = kNoiseCutoffHz,
                                        FilterInit init = FilterInit::SteadyState) {
  const auto filt = design_butterworth({3, cutoff_hz, sample_rate_hz});
  const auto axes = detail::split_axes(stream);
  const auto fx = apply_filter(filt, axes[0], init);
  const auto fy = apply_filter(filt, axes[1], init);
  const auto fz = apply_filter(filt, axes[2], init);
  std::vector<AccelSample> out(stream.size());
  for (std::size_t i = 0; i < stream.size(); ++i) out[i] = {stream[i].t_ns, fx[i], fy[i], fz[i]};
  return out;
}

// -------------------------------------------------------------- windowing

struct ActivityWindow {
  std::string participant_id;
  std::int64_t start_t_ns = 0;
  std::vector<Triple> samples;

  std::size_t length() const { return samples.size(); }
};

inline int window_stride(int window_len, double overlap_fraction) {
  return std::max(1, static_cast<int>(std::lround(window_len * (1.0 - overlap_fraction))));
}

/// Closed-form window count for a stream of n samples.
inline std::size_t window_count(std::size_t n, int window_len, double overlap_fraction) {
  if (n < static_cast<std::size_t>(window_len)) return 0;
  const auto stride = static_cast<std::size_t>(window_stride(window_len, overlap_fraction));
  return (n - static_cast<std::size_t>(window_len)) / stride + 1;
}

struct WindowOrigin {
  std::string participant_id;
  std::int64_t t0_ns = 0;
  std::int64_t period_ns = 50'000'000;
};

inline std::vector<ActivityWindow> segment_windows(std::span<const Triple> body, int window_len = kWindowLength,
                                                   double overlap_fraction = kWindowOverlap,
                                                   const WindowOrigin& origin = {}) {
  if (window_len < 1) throw PreconditionError("segment_windows: window_len must be >= 1");
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0))
    throw PreconditionError("segment_windows: overlap must lie in [0,1)");
  const auto stride = static_cast<std::size_t>(window_stride(window_len, overlap_fraction));
  const auto count = window_count(body.size(), window_len, overlap_fraction);
  std::vector<ActivityWindow> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t start = w * stride;
    ActivityWindow win;
    win.participant_id = origin.participant_id;
    win.start_t_ns = origin.t0_ns + static_cast<std::int64_t>(start) * origin.period_ns;
    win.samples.assign(body.begin() + static_cast<std::ptrdiff_t>(start),
                       body.begin() + static_cast<std::ptrdiff_t>(start + static_cast<std::size_t>(window_len)));
    out.push_back(std::move(win));
  }
  return out;
}

struct PreprocessConfig {
  double sample_rate_hz = kSampleRateHz;
  double gravity_cutoff_hz = kGravityCutoffHz;
  double noise_cutoff_hz = kNoiseCutoffHz;
  double max_gap_s = kMaxGapSeconds;
  int window_len = kWindowLength;
  double overlap = kWindowOverlap;
};

/// Body acceleration of one gap-free stretch on the regular grid.
struct BodySegment {
  std::int64_t t0_ns = 0;
  std::int64_t period_ns = 50'000'000;
  std::vector<Triple> body;
};

/// resample -> noise low-pass -> gravity separation, per gap-free segment.
/// Segments shorter than one window are dropped.
inline std::vector<BodySegment> preprocess_segments(std::span<const AccelSample> stream,
                                                    const PreprocessConfig& cfg = {}) {
  std::vector<BodySegment> out;
  if (stream.size() < 2) return out;
  for (const auto& seg : regularize_timestamps(stream, cfg.sample_rate_hz, cfg.max_gap_s)) {
    if (seg.size() < static_cast<std::size_t>(cfg.window_len)) continue;
    const auto clean = denoise(seg, cfg.sample_rate_hz, cfg.noise_cutoff_hz);
    auto split = separate_gravity(clean, cfg.sample_rate_hz, cfg.gravity_cutoff_hz);
    out.push_back({seg.front().t_ns, period_ns(cfg.sample_rate_hz), std::move(split.body)});
  }
  return out;
}

inline std::vector<ActivityWindow> segment_windows(const BodySegment& seg, const std::string& participant_id,
                                                   const PreprocessConfig& cfg = {}) {
  return segment_windows(seg.body, cfg.window_len, cfg.overlap, {participant_id, seg.t0_ns, seg.period_ns});
}

/// resample -> noise low-pass -> gravity separation -> windows, per gap-free segment.
inline std::vector<ActivityWindow> preprocess_stream(std::span<const AccelSample> stream,
                                                     const std::string& participant_id,
                                                     const PreprocessConfig& cfg = {}) {
  std::vector<ActivityWindow> out;
  for (const auto& seg : preprocess_segments(stream, cfg))
    for (auto& w : segment_windows(seg, participant_id, cfg)) out.push_back(std::move(w));
  return out;
}

// ------------------------------------------------------------ line format

struct AccelRecord {
  std::string participant_id;
  AccelSample sample;
};

/// participant_id,t_ns,x,y,z
inline std::string format_accel_line(std::string_view participant_id, const AccelSample& s) {
  std::string line(participant_id);
  line += ',';
  line += std::to_string(s.t_ns);
  for (double v : {s.x, s.y, s.z}) {
    line += ',';
    line += format_double(v);
  }
  return line;
}

inline AccelRecord parse_accel_line(std::string_view line, std::size_t line_no = 0) {
  const auto f = split(trim(line), ',');
  if (f.size() != 5) throw ParseError("accelerometer record needs 5 fields", line_no);
  AccelRecord r;
  r.participant_id = std::string(trim(f[0]));
  if (r.participant_id.empty()) throw ParseError("empty participant id", line_no);
  r.sample.t_ns = parse_number<std::int64_t>(f[1], line_no);
  r.sample.x = parse_number<double>(f[2], line_no);
  r.sample.y = parse_number<double>(f[3], line_no);
  r.sample.z = parse_number<double>(f[4], line_no);
  try {
    validate_sample(r.sample);
  } catch (const RangeError& e) {
    throw ParseError(e.what(), line_no);
  }
  return r;
}

/// Parses line-delimited records; blank lines are skipped.
inline std::vector<AccelRecord> parse_accel_text(std::string_view text) {
  std::vector<AccelRecord> out;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (trim(line).empty()) continue;
    out.push_back(parse_accel_line(line, line_no));
  }
  return out;
}

}  // namespace hs::signal
