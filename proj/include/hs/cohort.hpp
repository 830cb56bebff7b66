#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "hs/error.hpp"
#include "hs/features.hpp"
#include "hs/har.hpp"
#include "hs/signal.hpp"
#include "hs/text.hpp"
#include "hs/types.hpp"
#include "hs/util.hpp"

namespace hs::cohort {

using features::Date;

/// Saturday 2019-04-06.
inline constexpr Date kStudyStart{std::chrono::year{2019} / std::chrono::April / 6};

// Severity -> behaviour coupling. Rows are Absence, MildModerate, Severe.
// Expected seconds per day: Sitting, Walking, Standing, Jogging, Upstairs, Downstairs.
inline constexpr std::array<std::array<double, kNumActivities>, kNumLevels> kActivitySeconds = {{
    {25000, 9000, 9000, 3600, 1500, 1500},
    {33000, 6500, 8000, 1800, 1000, 1000},
    {48000, 2500, 5500, 100, 300, 300},
}};
// Expected tweets per day: Negative, Neutral, Positive.
inline constexpr std::array<std::array<double, kNumSentiments>, kNumLevels> kTweetRates = {{
    {0.4, 0.8, 1.6},
    {0.9, 0.8, 1.0},
    {2.6, 0.7, 0.25},
}};
inline constexpr std::array<int, kNumLevels> kGdsCenter = {2, 7, 12};
inline constexpr std::array<int, kNumLevels> kStratumShares = {23, 7, 3};

inline constexpr double kProfileJitter = 0.08;  // lognormal sigma, per participant
inline constexpr double kDayJitter = 0.15;      // lognormal sigma, per day

struct ParticipantProfile {
  std::string participant_id;
  std::string imei;        // 15 digits
  std::string twitter_id;  // 18 digits
  DepressionLevel true_severity = DepressionLevel::Absence;
  std::array<double, kNumActivities> activity_seconds{};
  std::array<double, kNumSentiments> tweet_rates{};
  std::uint64_t seed = 0;
  int index = 0;
};

struct CohortConfig {
  int participants = 33;
  int weeks = 8;
  std::uint64_t seed = 7;
  double record_seconds_per_day = 180.0;  // accelerometer budget actually emitted per day
  double bout_seconds = 15.0;
  Date start = kStudyStart;
};

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Rng stream_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t s = seed;
  for (auto k : keys) s = mix_seed(s, k);
  return Rng(s);
}

inline std::string random_digits(Rng& rng, std::size_t n) {
  std::string s;
  std::uniform_int_distribution<int> d(0, 9), lead(1, 9);
  s += static_cast<char>('0' + lead(rng));
  while (s.size() < n) s += static_cast<char>('0' + d(rng));
  return s;
}

/// Stratum sizes proportional to 23/7/3 (largest remainder, each >= 1).
inline std::array<int, kNumLevels> stratum_sizes(int n) {
  if (n < 3) throw PreconditionError("cohort needs at least 3 participants");
  std::array<int, kNumLevels> sizes{};
  std::array<double, kNumLevels> rem{};
  int used = 0;
  for (int c = 0; c < kNumLevels; ++c) {
    const double exact = n * kStratumShares[c] / 33.0;
    sizes[c] = std::max(1, static_cast<int>(std::floor(exact)));
    rem[c] = exact - std::floor(exact);
    used += sizes[c];
  }
  while (used < n) {
    const int c = static_cast<int>(std::max_element(rem.begin(), rem.end()) - rem.begin());
    ++sizes[c];
    rem[c] = -1;
    ++used;
  }
  while (used > n) {
    const int c = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    --sizes[c];
    --used;
  }
  return sizes;
}

inline std::vector<ParticipantProfile> generate_cohort(int n, std::uint64_t seed) {
  const auto sizes = stratum_sizes(n);
  std::vector<DepressionLevel> levels;
  for (int c = 0; c < kNumLevels; ++c) levels.insert(levels.end(), sizes[c], static_cast<DepressionLevel>(c));
  Rng rng = stream_rng(seed, {0xC0407});
  std::shuffle(levels.begin(), levels.end(), rng);

  std::vector<ParticipantProfile> out;
  std::set<std::string> imeis, twitter_ids;
  std::normal_distribution<double> jitter(0.0, kProfileJitter);
  for (int i = 0; i < n; ++i) {
    ParticipantProfile p;
    p.index = i;
    char id[16];
    std::snprintf(id, sizeof(id), "P%02d", i + 1);
    p.participant_id = id;
    do p.imei = random_digits(rng, 15); while (!imeis.insert(p.imei).second);
    do p.twitter_id = random_digits(rng, 18); while (!twitter_ids.insert(p.twitter_id).second);
    p.true_severity = levels[static_cast<std::size_t>(i)];
    const int lv = static_cast<int>(p.true_severity);
    for (int a = 0; a < kNumActivities; ++a) p.activity_seconds[a] = kActivitySeconds[lv][a] * std::exp(jitter(rng));
    double total = 0;
    for (double s : p.activity_seconds) total += s;
    if (total > features::kSecondsPerDay)
      for (double& s : p.activity_seconds) s *= features::kSecondsPerDay / total;
    for (int s = 0; s < kNumSentiments; ++s) p.tweet_rates[s] = kTweetRates[lv][s] * std::exp(jitter(rng));
    p.seed = mix_seed(seed, static_cast<std::uint64_t>(i) + 1);
    out.push_back(std::move(p));
  }
  return out;
}

inline Date study_day(const CohortConfig& cfg, int week, int day) {
  return cfg.start + std::chrono::days{7 * week + day};
}

// ----------------------------------------------------------- activity days

struct Bout {
  ActivityLabel activity = ActivityLabel::Sitting;
  double seconds = 0.0;
};

/// Fixed-length bouts whose activities are drawn from the day's jittered propensities.
inline std::vector<Bout> synth_day_schedule(const ParticipantProfile& p, Date date, const CohortConfig& cfg) {
  std::vector<Bout> bouts;
  const int n = static_cast<int>(std::floor(cfg.record_seconds_per_day / cfg.bout_seconds + 1e-9));
  if (n <= 0) return bouts;
  Rng rng = stream_rng(p.seed, {0xDA7, static_cast<std::uint64_t>(date.time_since_epoch().count())});
  std::normal_distribution<double> jitter(0.0, kDayJitter);
  std::array<double, kNumActivities> w{};
  for (int a = 0; a < kNumActivities; ++a) w[a] = p.activity_seconds[a] * std::exp(jitter(rng));
  std::discrete_distribution<int> pick(w.begin(), w.end());
  for (int b = 0; b < n; ++b) bouts.push_back({static_cast<ActivityLabel>(pick(rng)), cfg.bout_seconds});
  return bouts;
}

namespace detail {

/// Characteristic body-acceleration shape of one activity bout.
struct Motion {
  double f = 0;  // fundamental, Hz
  std::array<double, 3> amp{};
  std::array<double, 3> harm2{};
  std::array<double, 3> harm3{};
  std::array<double, 3> drift{};  // slow component
  double drift_f = 0.6;
  double noise = 0.04;
};

inline Motion motion_for(ActivityLabel a, Rng& rng) {
  std::uniform_real_distribution<double> fj(0.93, 1.07), aj(0.85, 1.15);
  Motion m;
  switch (a) {
    case ActivityLabel::Sitting:
      m.noise = 0.04;
      break;
    case ActivityLabel::Standing:
      m.f = 0.7 * fj(rng);
      m.amp = {0.30, 0.10, 0.25};
      m.noise = 0.05;
      break;
    case ActivityLabel::Walking:
      m.f = 2.0 * fj(rng);
      m.amp = {1.2, 2.5, 0.9};
      m.harm2 = {0.3, 0.8, 0.4};
      m.noise = 0.15;
      break;
    case ActivityLabel::Jogging:
      m.f = 2.8 * fj(rng);
      m.amp = {2.5, 6.0, 2.0};
      m.harm2 = {0.8, 2.0, 0.8};
      m.noise = 0.25;
      break;
    case ActivityLabel::Upstairs:
      m.f = 1.6 * fj(rng);
      m.amp = {0.8, 2.0, 1.5};
      m.harm2 = {0.2, 0.5, 0.2};
      m.drift = {0.0, 0.0, 1.2};
      m.noise = 0.15;
      break;
    case ActivityLabel::Downstairs:
      m.f = 2.3 * fj(rng);
      m.amp = {0.6, 3.2, 0.6};
      m.harm3 = {0.3, 1.2, 0.3};
      m.drift = {1.2, 0.0, 0.0};
      m.noise = 0.15;
      break;
  }
  const double s = aj(rng);
  for (int k = 0; k < 3; ++k) {
    m.amp[k] *= s;
    m.harm2[k] *= s;
    m.harm3[k] *= s;
    m.drift[k] *= s;
  }
  return m;
}

/// Device orientation: gravity mostly along +y with a small per-bout tilt.
inline std::array<double, 3> gravity_for(Rng& rng) {
  std::normal_distribution<double> tilt(0.0, 0.25);
  std::array<double, 3> g{1.0 + tilt(rng), 9.6 + tilt(rng), 1.5 + tilt(rng)};
  const double norm = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
  for (double& v : g) v *= 9.81 / norm;
  return g;
}

inline void emit_bout(ActivityLabel a, double seconds, std::int64_t& t_ns, std::vector<signal::AccelSample>& out,
                      Rng& rng, double rate_hz = signal::kSampleRateHz) {
  const auto m = motion_for(a, rng);
  const auto g = gravity_for(rng);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::array<double, 3> ph{phase(rng), phase(rng), phase(rng)};
  std::normal_distribution<double> noise(0.0, m.noise);
  std::uniform_int_distribution<int> jitter_us(-2000, 2000);
  const auto n = static_cast<std::int64_t>(std::llround(seconds * rate_hz));
  const std::int64_t period = signal::period_ns(rate_hz);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::int64_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / rate_hz;
    std::array<double, 3> v{};
    for (int ax = 0; ax < 3; ++ax) {
      const double w = two_pi * m.f * t + ph[ax];
      v[ax] = g[ax] + m.amp[ax] * std::sin(w) + m.harm2[ax] * std::sin(2 * w) + m.harm3[ax] * std::sin(3 * w) +
              m.drift[ax] * std::sin(two_pi * m.drift_f * t + ph[ax]) + noise(rng);
      v[ax] = std::round(std::clamp(v[ax], -signal::kMaxAbsAccel, signal::kMaxAbsAccel) * 1e4) / 1e4;  // 1e-4 m/s^2 resolution
    }
    // timestamps wobble by up to 2 ms around the nominal grid
    out.push_back({t_ns + k * period + jitter_us(rng) * 1000, v[0], v[1], v[2]});
  }
  t_ns += n * period;
}

}  // namespace detail

inline std::int64_t day_start_ns(Date date) {
  return features::midnight_ns(date) + 9LL * 3600 * 1'000'000'000;  // recording starts 09:00
}

/// Accelerometer stream for one day: the schedule's bouts back to back, 20 Hz with timestamp jitter.
inline std::vector<signal::AccelSample> synth_accel_day(const ParticipantProfile& p, Date date, const CohortConfig& cfg,
                                                        std::vector<Bout>* schedule_out = nullptr) {
  const auto schedule = synth_day_schedule(p, date, cfg);
  if (schedule_out) *schedule_out = schedule;
  std::vector<signal::AccelSample> out;
  Rng rng = stream_rng(p.seed, {0xACC, static_cast<std::uint64_t>(date.time_since_epoch().count())});
  std::int64_t t = day_start_ns(date);
  for (const auto& b : schedule) detail::emit_bout(b.activity, b.seconds, t, out, rng);
  return out;
}

/// Single-activity bout starting at t0_ns, for labeled training data.
inline std::vector<signal::AccelSample> synth_bout(ActivityLabel a, double seconds, std::uint64_t seed,
                                                   std::int64_t t0_ns = 0) {
  Rng rng(seed);
  std::vector<signal::AccelSample> out;
  detail::emit_bout(a, seconds, t0_ns, out, rng);
  return out;
}

inline constexpr double kLabeledBoutSeconds = 60.0;

struct LabeledBout {
  ActivityLabel activity = ActivityLabel::Sitting;
  int bout = 0;
  std::vector<signal::AccelSample> samples;
};

/// Enough 60 s single-activity bouts per class to cut `per_class` windows from.
inline std::vector<LabeledBout> synth_labeled_bouts(int per_class, std::uint64_t seed,
                                                    const signal::PreprocessConfig& pre = {}) {
  const auto samples = static_cast<std::size_t>(std::llround(kLabeledBoutSeconds * pre.sample_rate_hz));
  const auto per_bout = signal::window_count(samples, pre.window_len, pre.overlap);
  if (per_bout == 0) throw PreconditionError("labeled bouts are shorter than one window");
  const int bouts = static_cast<int>((static_cast<std::size_t>(per_class) + per_bout - 1) / per_bout);
  std::vector<LabeledBout> out;
  for (int a = 0; a < kNumActivities; ++a)
    for (int b = 0; b < bouts; ++b) {
      const std::int64_t t0 = static_cast<std::int64_t>(b) * 100'000'000'000LL;
      out.push_back({static_cast<ActivityLabel>(a), b,
                     synth_bout(static_cast<ActivityLabel>(a), kLabeledBoutSeconds,
                                mix_seed(seed, static_cast<std::uint64_t>(a * 100000 + b)), t0)});
    }
  return out;
}

/// Preprocesses bouts and keeps at most `per_class` windows of each activity.
inline std::vector<har::LabeledWindow> window_bouts(std::span<const LabeledBout> bouts, int per_class,
                                                    const signal::PreprocessConfig& pre = {}) {
  std::vector<har::LabeledWindow> out;
  std::array<int, kNumActivities> have{};
  for (const auto& b : bouts) {
    auto& n = have[static_cast<int>(b.activity)];
    for (auto& w : signal::preprocess_stream(b.samples, "HAR", pre)) {
      if (n == per_class) break;
      out.push_back({std::move(w), b.activity});
      ++n;
    }
  }
  return out;
}

inline std::vector<har::LabeledWindow> synth_labeled_windows(int per_class, std::uint64_t seed,
                                                             const signal::PreprocessConfig& pre = {}) {
  return window_bouts(synth_labeled_bouts(per_class, seed, pre), per_class, pre);
}

// ------------------------------------------------------------------ tweets

namespace detail {
inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = {"feeling", "about", "my",    "day",  "with", "friends",
                                                 "this",    "week",  "really", "and", "talk", "again",
                                                 "at",      "home",  "after", "work", "some", "time"};
  return words;
}
}  // namespace detail

/// A lexicon-templated sentence whose polarity sign equals `label`. Every
/// sentence carries the phrase "mental health" so it passes the default
/// keyword filter.
inline std::string synth_tweet_text(SentimentLabel label, const text::Lexicon& lex, Rng& rng) {
  const auto pos = lex.words_with(1);
  const auto neg = lex.words_with(-1);
  if (pos.empty() || neg.empty()) throw PreconditionError("lexicon needs positive and negative words");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto draw = [&](const std::vector<std::string>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  std::vector<std::string> words;
  switch (label) {
    case SentimentLabel::Positive:
      words = {draw(pos), draw(pos)};
      if (u(rng) < 0.2) words.push_back(draw(neg));
      break;
    case SentimentLabel::Negative:
      words = {draw(neg), draw(neg)};
      if (u(rng) < 0.2) words.push_back(draw(pos));
      break;
    case SentimentLabel::Neutral:
      if (u(rng) < 0.1) words = {draw(pos), draw(neg)};
      break;
  }
  const int fillers = std::uniform_int_distribution<int>(3, 5)(rng);
  for (int i = 0; i < fillers; ++i) words.push_back(draw(detail::filler_words()));
  std::shuffle(words.begin(), words.end(), rng);
  const auto at = std::uniform_int_distribution<std::size_t>(0, words.size())(rng);
  words.insert(words.begin() + static_cast<std::ptrdiff_t>(at), "mental health");
  std::string s;
  for (const auto& w : words) s += (s.empty() ? "" : " ") + w;
  const auto tokens = text::tokenize(s);
  if (sentiment_from_score(text::polarity_score(tokens, lex)) != label)
    throw std::logic_error("tweet template produced the wrong polarity");
  return s;
}

struct GeneratedTweet {
  text::Tweet tweet;
  SentimentLabel label = SentimentLabel::Neutral;
};

/// Tweets for one study week: Poisson counts per day and label.
inline std::vector<GeneratedTweet> synth_tweets(const ParticipantProfile& p, int week, const CohortConfig& cfg,
                                                const text::Lexicon& lex) {
  std::vector<GeneratedTweet> out;
  Rng rng = stream_rng(p.seed, {0x7EE7, static_cast<std::uint64_t>(week)});
  std::uniform_int_distribution<std::int64_t> second_of_day(0, 86'399);
  std::uint64_t counter = 0;
  for (int d = 0; d < 7; ++d) {
    const Date date = study_day(cfg, week, d);
    for (int s = 0; s < kNumSentiments; ++s) {
      const int count = std::poisson_distribution<int>(p.tweet_rates[s])(rng);
      for (int k = 0; k < count; ++k) {
        const auto label = sentiment_from_index(s);
        // 18 digits: 1 | participant(3) | week(3) | counter(11)
        const std::uint64_t id = 100'000'000'000'000'000ULL + static_cast<std::uint64_t>(p.index) * 100'000'000'000'000ULL +
                                 static_cast<std::uint64_t>(week) * 100'000'000'000ULL + counter++;
        text::Tweet t{p.twitter_id, std::to_string(id),
                      features::midnight_ns(date) + second_of_day(rng) * 1'000'000'000LL,
                      synth_tweet_text(label, lex, rng)};
        out.push_back({std::move(t), label});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.tweet.t_ns < b.tweet.t_ns; });
  return out;
}

/// Stratum centre (2 / 7 / 12) plus noise in {-1,0,+1}, kept inside the stratum.
inline GdsScore synth_gds(const ParticipantProfile& p, int week) {
  Rng rng = stream_rng(p.seed, {0x6D5, static_cast<std::uint64_t>(week)});
  const int lv = static_cast<int>(p.true_severity);
  int g = kGdsCenter[lv] + std::uniform_int_distribution<int>(-1, 1)(rng);
  static constexpr std::array<std::pair<int, int>, kNumLevels> kBounds = {{{0, 4}, {5, 9}, {10, 15}}};
  g = std::clamp(g, kBounds[lv].first, kBounds[lv].second);
  return GdsScore(g);
}

/// Tweets labeled with their polarity sign, drawn evenly across classes.
inline std::vector<text::LabeledDocument> synth_sentiment_corpus(int per_class, std::uint64_t seed,
                                                                 const text::Lexicon& lex) {
  Rng rng(seed);
  std::vector<text::LabeledDocument> out;
  for (int i = 0; i < per_class; ++i)
    for (int s = 0; s < kNumSentiments; ++s) {
      const auto label = sentiment_from_index(s);
      out.push_back({text::tokenize(synth_tweet_text(label, lex, rng)), label});
    }
  return out;
}

}  // namespace hs::cohort
