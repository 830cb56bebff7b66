#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "hs/error.hpp"

namespace hs {

enum class ActivityLabel : int { Sitting = 0, Walking, Standing, Jogging, Upstairs, Downstairs };
inline constexpr int kNumActivities = 6;
inline constexpr std::array<std::string_view, kNumActivities> kActivityNames = {
    "Sitting", "Walking", "Standing", "Jogging", "Upstairs", "Downstairs"};

enum class SentimentLabel : int { Negative = -1, Neutral = 0, Positive = 1 };
inline constexpr int kNumSentiments = 3;

/// Dense index 0..2 in the order Negative, Neutral, Positive.
constexpr int sentiment_index(SentimentLabel s) { return static_cast<int>(s) + 1; }
constexpr SentimentLabel sentiment_from_index(int i) { return static_cast<SentimentLabel>(i - 1); }

constexpr SentimentLabel sentiment_from_score(long score) {
  if (score > 0) return SentimentLabel::Positive;
  if (score < 0) return SentimentLabel::Negative;
  return SentimentLabel::Neutral;
}

enum class DepressionLevel : int { Absence = 0, MildModerate = 1, Severe = 2 };
inline constexpr int kNumLevels = 3;
inline constexpr std::array<std::string_view, kNumLevels> kLevelNames = {"Absence", "MildModerate",
                                                                         "Severe"};

inline constexpr int kGdsMin = 0;
inline constexpr int kGdsMax = 15;

/// Integer score of the 15-item short-form Geriatric Depression Scale.
class GdsScore {
 public:
  explicit GdsScore(int value) : value_(value) {
    if (value < kGdsMin || value > kGdsMax)
      throw RangeError("GDS score " + std::to_string(value) + " outside [0,15]");
  }
  int value() const noexcept { return value_; }
  friend bool operator==(GdsScore, GdsScore) = default;

 private:
  int value_;
};

/// <5 absence, 5..9 mild/moderate, >9 severe.
inline DepressionLevel classify_level(GdsScore score) {
  if (score.value() < 5) return DepressionLevel::Absence;
  if (score.value() <= 9) return DepressionLevel::MildModerate;
  return DepressionLevel::Severe;
}

inline DepressionLevel classify_level(int score) { return classify_level(GdsScore(score)); }

inline std::string_view to_string(ActivityLabel a) { return kActivityNames[static_cast<int>(a)]; }
inline std::string_view to_string(DepressionLevel l) { return kLevelNames[static_cast<int>(l)]; }
inline std::string_view to_string(SentimentLabel s) {
  switch (s) {
    case SentimentLabel::Negative: return "Negative";
    case SentimentLabel::Neutral: return "Neutral";
    case SentimentLabel::Positive: return "Positive";
  }
  return "?";
}

}  // namespace hs
