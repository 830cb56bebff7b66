#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <tuple>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hs/error.hpp"
#include "hs/types.hpp"
#include "hs/util.hpp"

namespace hs::features {

using Date = std::chrono::sys_days;

inline constexpr int kDailyFeatures = 9;
inline constexpr int kWeeklyFeatures = 27;
inline constexpr double kSecondsPerDay = 86'400.0;

/// Table order: six activity times followed by three sentiment counts.
inline constexpr std::array<std::string_view, kDailyFeatures> kFeatureNames = {
    "ST", "WT", "StT", "JoT", "UpT", "DownT", "NeS", "NuS", "PoS"};

enum class Subgroup { Weekdays = 0, WorkingDays = 1, Weekends = 2 };
inline constexpr std::array<std::string_view, 3> kSubgroupSuffix = {"week", "work", "wkend"};

inline Date date_of(std::int64_t t_ns) {
  return std::chrono::floor<std::chrono::days>(std::chrono::sys_time<std::chrono::nanoseconds>(
      std::chrono::nanoseconds(t_ns)));
}

inline std::int64_t midnight_ns(Date d) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(d.time_since_epoch()).count();
}

inline std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

/// Sunday..Thursday are working days; Friday and Saturday form the weekend.
inline bool in_subgroup(Date d, Subgroup g) {
  using namespace std::chrono;
  const weekday wd{d};
  switch (g) {
    case Subgroup::Weekdays: return true;
    case Subgroup::WorkingDays: return wd != Friday && wd != Saturday;
    case Subgroup::Weekends: return wd == Friday || wd == Saturday;
  }
  return false;
}

/// Names in vector order: weekdays block, working-days block, weekend block.
inline std::vector<std::string> weekly_feature_names() {
  std::vector<std::string> names;
  for (auto suffix : kSubgroupSuffix)
    for (auto f : kFeatureNames) names.push_back(std::string(f) + "_" + std::string(suffix));
  return names;
}

struct DailyFeatures {
  std::string participant_id;
  Date date{};
  std::array<double, kDailyFeatures> values{};

  double activity_seconds() const {
    double s = 0;
    for (int i = 0; i < kNumActivities; ++i) s += values[i];
    return s;
  }
};

struct WindowPrediction {
  std::string participant_id;
  std::int64_t start_t_ns = 0;
  ActivityLabel label = ActivityLabel::Sitting;
};

struct TimeCredit {
  double window_seconds = 9.0;
};

/// Each window credits its label with the time until the next window starts,
/// at most the window length and never past midnight, so overlapping windows
/// are not counted twice and a contiguous run ends with one full window.
inline DailyFeatures aggregate_day(std::span<const WindowPrediction> predictions,
                                   std::span<const SentimentLabel> sentiments, const std::string& participant_id,
                                   Date date, const TimeCredit& credit = {}) {
  DailyFeatures day{participant_id, date, {}};
  std::vector<WindowPrediction> sorted(predictions.begin(), predictions.end());
  for (const auto& p : sorted) {
    if (p.participant_id != participant_id)
      throw GroupingError("window of participant " + p.participant_id + " aggregated under " + participant_id);
    if (date_of(p.start_t_ns) != date)
      throw GroupingError("window dated " + format_date(date_of(p.start_t_ns)) + " aggregated under " +
                          format_date(date));
  }
  std::sort(sorted.begin(), sorted.end(), [](const WindowPrediction& a, const WindowPrediction& b) {
    return std::tie(a.start_t_ns, a.label) < std::tie(b.start_t_ns, b.label);
  });
  const std::int64_t day_end = midnight_ns(date + std::chrono::days{1});
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    double s = credit.window_seconds;
    if (i + 1 < sorted.size()) s = std::min(s, static_cast<double>(sorted[i + 1].start_t_ns - sorted[i].start_t_ns) / 1e9);
    s = std::min(s, static_cast<double>(day_end - sorted[i].start_t_ns) / 1e9);
    day.values[static_cast<int>(sorted[i].label)] += s;
  }
  for (auto s : sentiments) day.values[kNumActivities + sentiment_index(s)] += 1.0;
  return day;
}

/// Feature sums over the subgroup's days within the Saturday-start week.
inline std::array<double, kDailyFeatures> subgroup_sum(std::span<const DailyFeatures> days, Date week_start,
                                                       Subgroup g) {
  if (std::chrono::weekday{week_start} != std::chrono::Saturday)
    throw PreconditionError("week must start on a Saturday, got " + format_date(week_start));
  std::array<double, kDailyFeatures> out{};
  for (const auto& d : days) {
    if (d.date < week_start || d.date >= week_start + std::chrono::days{7})
      throw RangeError("day " + format_date(d.date) + " outside week starting " + format_date(week_start));
    if (!in_subgroup(d.date, g)) continue;
    for (int i = 0; i < kDailyFeatures; ++i) out[i] += d.values[i];
  }
  return out;
}

struct WeeklyFeatureVector {
  std::string participant_id;
  int week_index = 0;
  std::array<double, kWeeklyFeatures> values{};
};

inline WeeklyFeatureVector build_week_vector(std::span<const DailyFeatures> days, const std::string& participant_id,
                                             int week_index, Date week_start) {
  WeeklyFeatureVector v{participant_id, week_index, {}};
  const auto work = subgroup_sum(days, week_start, Subgroup::WorkingDays);
  const auto wkend = subgroup_sum(days, week_start, Subgroup::Weekends);
  // whole week as work + weekend so the partition holds bit for bit
  for (int i = 0; i < kDailyFeatures; ++i) {
    v.values[i] = work[i] + wkend[i];
    v.values[i + kDailyFeatures] = work[i];
    v.values[i + 2 * kDailyFeatures] = wkend[i];
  }
  return v;
}

// -------------------------------------------------------------- CSV table

/// One labeled participant-week.
struct WeekRow {
  WeeklyFeatureVector features;
  int gds = 0;
};

inline std::string weekly_csv_header() {
  std::string h = "participant_id,week_index";
  for (const auto& n : weekly_feature_names()) h += "," + n;
  h += ",gds";
  return h;
}

inline std::string format_weekly_csv(std::span<const WeekRow> rows) {
  std::string out = weekly_csv_header() + "\n";
  for (const auto& r : rows) {
    out += r.features.participant_id + "," + std::to_string(r.features.week_index);
    for (double v : r.features.values) out += "," + format_double(v);
    out += "," + std::to_string(r.gds) + "\n";
  }
  return out;
}

inline std::vector<WeekRow> parse_weekly_csv(std::string_view text) {
  std::vector<WeekRow> rows;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (line_no == 1) {
      if (trim(line) != weekly_csv_header()) throw ParseError("unexpected weekly feature header", 1);
      continue;
    }
    const auto f = split(trim(line), ',');
    if (f.size() != kWeeklyFeatures + 3) throw ParseError("weekly row needs 30 columns", line_no);
    WeekRow r;
    r.features.participant_id = std::string(f[0]);
    r.features.week_index = parse_number<int>(f[1], line_no);
    for (int i = 0; i < kWeeklyFeatures; ++i) r.features.values[i] = parse_number<double>(f[2 + i], line_no);
    r.gds = parse_number<int>(f[kWeeklyFeatures + 2], line_no);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace hs::features
