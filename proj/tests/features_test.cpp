#include <gtest/gtest.h>

#include "hs/cohort.hpp"
#include "hs/features.hpp"

using namespace hs;
using namespace hs::features;
using namespace std::chrono;

namespace {

const Date kSaturday = cohort::kStudyStart;  // 2019-04-06

std::vector<WindowPrediction> run(ActivityLabel a, int n, std::int64_t t0, const std::string& pid = "P01") {
  std::vector<WindowPrediction> v;
  for (int i = 0; i < n; ++i) v.push_back({pid, t0 + i * 4'500'000'000LL, a});
  return v;
}

DailyFeatures random_day(Rng& rng, Date d) {
  std::uniform_real_distribution<double> secs(0, 6000);
  std::uniform_int_distribution<int> count(0, 6);
  DailyFeatures day{"P01", d, {}};
  for (int i = 0; i < kNumActivities; ++i) day.values[i] = secs(rng);
  for (int i = kNumActivities; i < kDailyFeatures; ++i) day.values[i] = count(rng);
  return day;
}

}  // namespace

TEST(Calendar, StudyStartsOnSaturday) {
  EXPECT_EQ(weekday{kSaturday}, Saturday);
  int work = 0, wkend = 0;
  for (int k = 0; k < 7; ++k) {
    work += in_subgroup(kSaturday + days{k}, Subgroup::WorkingDays);
    wkend += in_subgroup(kSaturday + days{k}, Subgroup::Weekends);
    EXPECT_TRUE(in_subgroup(kSaturday + days{k}, Subgroup::Weekdays));
  }
  EXPECT_EQ(work, 5);
  EXPECT_EQ(wkend, 2);
  EXPECT_TRUE(in_subgroup(kSaturday + days{6}, Subgroup::Weekends));  // Friday
  EXPECT_TRUE(in_subgroup(kSaturday + days{1}, Subgroup::WorkingDays));  // Sunday
}

TEST(AggregateDay, EmptyDayIsZero) {
  const auto d = aggregate_day({}, {}, "P01", kSaturday);
  for (double v : d.values) EXPECT_EQ(v, 0.0);
}

TEST(AggregateDay, StrideCredit) {
  const auto t0 = midnight_ns(kSaturday) + 9LL * 3600 * 1'000'000'000;
  const auto d = aggregate_day(run(ActivityLabel::Walking, 10, t0), {}, "P01", kSaturday);
  EXPECT_DOUBLE_EQ(d.values[static_cast<int>(ActivityLabel::Walking)], 9 * 4.5 + 9);
  EXPECT_DOUBLE_EQ(d.activity_seconds(), 49.5);
}

TEST(AggregateDay, LabelChangeClosesRun) {
  const auto t0 = midnight_ns(kSaturday) + 1'000'000'000'000LL;
  auto w = run(ActivityLabel::Sitting, 4, t0);
  auto j = run(ActivityLabel::Jogging, 3, t0 + 4 * 4'500'000'000LL);
  w.insert(w.end(), j.begin(), j.end());
  const auto d = aggregate_day(w, {}, "P01", kSaturday);
  // the sitting run hands over to jogging mid-window, so it keeps stride credit
  EXPECT_DOUBLE_EQ(d.values[static_cast<int>(ActivityLabel::Sitting)], 4 * 4.5);
  EXPECT_DOUBLE_EQ(d.values[static_cast<int>(ActivityLabel::Jogging)], 2 * 4.5 + 9);
  EXPECT_DOUBLE_EQ(d.activity_seconds(), 6 * 4.5 + 9);
}

TEST(AggregateDay, SentimentCounts) {
  const std::vector<SentimentLabel> s = {SentimentLabel::Negative, SentimentLabel::Negative, SentimentLabel::Positive};
  const auto d = aggregate_day({}, s, "P01", kSaturday);
  EXPECT_EQ(d.values[6], 2);
  EXPECT_EQ(d.values[7], 0);
  EXPECT_EQ(d.values[8], 1);
}

TEST(AggregateDay, PermutationInvariantAndBounded) {
  Rng rng(3);
  std::vector<WindowPrediction> w;
  std::uniform_int_distribution<int> lab(0, 5);
  const auto t0 = midnight_ns(kSaturday);
  for (int i = 0; i < 19200; ++i) w.push_back({"P01", t0 + i * 4'500'000'000LL, static_cast<ActivityLabel>(lab(rng))});
  const auto a = aggregate_day(w, {}, "P01", kSaturday);
  std::shuffle(w.begin(), w.end(), rng);
  const auto b = aggregate_day(w, {}, "P01", kSaturday);
  EXPECT_EQ(a.values, b.values);
  EXPECT_LE(a.activity_seconds(), kSecondsPerDay);
  EXPECT_NEAR(a.activity_seconds(), kSecondsPerDay, 1e-6);
}

TEST(AggregateDay, IsolatedWindowsGetFullCredit) {
  const auto t0 = midnight_ns(kSaturday);
  std::vector<WindowPrediction> w = {{"P01", t0, ActivityLabel::Standing}, {"P01", t0 + 60'000'000'000LL, ActivityLabel::Standing}};
  EXPECT_DOUBLE_EQ(aggregate_day(w, {}, "P01", kSaturday).values[2], 18.0);
  // a window starting 3 s before midnight is only credited up to midnight
  std::vector<WindowPrediction> late = {{"P01", t0 + 86'397'000'000'000LL, ActivityLabel::Standing}};
  EXPECT_DOUBLE_EQ(aggregate_day(late, {}, "P01", kSaturday).values[2], 3.0);
}

TEST(AggregateDay, GroupingErrors) {
  const auto t0 = midnight_ns(kSaturday);
  EXPECT_THROW(aggregate_day(run(ActivityLabel::Sitting, 1, t0, "P02"), {}, "P01", kSaturday), GroupingError);
  EXPECT_THROW(aggregate_day(run(ActivityLabel::Sitting, 1, t0), {}, "P01", kSaturday + days{1}), GroupingError);
}

TEST(Subgroups, IdenticalDays) {
  std::vector<DailyFeatures> week;
  const std::array<double, 9> d = {100, 50, 25, 5, 2, 1, 3, 1, 2};
  for (int k = 0; k < 7; ++k) week.push_back({"P01", kSaturday + days{k}, d});
  const auto all = subgroup_sum(week, kSaturday, Subgroup::Weekdays);
  const auto work = subgroup_sum(week, kSaturday, Subgroup::WorkingDays);
  const auto wkend = subgroup_sum(week, kSaturday, Subgroup::Weekends);
  for (int i = 0; i < 9; ++i) {
    EXPECT_EQ(all[i], 7 * d[i]);
    EXPECT_EQ(work[i], 5 * d[i]);
    EXPECT_EQ(wkend[i], 2 * d[i]);
  }
  for (double v : subgroup_sum({}, kSaturday, Subgroup::Weekends)) EXPECT_EQ(v, 0.0);
}

TEST(Subgroups, RangeAndAnchorErrors) {
  std::vector<DailyFeatures> week = {{"P01", kSaturday + days{7}, {}}};
  EXPECT_THROW(subgroup_sum(week, kSaturday, Subgroup::Weekdays), RangeError);
  EXPECT_THROW(subgroup_sum({}, kSaturday + days{1}, Subgroup::Weekdays), PreconditionError);
}

TEST(WeekVector, LayoutAndHandSummedWeek) {
  const auto names = weekly_feature_names();
  ASSERT_EQ(names.size(), 27u);
  EXPECT_EQ(names[0], "ST_week");
  EXPECT_EQ(names[9], "ST_work");
  EXPECT_EQ(names[26], "PoS_wkend");

  // Saturday (weekend) and Sunday (working day)
  const std::vector<DailyFeatures> days2 = {{"P01", kSaturday, {10, 0, 0, 0, 0, 0, 1, 0, 0}},
                                            {"P01", kSaturday + days{1}, {5, 3, 0, 0, 0, 0, 0, 0, 2}}};
  const auto v = build_week_vector(days2, "P01", 0, kSaturday);
  std::array<double, 27> want{};
  want[0] = 15, want[1] = 3, want[6] = 1, want[8] = 2;  // weekdays
  want[9] = 5, want[10] = 3, want[17] = 2;              // working days
  want[18] = 10, want[24] = 1;                          // weekend
  EXPECT_EQ(v.values, want);
}

TEST(WeekVector, PartitionIdentityOnRandomWeeks) {
  Rng rng(19);
  std::bernoulli_distribution present(0.8);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<DailyFeatures> week;
    for (int k = 0; k < 7; ++k)
      if (present(rng)) week.push_back(random_day(rng, kSaturday + days{k}));
    const auto v = build_week_vector(week, "P01", trial, kSaturday);
    for (int k = 0; k < 9; ++k) ASSERT_EQ(v.values[k], v.values[k + 9] + v.values[k + 18]);
  }
}

TEST(WeeklyCsv, RoundTrip) {
  Rng rng(2);
  std::vector<WeekRow> rows;
  for (int i = 0; i < 5; ++i) {
    std::vector<DailyFeatures> week;
    for (int k = 0; k < 7; ++k) week.push_back(random_day(rng, kSaturday + days{k}));
    rows.push_back({build_week_vector(week, "P0" + std::to_string(i), i, kSaturday), i * 3});
  }
  const auto back = parse_weekly_csv(format_weekly_csv(rows));
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].features.participant_id, rows[i].features.participant_id);
    EXPECT_EQ(back[i].features.values, rows[i].features.values);
    EXPECT_EQ(back[i].gds, rows[i].gds);
  }
  EXPECT_THROW(parse_weekly_csv("bad,header\n"), ParseError);
}
