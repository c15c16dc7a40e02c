#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "uagc/activity.hpp"
#include "uagc/error.hpp"
#include "uagc/rng.hpp"

using namespace uagc;

namespace {

double row_mean(const ActivityTable& t, std::size_t c) {
  return std::accumulate(t.row(c), t.row(c) + ActivityTable::bins(), 0.0) / ActivityTable::bins();
}

double row_std(const ActivityTable& t, std::size_t c) {
  const double m = row_mean(t, c);
  double ss = 0.0;
  for (std::size_t b = 0; b < ActivityTable::bins(); ++b) ss += (t.at(c, b) - m) * (t.at(c, b) - m);
  return std::sqrt(ss / ActivityTable::bins());
}

ActivityTable delta_table(std::size_t bin) {
  ActivityTable t(default_activity_labels());
  t.at(0, bin) = 1.0;
  return t;
}

}  // namespace

TEST(Histogram, SingleRowAndFloorBoundary) {
  auto t = build_histogram({{1, 0, 2}});
  EXPECT_EQ(t.at(0, 0), 1.0);
  EXPECT_EQ(t.total(0), 1.0);
  for (std::size_t c = 1; c < t.categories(); ++c) EXPECT_EQ(t.total(c), 0.0);
  t = build_histogram({{1, 0, 4}, {1, 0, 5}});
  EXPECT_EQ(t.at(0, 0), 1.0);
  EXPECT_EQ(t.at(0, 1), 1.0);
  t = build_histogram({{9, 6, 1439}});
  EXPECT_EQ(t.at(8, 2015), 1.0);
}

TEST(Histogram, RandomRowsKeepMass) {
  Rng rng(1);
  std::vector<SurveyRow> rows;
  for (int i = 0; i < 1000; ++i)
    rows.push_back({1 + int(rng.below(9)), int(rng.below(7)), int(rng.below(1440))});
  const auto t = build_histogram(rows);
  double total = 0.0;
  for (std::size_t c = 0; c < 9; ++c) total += t.total(c);
  EXPECT_EQ(total, 1000.0);
}

TEST(Histogram, OutOfRangeRowsNameTheRow) {
  EXPECT_THROW(build_histogram({{0, 0, 0}}), InputError);
  EXPECT_THROW(build_histogram({{10, 0, 0}}), InputError);
  EXPECT_THROW(build_histogram({{1, 7, 0}}), InputError);
  try {
    build_histogram({{1, 0, 0}, {1, 0, 1440}});
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
}

TEST(Smooth, DeltaPeakAndWrap) {
  auto s = smooth_histogram(delta_table(100), 2.0);
  EXPECT_NEAR(s.at(0, 100), 1.0 / (2.0 * std::sqrt(2.0 * M_PI)), 1e-4);
  for (std::size_t b = 0; b < ActivityTable::bins(); ++b) EXPECT_LE(s.at(0, b), s.at(0, 100));
  EXPECT_EQ(s.at(0, 99), s.at(0, 101));
  EXPECT_EQ(s.at(0, 100 + 9), 0.0);  // truncated at 4 sigma
  s = smooth_histogram(delta_table(0), 2.0);
  EXPECT_GT(s.at(0, 2015), 0.0);
  EXPECT_EQ(s.at(0, 2015), s.at(0, 1));
  EXPECT_THROW(smooth_histogram(delta_table(0), 0.0), UsageError);
}

TEST(Smooth, ConstantRowUnchangedAndMassPreserved) {
  ActivityTable t(default_activity_labels());
  Rng rng(3);
  for (std::size_t b = 0; b < ActivityTable::bins(); ++b) {
    t.at(0, b) = 3.0;
    t.at(1, b) = rng.below(5);
  }
  const auto s = smooth_histogram(t, 2.0);
  for (std::size_t b = 0; b < ActivityTable::bins(); ++b) EXPECT_NEAR(s.at(0, b), 3.0, 1e-12);
  EXPECT_NEAR(s.total(1), t.total(1), 1e-9 * t.total(1));
}

TEST(Normalize, ZScoreRampAndConstant) {
  ActivityTable t(default_activity_labels());
  for (std::size_t b = 0; b < ActivityTable::bins(); ++b) {
    t.at(0, b) = 2.0 * b;
    t.at(1, b) = 7.0;
  }
  const auto n = normalize_activity(t);
  EXPECT_NEAR(row_mean(n, 0), 0.0, 1e-12);
  EXPECT_NEAR(row_std(n, 0), 1.0, 1e-9);
  for (std::size_t b = 0; b < ActivityTable::bins(); ++b) EXPECT_EQ(n.at(1, b), 0.0);
  // idempotent
  const auto nn = normalize_activity(n);
  for (std::size_t b = 0; b < ActivityTable::bins(); ++b) EXPECT_NEAR(nn.at(0, b), n.at(0, b), 1e-9);
  // divide-only keeps the mean
  const auto d = normalize_activity(t, false);
  EXPECT_NEAR(row_std(d, 0), 1.0, 1e-9);
  EXPECT_NEAR(d.at(0, 10) - d.at(0, 9), n.at(0, 10) - n.at(0, 9), 1e-12);
  EXPECT_GT(row_mean(d, 0), 1.0);
}

TEST(Normalize, TwoBinToy) {
  // Only the first two bins are non-constant in a tiny toy: emulate [1,3] by
  // filling half the week with 1 and half with 3 (mean 2, population std 1).
  ActivityTable t(default_activity_labels());
  for (std::size_t b = 0; b < ActivityTable::bins(); ++b) t.at(0, b) = b < ActivityTable::bins() / 2 ? 1.0 : 3.0;
  const auto n = normalize_activity(t);
  EXPECT_NEAR(n.at(0, 0), -1.0, 1e-12);
  EXPECT_NEAR(n.at(0, 2015), 1.0, 1e-12);
}

TEST(SliceWindow, ShapeWrapAndPeriodicity) {
  ActivityTable t(default_activity_labels());
  for (std::size_t c = 0; c < 9; ++c)
    for (std::size_t b = 0; b < ActivityTable::bins(); ++b) t.at(c, b) = c * 10000.0 + b;
  const auto monday = Timestamp::from_civil(2012, 3, 5);
  auto w = slice_window(t, monday, 1, 0);
  ASSERT_EQ(w.size(), 9u);
  for (std::size_t c = 0; c < 9; ++c) EXPECT_EQ(w[c], t.at(c, 0));
  const auto sunday_late = Timestamp::from_civil(2012, 3, 11, 23, 55);
  w = slice_window(t, sunday_late, 1, 1);
  EXPECT_EQ(w[0], 2015.0);
  EXPECT_EQ(w[9], 0.0);
  const auto any = Timestamp::from_civil(2013, 7, 17, 13, 25);
  w = slice_window(t, any, 12, 12);
  EXPECT_EQ(w.size(), 24u * 9u);
  EXPECT_EQ(w, slice_window(t, any.plus_minutes(7 * 1440), 12, 12));
  EXPECT_THROW(slice_window(t, any, 1, 1, 7), UsageError);
}

TEST(TimestampFeature, OneHots) {
  auto f = timestamp_feature(Timestamp::from_civil(2012, 3, 5));
  EXPECT_EQ(f[0], 1);
  EXPECT_EQ(f[7], 1);
  f = timestamp_feature(Timestamp::from_civil(2012, 3, 11, 23, 55));
  EXPECT_EQ(f[6], 1);
  EXPECT_EQ(f[294], 1);
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const auto ts = Timestamp{static_cast<std::int64_t>(rng.below(20'000'000))};
    f = timestamp_feature(ts);
    EXPECT_EQ(f.size(), 295u);
    EXPECT_EQ(std::accumulate(f.begin(), f.end(), 0), 2);
  }
}

TEST(ActivityCsv, RoundTripAndErrors) {
  Rng rng(8);
  std::vector<SurveyRow> rows;
  for (int i = 0; i < 300; ++i) rows.push_back({1 + int(rng.below(9)), int(rng.below(7)), int(rng.below(1440))});
  const auto t = smooth_histogram(build_histogram(rows));
  std::stringstream s;
  write_activity_csv(t, s);
  const auto back = read_activity_csv(s);
  EXPECT_EQ(back.labels(), t.labels());
  for (std::size_t c = 0; c < 9; ++c)
    for (std::size_t b = 0; b < ActivityTable::bins(); ++b) EXPECT_EQ(back.at(c, b), t.at(c, b));
  std::stringstream survey;
  write_survey_csv(rows, survey);
  const auto rows_back = parse_survey_csv(survey);
  ASSERT_EQ(rows_back.size(), rows.size());
  EXPECT_EQ(rows_back[5].start_minute, rows[5].start_minute);
  std::istringstream truncated("bin,a\n0,1\n");
  EXPECT_THROW(read_activity_csv(truncated), InputError);
  std::istringstream bad("category,weekday,start_minute\n1,2\n");
  EXPECT_THROW(parse_survey_csv(bad), InputError);
}
