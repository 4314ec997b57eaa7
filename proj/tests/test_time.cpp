#include <gtest/gtest.h>

#include "fmc/csv.hpp"
#include "fmc/errors.hpp"
#include "fmc/time.hpp"

using namespace fmc;

TEST(Time, ParseFormatRoundTrip) {
  const auto t = parse_utc("2021-07-04T13:45:09Z");
  EXPECT_EQ(format_utc(t), "2021-07-04T13:45:09Z");
  EXPECT_EQ(parse_utc("2021-07-04 13:45:09"), t);
  EXPECT_EQ(parse_utc("2021-07-04"), make_utc(2021, 7, 4));
}

TEST(Time, ParseRejectsGarbage) {
  EXPECT_THROW(parse_utc("2021/07/04"), ParseError);
  EXPECT_THROW(parse_utc("2021-02-30T00:00:00"), ParseError);
  EXPECT_THROW(parse_utc(""), ParseError);
}

TEST(Time, DayOfYearFoldsLeapDay) {
  EXPECT_EQ(day_of_year_365(make_utc(2019, 1, 1)), 1);
  EXPECT_EQ(day_of_year_365(make_utc(2019, 12, 31)), 365);
  EXPECT_EQ(day_of_year_365(make_utc(2020, 12, 31)), 365);
  EXPECT_EQ(day_of_year_365(make_utc(2020, 2, 28)), 59);
  EXPECT_EQ(day_of_year_365(make_utc(2020, 2, 29)), 59);
  EXPECT_EQ(day_of_year_365(make_utc(2020, 3, 1)), 60);
  EXPECT_EQ(day_of_year_365(make_utc(2019, 3, 1)), 60);
}

TEST(Time, DayOfYearCoversEveryDayOnce) {
  // Non-leap year: 1..365 each exactly once.
  std::vector<int> seen(366, 0);
  auto t = make_utc(2019, 1, 1);
  for (int d = 0; d < 365; ++d) {
    ++seen[static_cast<std::size_t>(day_of_year_365(t))];
    t += std::chrono::days(1);
  }
  for (int d = 1; d <= 365; ++d) EXPECT_EQ(seen[static_cast<std::size_t>(d)], 1) << d;
}

TEST(Time, NearestHourRoundsHalfUp) {
  EXPECT_EQ(assign_nearest_hour(make_utc(2020, 5, 1, 10, 29, 59)), make_utc(2020, 5, 1, 10));
  EXPECT_EQ(assign_nearest_hour(make_utc(2020, 5, 1, 10, 30, 0)), make_utc(2020, 5, 1, 11));
  EXPECT_EQ(assign_nearest_hour(make_utc(2020, 12, 31, 23, 45)), make_utc(2021, 1, 1, 0));
  EXPECT_EQ(hour_of_day(make_utc(2020, 5, 1, 17, 59)), 17);
}

TEST(Csv, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345.678, 0.0}) {
    EXPECT_EQ(csv::parse_double(csv::format_double(v)), v);
  }
  EXPECT_EQ(csv::format_double(0.5), "0.5");
  EXPECT_EQ(csv::format_optional(std::nullopt), "");
}

TEST(Csv, ParseOptional) {
  EXPECT_FALSE(csv::parse_optional("").has_value());
  EXPECT_DOUBLE_EQ(*csv::parse_optional("2.25"), 2.25);
  EXPECT_THROW(csv::parse_optional("abc"), ParseError);
  EXPECT_THROW(csv::parse_double(""), ParseError);
}

TEST(Csv, SplitKeepsEmptyFields) {
  const auto f = csv::split("a,,b,");
  ASSERT_EQ(f.size(), 4u);
  EXPECT_EQ(f[0], "a");
  EXPECT_EQ(f[1], "");
  EXPECT_EQ(f[3], "");
}
