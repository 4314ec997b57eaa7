#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace fmc {

using UtcTime = std::chrono::sys_seconds;

/// Parses `YYYY-MM-DDTHH:MM:SS[Z]` (a space separator is also accepted).
/// Throws ParseError on malformed input.
UtcTime parse_utc(std::string_view text);

/// Formats as `YYYY-MM-DDTHH:MM:SSZ`.
std::string format_utc(UtcTime t);

UtcTime make_utc(int year, unsigned month, unsigned day, int hour = 0, int minute = 0,
                 int second = 0);

struct CivilTime {
  int year;
  unsigned month;
  unsigned day;
  int hour;
  int minute;
  int second;
};

CivilTime to_civil(UtcTime t);

/// Day of year in 1..365 with Feb 29 folded onto Feb 28, so that every
/// non-leap calendar day has the same index in every year.
int day_of_year_365(UtcTime t);

int hour_of_day(UtcTime t);

/// Rounds to the nearest whole hour; minute >= 30 rounds up.
UtcTime assign_nearest_hour(UtcTime t);

} // namespace fmc
