#include "fmc/time.hpp"

#include <charconv>
#include <cstdio>

#include "fmc/errors.hpp"

namespace fmc {

using namespace std::chrono;

namespace {

int parse_int(std::string_view text, std::size_t pos, std::size_t len) {
  if (pos + len > text.size()) {
    throw ParseError("timestamp too short: " + std::string(text));
  }
  int value = 0;
  auto first = text.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + len, value);
  if (ec != std::errc{} || ptr != first + len) {
    throw ParseError("bad timestamp: " + std::string(text));
  }
  return value;
}

} // namespace

UtcTime make_utc(int year, unsigned month, unsigned day, int hour, int minute, int second) {
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                           std::chrono::day{day}};
  if (!ymd.ok()) {
    throw ParseError("invalid calendar date");
  }
  return sys_days{ymd} + hours{hour} + minutes{minute} + seconds{second};
}

UtcTime parse_utc(std::string_view text) {
  // 0123456789012345678
  // YYYY-MM-DDTHH:MM:SS
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') {
    throw ParseError("bad timestamp: " + std::string(text));
  }
  const int y = parse_int(text, 0, 4);
  const int mo = parse_int(text, 5, 2);
  const int d = parse_int(text, 8, 2);
  int h = 0, mi = 0, s = 0;
  if (text.size() > 10) {
    if ((text[10] != 'T' && text[10] != ' ') || text.size() < 16 || text[13] != ':') {
      throw ParseError("bad timestamp: " + std::string(text));
    }
    h = parse_int(text, 11, 2);
    mi = parse_int(text, 14, 2);
    std::size_t rest = 16;
    if (text.size() >= 19 && text[16] == ':') {
      s = parse_int(text, 17, 2);
      rest = 19;
    }
    if (rest < text.size() && !(rest + 1 == text.size() && text[rest] == 'Z')) {
      throw ParseError("bad timestamp: " + std::string(text));
    }
  }
  if (mo < 1 || mo > 12 || h > 23 || mi > 59 || s > 60) {
    throw ParseError("bad timestamp: " + std::string(text));
  }
  return make_utc(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), h, mi, s);
}

CivilTime to_civil(UtcTime t) {
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss hms{t - day};
  return {static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
          static_cast<unsigned>(ymd.day()), static_cast<int>(hms.hours().count()),
          static_cast<int>(hms.minutes().count()), static_cast<int>(hms.seconds().count())};
}

std::string format_utc(UtcTime t) {
  const auto c = to_civil(t);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", c.year, c.month, c.day,
                c.hour, c.minute, c.second);
  return buf;
}

int day_of_year_365(UtcTime t) {
  const auto c = to_civil(t);
  static constexpr int kCumulative[12] = {0, 31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334};
  unsigned day = c.day;
  if (c.month == 2 && day == 29) {
    day = 28;
  }
  return kCumulative[c.month - 1] + static_cast<int>(day);
}

int hour_of_day(UtcTime t) { return to_civil(t).hour; }

UtcTime assign_nearest_hour(UtcTime t) {
  const auto down = floor<hours>(t);
  return (t - down >= minutes{30}) ? UtcTime{down + hours{1}} : UtcTime{down};
}

} // namespace fmc
