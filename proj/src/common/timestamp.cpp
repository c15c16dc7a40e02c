#include "uagc/timestamp.hpp"

#include <chrono>
#include <cstdio>

#include "uagc/error.hpp"
#include "uagc/text.hpp"

namespace uagc {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

Timestamp Timestamp::from_civil(int year, unsigned month, unsigned day, int hour, int minute) {
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  if (!ymd.ok() || hour < 0 || hour > 23 || minute < 0 || minute > 59)
    throw InputError("invalid calendar time");
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return Timestamp{static_cast<std::int64_t>(days) * kMinutesPerDay + hour * 60 + minute};
}

Timestamp Timestamp::parse(std::string_view text) {
  const auto s = trim(text);
  // YYYY-MM-DD?HH:MM[:SS]
  if (s.size() != 16 && s.size() != 19) throw InputError("invalid timestamp '" + std::string(s) + "'");
  if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':')
    throw InputError("invalid timestamp '" + std::string(s) + "'");
  try {
    const auto y = static_cast<int>(parse_int(s.substr(0, 4)));
    const auto mo = static_cast<unsigned>(parse_int(s.substr(5, 2)));
    const auto d = static_cast<unsigned>(parse_int(s.substr(8, 2)));
    const auto h = static_cast<int>(parse_int(s.substr(11, 2)));
    const auto mi = static_cast<int>(parse_int(s.substr(14, 2)));
    if (s.size() == 19) {
      if (s[16] != ':' || parse_int(s.substr(17, 2)) != 0)
        throw InputError("seconds must be zero");
    }
    return from_civil(y, mo, d, h, mi);
  } catch (const InputError&) {
    throw InputError("invalid timestamp '" + std::string(s) + "'");
  }
}

std::string Timestamp::iso() const {
  using namespace std::chrono;
  const auto days = floor_div(minutes, kMinutesPerDay);
  const auto mod = static_cast<int>(minutes - days * kMinutesPerDay);
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:00", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), mod / 60,
                mod % 60);
  return buf;
}

int Timestamp::weekday() const {
  // 1970-01-01 was a Thursday (Monday-based index 3).
  const auto days = floor_div(minutes, kMinutesPerDay);
  return static_cast<int>(((days + 3) % 7 + 7) % 7);
}

int Timestamp::minute_of_day() const {
  return static_cast<int>(minutes - floor_div(minutes, kMinutesPerDay) * kMinutesPerDay);
}

int Timestamp::week_bin() const { return weekday() * kBinsPerDay + minute_of_day() / kBinMinutes; }

}  // namespace uagc
