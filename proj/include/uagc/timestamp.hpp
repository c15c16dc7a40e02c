#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace uagc {

inline constexpr int kMinutesPerDay = 1440;
inline constexpr int kBinMinutes = 5;
inline constexpr int kBinsPerDay = kMinutesPerDay / kBinMinutes;  // 288
inline constexpr int kBinsPerWeek = 7 * kBinsPerDay;              // 2016

/// Naive wall-clock time (no zone), minute resolution.
struct Timestamp {
  std::int64_t minutes = 0;  // since 1970-01-01 00:00

  static Timestamp from_civil(int year, unsigned month, unsigned day, int hour = 0, int minute = 0);

  /// Accepts `YYYY-MM-DD HH:MM[:SS]` or `YYYY-MM-DDTHH:MM[:SS]`; seconds must be 0.
  static Timestamp parse(std::string_view text);  // throws InputError

  std::string iso() const;  // YYYY-MM-DDTHH:MM:SS

  int weekday() const;         // Monday = 0
  int minute_of_day() const;
  int week_bin() const;        // weekday * 288 + minute_of_day / 5

  Timestamp plus_minutes(std::int64_t m) const { return Timestamp{minutes + m}; }

  auto operator<=>(const Timestamp&) const = default;
};

}  // namespace uagc
