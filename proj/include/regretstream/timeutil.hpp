#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace regretstream {

/// UTC instant with one-second resolution.
struct Timestamp {
  std::int64_t seconds = 0;  // since 1970-01-01T00:00:00Z

  friend constexpr auto operator<=>(Timestamp, Timestamp) = default;
  friend constexpr std::int64_t operator-(Timestamp a, Timestamp b) { return a.seconds - b.seconds; }
  constexpr Timestamp plus(std::int64_t s) const { return Timestamp{seconds + s}; }
};

/// Parses RFC 3339 date-times ("2015-08-05T23:10:00Z", optional fractional
/// seconds which are truncated, "Z" or "+hh:mm"/"-hh:mm" offsets).
std::optional<Timestamp> parse_rfc3339(std::string_view text);

/// Always renders UTC with a "Z" suffix.
std::string format_rfc3339(Timestamp t);

Timestamp from_civil(int year, unsigned month, unsigned day, int hour = 0, int minute = 0,
                     int second = 0);

int hour_of_day(Timestamp t);
/// Monday = 0 ... Sunday = 6.
int day_of_week(Timestamp t);

}  // namespace regretstream
