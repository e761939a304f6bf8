#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "narrationdep/core/error.hpp"

namespace narrationdep {

/// Seconds since 1970-01-01T00:00:00Z.
using UnixSeconds = std::int64_t;

namespace detail {

// Days since the epoch for a proleptic Gregorian date (H. Hinnant's algorithm).
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) noexcept {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct Civil {
  std::int64_t year;
  unsigned month;
  unsigned day;
};

constexpr Civil civil_from_days(std::int64_t z) noexcept {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return {y + (m <= 2), m, d};
}

constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) noexcept {
  return a / b - ((a % b != 0) && ((a < 0) != (b < 0)));
}

}  // namespace detail

/// Parses "YYYY-MM-DDTHH:MM:SS[.frac](Z|+HH:MM|-HH:MM)". Fractional seconds
/// are dropped.
inline UnixSeconds parse_utc(std::string_view s) {
  auto fail = [&]() -> UnixSeconds {
    throw ParseError("invalid timestamp '" + std::string(s) + "'");
  };
  auto digits = [&](std::size_t pos, std::size_t n) -> int {
    if (pos + n > s.size()) fail();
    int v = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
      if (s[i] < '0' || s[i] > '9') fail();
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  if (s.size() < 20 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':') {
    fail();
  }
  const int year = digits(0, 4), month = digits(5, 2), day = digits(8, 2);
  const int hour = digits(11, 2), minute = digits(14, 2), second = digits(17, 2);
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60) {
    fail();
  }
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
  }
  int offset = 0;
  if (pos < s.size() && s[pos] == 'Z' && pos + 1 == s.size()) {
    offset = 0;
  } else if (pos + 6 == s.size() && (s[pos] == '+' || s[pos] == '-') && s[pos + 3] == ':') {
    offset = (digits(pos + 1, 2) * 60 + digits(pos + 4, 2)) * 60;
    if (s[pos] == '-') offset = -offset;
  } else {
    fail();
  }
  const std::int64_t days = detail::days_from_civil(year, static_cast<unsigned>(month),
                                                    static_cast<unsigned>(day));
  return days * 86400 + hour * 3600 + minute * 60 + second - offset;
}

inline std::string format_utc(UnixSeconds t) {
  const std::int64_t days = detail::floor_div(t, 86400);
  const std::int64_t secs = t - days * 86400;
  const auto c = detail::civil_from_days(days);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02d:%02d:%02dZ",
                static_cast<long long>(c.year), c.month, c.day, static_cast<int>(secs / 3600),
                static_cast<int>(secs / 60 % 60), static_cast<int>(secs % 60));
  return buf;
}

/// Monday = 0 ... Sunday = 6, after shifting by offset_seconds.
inline int weekday_monday_first(UnixSeconds t, std::int64_t offset_seconds = 0) {
  const std::int64_t days = detail::floor_div(t + offset_seconds, 86400);
  // 1970-01-01 was a Thursday.
  return static_cast<int>(((days % 7) + 7 + 3) % 7);
}

inline int hour_of_day(UnixSeconds t, std::int64_t offset_seconds = 0) {
  const std::int64_t shifted = t + offset_seconds;
  const std::int64_t secs = shifted - detail::floor_div(shifted, 86400) * 86400;
  return static_cast<int>(secs / 3600);
}

}  // namespace narrationdep
