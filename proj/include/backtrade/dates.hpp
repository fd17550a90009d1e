#pragma once

#include <backtrade/errors.hpp>

#include <charconv>
#include <chrono>
#include <cstdio>
#include <string>
#include <string_view>

namespace backtrade {

using Date = std::chrono::sys_days;
using Timestamp = std::chrono::sys_seconds;

namespace detail {

inline int parse_int(std::string_view text, std::string_view whole) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ParseError("malformed date/time: '" + std::string(whole) + "'");
    }
    return value;
}

}  // namespace detail

/// Parses YYYY-MM-DD.
inline Date parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw ParseError("malformed date: '" + std::string(text) + "'");
    }
    using namespace std::chrono;
    const year_month_day ymd{year{detail::parse_int(text.substr(0, 4), text)},
                             month{static_cast<unsigned>(detail::parse_int(text.substr(5, 2), text))},
                             day{static_cast<unsigned>(detail::parse_int(text.substr(8, 2), text))}};
    if (!ymd.ok()) {
        throw ParseError("invalid calendar date: '" + std::string(text) + "'");
    }
    return sys_days{ymd};
}

inline std::string format_date(Date date) {
    const std::chrono::year_month_day ymd{date};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

/// Parses YYYY-MM-DDTHH:MM[:SS]Z (UTC only).
inline Timestamp parse_timestamp(std::string_view text) {
    if (text.size() < 17 || text[10] != 'T' || text.back() != 'Z') {
        throw ParseError("malformed UTC timestamp: '" + std::string(text) + "'");
    }
    const Date date = parse_date(text.substr(0, 10));
    const auto clock = text.substr(11, text.size() - 12);
    int h = 0, m = 0, s = 0;
    if (clock.size() == 5 && clock[2] == ':') {
        h = detail::parse_int(clock.substr(0, 2), text);
        m = detail::parse_int(clock.substr(3, 2), text);
    } else if (clock.size() == 8 && clock[2] == ':' && clock[5] == ':') {
        h = detail::parse_int(clock.substr(0, 2), text);
        m = detail::parse_int(clock.substr(3, 2), text);
        s = detail::parse_int(clock.substr(6, 2), text);
    } else {
        throw ParseError("malformed UTC timestamp: '" + std::string(text) + "'");
    }
    if (h > 23 || m > 59 || s > 59) {
        throw ParseError("malformed UTC timestamp: '" + std::string(text) + "'");
    }
    using namespace std::chrono;
    return Timestamp{date} + hours{h} + minutes{m} + seconds{s};
}

inline std::string format_timestamp(Timestamp ts) {
    using namespace std::chrono;
    const Date date = floor<days>(ts);
    const auto secs = (ts - Timestamp{date}).count();
    char buf[64];
    std::snprintf(buf, sizeof buf, "T%02lld:%02lld:%02lldZ", static_cast<long long>(secs / 3600),
                  static_cast<long long>(secs / 60 % 60), static_cast<long long>(secs % 60));
    return format_date(date) + buf;
}

/// Minutes after local midnight, from "HH:MM".
inline std::chrono::minutes parse_local_time(std::string_view text) {
    if (text.size() != 5 || text[2] != ':') {
        throw ParseError("malformed local time: '" + std::string(text) + "'");
    }
    const int h = detail::parse_int(text.substr(0, 2), text);
    const int m = detail::parse_int(text.substr(3, 2), text);
    if (h > 23 || m > 59) {
        throw ParseError("malformed local time: '" + std::string(text) + "'");
    }
    return std::chrono::minutes{h * 60 + m};
}

inline bool is_weekend(Date date) {
    const std::chrono::weekday wd{date};
    return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
}

/// UTC offset of `zone` on `date`. Supports "UTC", fixed offsets "UTC+HH:MM" /
/// "UTC-HH:MM", and "America/New_York" (US DST rules in force since 2007).
/// The offset is evaluated for a morning wall-clock time, which is all the
/// market-open conversion needs.
inline std::chrono::minutes utc_offset(std::string_view zone, Date date) {
    using namespace std::chrono;
    if (zone == "UTC") {
        return minutes{0};
    }
    if (zone.size() == 9 && zone.substr(0, 3) == "UTC" && (zone[3] == '+' || zone[3] == '-')) {
        const auto magnitude = parse_local_time(zone.substr(4));
        return zone[3] == '+' ? magnitude : -magnitude;
    }
    if (zone == "America/New_York") {
        const year y = year_month_day{date}.year();
        const sys_days dst_start{year_month_weekday{y / March / Sunday[2]}};
        const sys_days dst_end{year_month_weekday{y / November / Sunday[1]}};
        const bool dst = date >= dst_start && date < dst_end;
        return hours{dst ? -4 : -5};
    }
    throw ParseError("unsupported timezone: '" + std::string(zone) + "'");
}

inline Timestamp local_to_utc(Date date, std::chrono::minutes local_time, std::string_view zone) {
    return Timestamp{date} + local_time - utc_offset(zone, date);
}

}  // namespace backtrade
