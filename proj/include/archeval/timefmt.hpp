#pragma once

#include <cstdio>
#include <ctime>
#include <string>

#include "archeval/error.hpp"
#include "archeval/metrics.hpp"

namespace archeval {

/// UTC, nanosecond precision: 2026-10-16T12:34:56.123456789Z
inline std::string format_rfc3339(Timestamp t) {
    using namespace std::chrono;
    const auto ns_total = t.time_since_epoch().count();
    auto secs = ns_total / 1'000'000'000;
    auto ns = ns_total % 1'000'000'000;
    if (ns < 0) {
        ns += 1'000'000'000;
        --secs;
    }
    const std::time_t tt = static_cast<std::time_t>(secs);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%09lldZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                  static_cast<long long>(ns));
    return buf;
}

/// Accepts `YYYY-MM-DDTHH:MM:SS[.fraction](Z|+HH:MM|-HH:MM)`.
inline Timestamp parse_rfc3339(const std::string& s) {
    int y, mo, d, h, mi, sec;
    int consumed = 0;
    if (std::sscanf(s.c_str(), "%4d-%2d-%2d%*1[Tt ]%2d:%2d:%2d%n", &y, &mo, &d, &h, &mi, &sec,
                    &consumed) != 6)
        throw InvalidArgument("not an RFC 3339 timestamp: '" + s + "'");
    std::size_t i = static_cast<std::size_t>(consumed);
    long long frac_ns = 0;
    if (i < s.size() && s[i] == '.') {
        ++i;
        long long scale = 100'000'000;
        while (i < s.size() && s[i] >= '0' && s[i] <= '9') {
            frac_ns += (s[i] - '0') * scale;
            scale /= 10;
            ++i;
        }
    }
    long long offset_s = 0;
    if (i < s.size() && (s[i] == 'Z' || s[i] == 'z')) {
        ++i;
    } else if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
        int oh = 0, om = 0;
        if (std::sscanf(s.c_str() + i + 1, "%2d:%2d", &oh, &om) != 2)
            throw InvalidArgument("bad UTC offset in timestamp: '" + s + "'");
        offset_s = (s[i] == '+' ? 1 : -1) * (oh * 3600LL + om * 60LL);
        i += 6;
    } else {
        throw InvalidArgument("timestamp lacks a UTC offset: '" + s + "'");
    }
    if (i != s.size()) throw InvalidArgument("trailing characters in timestamp: '" + s + "'");

    std::tm tm{};
    tm.tm_year = y - 1900;
    tm.tm_mon = mo - 1;
    tm.tm_mday = d;
    tm.tm_hour = h;
    tm.tm_min = mi;
    tm.tm_sec = sec;
    const long long epoch = static_cast<long long>(timegm(&tm)) - offset_s;
    return Timestamp(std::chrono::nanoseconds(epoch * 1'000'000'000LL + frac_ns));
}

}  // namespace archeval
