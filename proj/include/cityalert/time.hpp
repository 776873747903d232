#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <string>
#include <string_view>

#include "errors.hpp"

namespace cityalert {

using Timestamp = std::chrono::sys_seconds;

// Accepts "YYYY-MM-DDTHH:MM:SS" with an optional fractional part (truncated)
// followed by "Z" or a "+HH:MM"/"-HH:MM" offset.
inline Timestamp parse_timestamp(std::string_view s) {
    std::string buf(s);
    int year = 0, mon = 0, day = 0, hh = 0, mm = 0, ss = 0, consumed = 0;
    if (std::sscanf(buf.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &year, &mon, &day, &hh, &mm,
                    &ss, &consumed) != 6) {
        throw FormatError("bad timestamp: " + buf);
    }
    std::string_view rest = std::string_view(buf).substr(static_cast<std::size_t>(consumed));
    if (!rest.empty() && rest.front() == '.') {
        rest.remove_prefix(1);
        while (!rest.empty() && rest.front() >= '0' && rest.front() <= '9') rest.remove_prefix(1);
    }
    int offset_min = 0;
    if (rest == "Z" || rest == "z") {
    } else if (rest.size() == 6 && (rest[0] == '+' || rest[0] == '-') && rest[3] == ':') {
        int oh = 0, om = 0;
        if (std::sscanf(std::string(rest.substr(1)).c_str(), "%2d:%2d", &oh, &om) != 2) {
            throw FormatError("bad timestamp offset: " + buf);
        }
        offset_min = (rest[0] == '+' ? 1 : -1) * (oh * 60 + om);
    } else {
        throw FormatError("bad timestamp zone: " + buf);
    }
    using namespace std::chrono;
    year_month_day ymd{std::chrono::year{year}, month{static_cast<unsigned>(mon)},
                       std::chrono::day{static_cast<unsigned>(day)}};
    if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60) throw FormatError("bad timestamp: " + buf);
    return sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss} - minutes{offset_min};
}

inline std::string format_timestamp(Timestamp t) {
    std::time_t tt = static_cast<std::time_t>(t.time_since_epoch().count());
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline Timestamp now_seconds() {
    return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
}

} // namespace cityalert
