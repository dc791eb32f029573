#pragma once

#include <cctype>
#include <string>
#include <string_view>

#include "chronoeval/errors.hpp"

namespace chronoeval::dates {

// Calendar dates are carried as ISO "YYYY-MM-DD" strings; zero-padded ISO
// dates sort chronologically as plain strings, which is all the trading
// calendar needs.
inline bool is_iso_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    }
    const int month = (s[5] - '0') * 10 + (s[6] - '0');
    const int day = (s[8] - '0') * 10 + (s[9] - '0');
    return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

inline void require_iso_date(std::string_view s) {
    if (!is_iso_date(s)) {
        throw Error("not a YYYY-MM-DD date: " + std::string(s));
    }
}

inline int year_of(std::string_view iso_date) {
    require_iso_date(iso_date);
    return (iso_date[0] - '0') * 1000 + (iso_date[1] - '0') * 100 +
           (iso_date[2] - '0') * 10 + (iso_date[3] - '0');
}

}  // namespace chronoeval::dates
