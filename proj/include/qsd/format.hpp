#pragma once

#include <charconv>
#include <cstdio>
#include <string>

namespace qsd {

// Locale-independent decimal formatting, 12 significant digits by default.
// Used for every CSV / report number so reruns diff cleanly.
inline std::string format_double(double v, int significant = 12) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, significant);
    return std::string(buf, res.ptr);
}

inline std::string format_int(long long v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace qsd
