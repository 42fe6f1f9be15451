#pragma once

#include <charconv>
#include <cstdlib>
#include <string>

namespace opelab {

/// Shortest decimal string that parses back to exactly the same double.
inline std::string fmt_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
    return std::strtod(s.c_str(), nullptr);
}

} // namespace opelab
