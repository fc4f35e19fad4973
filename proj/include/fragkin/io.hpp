#pragma once

#include <cstdio>
#include <string>

namespace fragkin {

/// Round-trip safe text for a double: 17 significant digits.
inline std::string fmt17(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

} // namespace fragkin
