#pragma once

#include <cstdio>
#include <string>

namespace mempath {

// 17 significant digits survive a double round-trip; all emitted files use
// this so reruns with the same seed are byte-identical.
inline std::string g17(double value) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

// Shortest decimal form that round-trips; used for human-facing metadata.
std::string shortest(double value);

} // namespace mempath
