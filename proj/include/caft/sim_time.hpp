#pragma once

#include <chrono>
#include <cstdint>
#include <string>

namespace caft {

// Simulated time is kept in integer femtoseconds so that hop latencies add up
// exactly and event ordering never depends on floating point rounding.
using SimTime = std::chrono::duration<std::int64_t, std::femto>;

inline double to_seconds(SimTime t) { return static_cast<double>(t.count()) * 1e-15; }

inline SimTime from_seconds(double s) {
    return SimTime{static_cast<std::int64_t>(s * 1e15 + (s >= 0 ? 0.5 : -0.5))};
}

// Fixed-point rendering "S.sssssssssssssss" with all fifteen fractional digits.
std::string format_seconds(SimTime t);

}  // namespace caft
