// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>

namespace ebf {

/// Durations and monotonic timestamps are both integer nanoseconds.
using Nanos = std::chrono::nanoseconds;

inline constexpr double to_ms(Nanos d) noexcept { return static_cast<double>(d.count()) / 1e6; }
inline constexpr double to_seconds(Nanos d) noexcept { return static_cast<double>(d.count()) / 1e9; }

inline Nanos from_seconds(double s) noexcept { return Nanos{static_cast<std::int64_t>(std::llround(s * 1e9))}; }
inline Nanos from_ms(double ms) noexcept { return Nanos{static_cast<std::int64_t>(std::llround(ms * 1e6))}; }

/// Current reading of the host's monotonic clock.
inline Nanos monotonic_now() noexcept {
    return std::chrono::duration_cast<Nanos>(std::chrono::steady_clock::now().time_since_epoch());
}

}  // namespace ebf
