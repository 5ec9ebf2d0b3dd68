// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ebf/time.hpp"

namespace ebf {

enum class UpdateMode : std::uint8_t { batch, streaming };

/// (extra training time as a fraction of the original, accuracy gain)
struct CurvePoint {
    double overhead = 0.0;
    double gain = 0.0;
    bool operator==(const CurvePoint&) const = default;
};

struct UpdatePolicy {
    UpdateMode mode = UpdateMode::batch;
    Nanos interval{};
    std::vector<CurvePoint> curve;  // strictly increasing in overhead
    double base_accuracy = 0.0;
    bool operator==(const UpdatePolicy&) const = default;
};

/// Throws InvalidPolicy.
void validate_policy(const UpdatePolicy& policy);

/// Piecewise-linear through (0, 0) and the curve points; no extrapolation
/// past the last point (OutOfCurveRange).
double interpolate_gain(const UpdatePolicy& policy, double overhead_fraction);

struct TradeoffRecord {
    Nanos interval{};
    std::uint64_t updates = 0;
    Nanos total_cost{};
    double overhead_fraction = 0.0;  // total_cost / horizon
    double gain = 0.0;
    double objective = 0.0;  // gain - weight * overhead_fraction
    bool feasible = true;    // false when the overhead lies past the curve
};

inline constexpr double kDefaultTradeoffWeight = 1.0;

/// One record per candidate interval. Throws NoCandidates, or InvalidPolicy
/// when the horizon is shorter than every candidate.
std::vector<TradeoffRecord> evaluate_policy(const UpdatePolicy& policy, Nanos horizon, Nanos per_update_cost,
                                            std::span<const Nanos> candidates, double weight = kDefaultTradeoffWeight);

/// Feasible record with the largest objective, ties going to the longer
/// interval. `max_interval` expresses a freshness requirement.
Nanos choose_interval(std::span<const TradeoffRecord> records, std::optional<Nanos> max_interval = std::nullopt);

}  // namespace ebf
