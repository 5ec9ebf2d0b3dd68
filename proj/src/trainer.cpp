// SPDX-License-Identifier: Apache-2.0
#include "ebf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ebf/error.hpp"

namespace ebf {

void validate_policy(const UpdatePolicy& policy) {
    if (policy.interval <= Nanos::zero()) throw Error(ErrorCode::InvalidPolicy, "update interval must be > 0");
    if (policy.curve.empty()) throw Error(ErrorCode::InvalidPolicy, "overhead curve needs at least one point");
    double prev = 0.0;
    for (std::size_t i = 0; i < policy.curve.size(); ++i) {
        const auto& pt = policy.curve[i];
        if (!(pt.overhead >= 0.0) || !(pt.gain >= 0.0))
            throw Error(ErrorCode::InvalidPolicy, "curve point " + std::to_string(i) + " must be non-negative");
        if (i > 0 && !(pt.overhead > prev))
            throw Error(ErrorCode::InvalidPolicy, "curve overheads must be strictly increasing at point " + std::to_string(i));
        prev = pt.overhead;
    }
    if (!(policy.base_accuracy >= 0.0 && policy.base_accuracy <= 1.0))
        throw Error(ErrorCode::InvalidPolicy, "base accuracy must lie in [0, 1]");
}

double interpolate_gain(const UpdatePolicy& policy, double x) {
    validate_policy(policy);
    const double last = policy.curve.back().overhead;
    if (!(x >= 0.0) || x > last)
        throw Error(ErrorCode::OutOfCurveRange,
                    "overhead " + std::to_string(x) + " outside [0, " + std::to_string(last) + "]");
    CurvePoint lo{0.0, 0.0};
    for (const auto& hi : policy.curve) {
        if (x == hi.overhead) return hi.gain;
        if (x < hi.overhead) {
            if (hi.overhead == lo.overhead) return hi.gain;
            const double t = (x - lo.overhead) / (hi.overhead - lo.overhead);
            return lo.gain + t * (hi.gain - lo.gain);
        }
        lo = hi;
    }
    return policy.curve.back().gain;
}

std::vector<TradeoffRecord> evaluate_policy(const UpdatePolicy& policy, Nanos horizon, Nanos per_update_cost,
                                            std::span<const Nanos> candidates, double weight) {
    validate_policy(policy);
    if (candidates.empty()) throw Error(ErrorCode::NoCandidates, "no candidate update intervals");
    for (Nanos c : candidates)
        if (c <= Nanos::zero()) throw Error(ErrorCode::InvalidPolicy, "candidate intervals must be > 0");
    if (per_update_cost < Nanos::zero()) throw Error(ErrorCode::InvalidPolicy, "per-update cost must be >= 0");
    const Nanos shortest = *std::min_element(candidates.begin(), candidates.end());
    if (horizon < shortest) throw Error(ErrorCode::InvalidPolicy, "horizon shorter than every candidate interval");

    const double max_overhead = policy.curve.back().overhead;
    std::vector<TradeoffRecord> out;
    out.reserve(candidates.size());
    for (Nanos interval : candidates) {
        TradeoffRecord r;
        r.interval = interval;
        r.updates = static_cast<std::uint64_t>(horizon / interval);
        r.total_cost = per_update_cost * static_cast<std::int64_t>(r.updates);
        r.overhead_fraction = static_cast<double>(r.total_cost.count()) / static_cast<double>(horizon.count());
        r.feasible = r.overhead_fraction <= max_overhead;
        r.gain = r.feasible ? interpolate_gain(policy, r.overhead_fraction) : 0.0;
        r.objective = r.gain - weight * r.overhead_fraction;
        out.push_back(r);
    }
    return out;
}

Nanos choose_interval(std::span<const TradeoffRecord> records, std::optional<Nanos> max_interval) {
    const TradeoffRecord* best = nullptr;
    for (const auto& r : records) {
        if (!r.feasible) continue;
        if (max_interval && r.interval > *max_interval) continue;
        if (!best || r.objective > best->objective || (r.objective == best->objective && r.interval > best->interval))
            best = &r;
    }
    if (!best) throw Error(ErrorCode::NoCandidates, "no feasible update interval");
    return best->interval;
}

}  // namespace ebf
