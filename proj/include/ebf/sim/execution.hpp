// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ebf/core/topology.hpp"
#include "ebf/core/types.hpp"
#include "ebf/rng.hpp"

namespace ebf {

/// Strictly positive draw; sub-nanosecond samples are clamped to 1 ns.
Nanos sample_service_time(const ServiceTimeModel& model, Rng& rng);

std::uint64_t sample_yield(const YieldModel& model, Rng& rng);

/// Index of the arm a branch executes. Class-driven branches map text to
/// arm 0 and image to arm 1 and never touch `rng`.
std::size_t resolve_branch(const PlanNode& branch, RequestClass cls, Rng& rng);

/// Stop rule for probing popularity tiers one by one.
class TieredSearch {
  public:
    TieredSearch(std::size_t tiers, std::uint64_t quota) : tiers_(tiers), quota_(quota) {}

    /// True once the quota is met or every tier has been probed.
    bool done() const noexcept { return quota_met() || probed_ == tiers_; }
    bool quota_met() const noexcept { return results_ >= quota_; }
    bool quota_unreachable() const noexcept { return done() && !quota_met(); }
    std::size_t next_tier() const noexcept { return probed_; }
    std::uint64_t results() const noexcept { return results_; }

    void record_probe(std::uint64_t yield) {
        results_ += yield;
        ++probed_;
    }

  private:
    std::size_t tiers_;
    std::uint64_t quota_;
    std::size_t probed_ = 0;
    std::uint64_t results_ = 0;
};

struct TierProbe {
    std::string component;
    ServiceTimeModel service;
    YieldModel yield;
};

struct TieredOutcome {
    std::vector<Span> spans;
    std::uint64_t results = 0;
    bool quota_unreachable = false;
};

/// Uncontended tiered search starting at `start`: probes run back to back
/// with no queuing, one span per probed tier.
TieredOutcome execute_tiered_search(std::span<const TierProbe> tiers, std::uint64_t quota, Nanos start, Rng& rng);

}  // namespace ebf
