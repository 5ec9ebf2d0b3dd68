// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "ebf/core/types.hpp"

namespace ebf {

inline constexpr double kBranchWeightTolerance = 1e-9;

/// Checks every topology invariant and returns the canonical form
/// (components sorted by id). Idempotent.
///
/// Throws Error with EmptyTopology, UnknownNodeId, CycleDetected,
/// BranchWeightSumInvalid or InvalidComponent; the message names the
/// offending node.
Topology validate_topology(Topology raw);

/// Composition tree with every reference resolved to a station index.
struct PlanNode {
    SpanKind kind = SpanKind::leaf;
    std::string label;           // component id (leaf) or module name
    std::size_t station = 0;     // leaf only
    std::vector<PlanNode> children;
    BranchMode branch_mode = BranchMode::probability;
    std::vector<double> cumulative_weights;  // probability branch only
    struct TierPlan {
        std::size_t station = 0;
        YieldModel yield;
    };
    std::vector<TierPlan> tiers;
    std::uint32_t quota = 0;
};

/// A validated topology compiled for execution. Immutable, shareable
/// across threads.
class Pipeline {
  public:
    explicit Pipeline(Topology validated);

    const Topology& topology() const noexcept { return topology_; }
    const PlanNode& root() const noexcept { return root_; }
    const std::vector<ComponentSpec>& stations() const noexcept { return topology_.components; }
    std::size_t station_index(std::string_view id) const;
    std::size_t entry_station() const noexcept { return entry_; }

  private:
    Topology topology_;
    PlanNode root_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t entry_ = 0;
};

/// Index of the first leaf that executes along any path through `node`
/// (the leftmost leaf); used to check that the entry runs first.
const PlanNode& first_leaf(const PlanNode& node);

}  // namespace ebf
