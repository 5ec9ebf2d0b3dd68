// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ebf/core/topology.hpp"
#include "ebf/workload.hpp"

namespace ebf {

/// Periodic model updates that occupy every server of one station for
/// `cost` each time they fire.
struct TrainerLoad {
    std::string station;
    Nanos interval{};
    Nanos cost{};
    bool operator==(const TrainerLoad&) const = default;
};

struct SimOptions {
    std::optional<TrainerLoad> trainer;
    double unstable_utilization = 0.98;
};

struct StationStats {
    std::string id;
    double utilization = 0.0;  // over the measured window
    std::uint64_t served = 0;
};

struct RunStats {
    std::uint64_t injected = 0;
    std::uint64_t completed = 0;  // measured, post warm-up
    std::uint64_t in_flight = 0;
    std::uint64_t discarded_warmup = 0;
    std::uint64_t quota_unreachable = 0;
    std::uint64_t trainer_updates = 0;
    Nanos measure_start{};
    Nanos end_time{};
    double mean_in_system = 0.0;  // time average over [measure_start, end_time]
    double arrival_rate = 0.0;    // measured arrivals per second over the same window
    double throughput = 0.0;      // measured completions per second
    std::vector<StationStats> stations;
    /// UnstableSystemWarning entries; non-fatal.
    std::vector<std::string> warnings;
};

struct SimResult {
    std::vector<RequestTrace> traces;  // measured only, in completion order
    RunStats stats;
};

/// Runs `pipeline` under `workload` on a single thread. Deterministic given
/// workload.seed: the same inputs reproduce the same traces bit for bit.
SimResult simulate(const Pipeline& pipeline, const WorkloadSpec& workload, const SimOptions& options = {});

/// Saturated throughput (requests/s) measured by driving the pipeline with
/// a closed loop of many zero-think users; the simulator's analogue of
/// measuring a service rate on a live system. Class mix and seed come from
/// `like`.
double estimate_service_rate(const Pipeline& pipeline, const WorkloadSpec& like, std::uint64_t requests = 20000);

}  // namespace ebf
