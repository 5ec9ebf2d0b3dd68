// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ebf/analytics.hpp"
#include "ebf/config.hpp"
#include "ebf/sim/engine.hpp"

namespace ebf {

struct RunRecord {
    std::string label;
    std::optional<double> offered_rate;  // open-loop lambda, per second
    std::vector<RequestTrace> traces;
    LatencyReport latency;
    std::optional<RunStats> sim_stats;
    double arrival_rate = 0.0;  // measured, per second
};

struct Report {
    nlohmann::json json;
    std::vector<RunRecord> runs;
    bool threshold_violated = false;
};

/// Runs the configured mode (sweeping if configured), attaches analytics,
/// queuing predictions and gaps, trainer records and kernel results.
Report orchestrate(const RunConfig& config);

/// Queuing predictions only; no requests are executed unless the service
/// rate has to be measured by saturating the simulator.
Report predict_only(const RunConfig& config);

/// Trainer trade-off records only.
Report tradeoff_only(const RunConfig& config);

/// Kernel results only.
Report kernels_only(const RunConfig& config);

/// The rates a config runs at: sweep rates, or the single workload rate.
std::vector<double> offered_rates(const RunConfig& config);

/// Writes the report (atomically), NDJSON traces and breakdown CSV to the
/// paths named in `config.output`; `report_override` wins when non-empty.
void write_outputs(const Report& report, const RunConfig& config, const std::string& report_override = {});

}  // namespace ebf
