// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "ebf/core/topology.hpp"
#include "ebf/net/frame.hpp"
#include "ebf/net/socket.hpp"
#include "ebf/workload.hpp"

namespace ebf::net {

struct DriveOptions {
    Nanos timeout = std::chrono::seconds(10);  // per request
    Nanos connect_timeout = std::chrono::seconds(2);
    bool health_check = true;
};

struct DriveResult {
    std::vector<RequestTrace> traces;  // measured, in completion order
    std::uint64_t issued = 0;
    std::uint64_t errors = 0;
    std::uint64_t timeouts = 0;
    std::uint64_t discarded_warmup = 0;
    std::vector<std::string> error_samples;  // first few messages
    Nanos elapsed{};
};

/// Sends a health frame to `entry`, which in turn checks every downstream.
/// Throws ConnectFailed, DownstreamUnreachable or Timeout.
void check_health(const Address& entry, Nanos timeout);

/// Issues the workload against a running entry service. Arrival times are
/// the intended send times, so queuing inside the driver is charged to the
/// request. All times in the result are relative to the start of the run.
DriveResult drive_load(const Address& entry, const Pipeline& pipeline, const WorkloadSpec& workload,
                       const DriveOptions& options = {});

/// Rebuilds a span tree from the timestamp section of a response by walking
/// the plan; `origin` is subtracted from every timestamp.
/// Throws MalformedSpanTree when the records do not fit the plan.
Span reconstruct_spans(const Pipeline& pipeline, RequestClass cls, std::span<const TimestampRecord> records, Nanos origin);

}  // namespace ebf::net
