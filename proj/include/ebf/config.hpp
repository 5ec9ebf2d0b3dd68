// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ebf/core/types.hpp"
#include "ebf/kernels.hpp"
#include "ebf/net/socket.hpp"
#include "ebf/trainer.hpp"
#include "ebf/workload.hpp"

namespace ebf {

enum class RunMode : std::uint8_t { simulate, network };

struct AnalyticsConfig {
    std::vector<double> percentiles{50.0, 90.0, 99.0, 99.9};
    std::size_t histogram_cap = 4'000'000;
    std::optional<Nanos> latency_bound;  // for latency-bounded throughput over a sweep
    std::optional<Nanos> slo_p99;        // exceeded -> threshold violation
    std::vector<std::string> amplification;  // node ids; empty means every component
    bool operator==(const AnalyticsConfig&) const = default;
};

struct QueuingConfig {
    /// Configured service rate; absent with `saturation` set means measure it.
    std::optional<double> mu;
    bool saturation = false;
    double percentile = 99.0;
    bool operator==(const QueuingConfig&) const = default;

    bool enabled() const noexcept { return mu.has_value() || saturation; }
};

struct TrainerConfig {
    UpdatePolicy policy;
    std::vector<Nanos> candidates;
    Nanos per_update_cost{};
    Nanos horizon{};
    double weight = kDefaultTradeoffWeight;
    std::optional<Nanos> max_interval;
    /// When set, simulate runs also occupy this station with the updates.
    std::optional<std::string> station;
    bool operator==(const TrainerConfig&) const = default;
};

struct SweepConfig {
    std::vector<double> rates;  // positive, strictly increasing
    bool parallel = false;
    bool operator==(const SweepConfig&) const = default;
};

struct NetworkConfig {
    std::map<std::string, net::Address> addresses;  // absent components get ephemeral loopback ports
    Nanos timeout = std::chrono::seconds(10);
    bool operator==(const NetworkConfig&) const = default;
};

struct OutputConfig {
    std::string report;
    std::string traces;        // NDJSON, optional
    std::string breakdown_csv; // optional
    bool operator==(const OutputConfig&) const = default;
};

struct KernelRun {
    std::string name;
    std::vector<std::size_t> shape;  // empty: default shape
    std::size_t reps = 10;
    bool f64 = false;
    bool operator==(const KernelRun&) const = default;
};

struct RunConfig {
    std::uint64_t seed = 1;
    RunMode mode = RunMode::simulate;
    Topology topology;
    WorkloadSpec workload;
    AnalyticsConfig analytics;
    QueuingConfig queuing;
    std::optional<TrainerConfig> trainer;
    std::optional<SweepConfig> sweep;
    NetworkConfig network;
    OutputConfig output;
    std::vector<KernelRun> kernels;
    bool operator==(const RunConfig&) const = default;
};

/// Parses and validates a YAML configuration. Relative file references
/// (empirical samples) resolve against `base_dir`.
/// Throws SyntaxError (with line), UnknownKey (with path), ConstraintViolation
/// (path and reason), or a topology error from validate_topology.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});

/// A trainer policy on its own: either a bare trainer mapping, a document
/// with a `trainer` key, or a full run config.
TrainerConfig parse_policy(std::string_view text);

/// Reads and parses a file. Throws Io as well.
RunConfig load_config(const std::filesystem::path& file);

/// Canonical YAML with a fixed key order; parse_config(serialize_config(c))
/// == c.
std::string serialize_config(const RunConfig& config);

/// SHA-256 hex digest of the canonical serialization.
std::string config_hash(const RunConfig& config);

std::string_view to_string(RunMode m) noexcept;

}  // namespace ebf
