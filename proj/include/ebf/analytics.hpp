// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ebf/core/types.hpp"

namespace ebf {

/// Nearest-rank percentile: the ceil(p/100 * n)-th smallest sample.
/// p must lie in (0, 100]. Throws EmptySamples / InvalidPercentile.
Nanos percentile(std::span<const Nanos> samples, double p);

/// Same rule on an already sorted range; no copy.
Nanos percentile_sorted(std::span<const Nanos> sorted, double p);

/// 1-based nearest rank for n samples.
std::size_t nearest_rank(std::size_t n, double p);

/// Log-bucketed histogram with a bucket ratio of 1.01, so any reported
/// percentile is within 1% of a sample in the same bucket.
class LogHistogram {
  public:
    void record(Nanos v);
    void merge(const LogHistogram& other);
    std::uint64_t count() const noexcept { return count_; }
    Nanos percentile(double p) const;

  private:
    static std::size_t bucket(std::int64_t v);
    static Nanos representative(std::size_t bucket);

    std::vector<std::uint64_t> buckets_;
    std::uint64_t count_ = 0;
};

/// Exact samples up to `cap`; beyond that everything moves into a
/// LogHistogram and percentiles become approximate.
class LatencyRecorder {
  public:
    explicit LatencyRecorder(std::size_t cap = kDefaultCap) : cap_(cap) {}

    static constexpr std::size_t kDefaultCap = 4'000'000;

    void add(Nanos v);
    std::uint64_t count() const noexcept { return count_; }
    bool exact() const noexcept { return !histogram_; }
    double mean_ns() const;
    double sum_ns() const noexcept { return sum_; }
    Nanos percentile(double p) const;

  private:
    std::size_t cap_;
    std::uint64_t count_ = 0;
    double sum_ = 0.0;
    mutable std::vector<Nanos> samples_;
    mutable bool sorted_ = true;
    std::optional<LogHistogram> histogram_;
};

struct LatencySummary {
    std::uint64_t count = 0;
    double mean_ns = 0.0;
    Nanos p50{}, p90{}, p99{}, p999{};
    Nanos max{};
    std::map<double, Nanos> extra;  // caller-requested percentiles
    bool exact = true;
};

LatencySummary summarize(const LatencyRecorder& rec, std::span<const double> extra_percentiles = {});

enum class BreakdownLevel : std::uint8_t { module, component };

struct BreakdownRow {
    std::string node;
    std::uint64_t count = 0;  // requests in which the node appeared
    double mean_ns = 0.0;     // end - enqueue, summed per request
    Nanos p90{}, p99{};
    double service_mean_ns = 0.0;  // end - start
    Nanos service_p90{}, service_p99{};
    /// Node time over end-to-end time, both summed across all requests.
    double share = 0.0;
};

/// Module level: the children of each trace's root span (the root itself
/// for a single-leaf pipeline). Component level: every leaf span.
std::vector<BreakdownRow> breakdown(std::span<const RequestTrace> traces, BreakdownLevel level,
                                    std::size_t histogram_cap = LatencyRecorder::kDefaultCap);

/// e2e p99 / p99 of the node's per-request latency. The node may be a
/// component or a named module. Throws NodeNotFound / ZeroComponentTail.
double amplification(std::span<const RequestTrace> traces, const std::string& node_id);

struct QualityOutcome {
    bool pass = false;
    double achieved = 0.0;   // mean over traces
    double threshold = 0.0;  // target * (1 - tolerance)
    std::optional<LatencySummary> stats;
};

inline constexpr double kQualityTolerance = 0.02;

/// Throws MissingQualityData if any trace lacks quality_achieved.
QualityOutcome quality_ensured(std::span<const RequestTrace> traces, const QualityAttr& attr,
                               double tolerance = kQualityTolerance);

struct SweepPoint {
    double rate = 0.0;
    Nanos p99{};
};

/// Largest offered rate whose p99 is within `bound`. Throws EmptySweep, or
/// NoneSustains when even the smallest rate violates it.
double latency_bounded_throughput(std::span<const SweepPoint> sweep, Nanos bound);

struct AnalyticsOptions {
    std::vector<double> percentiles{50.0, 90.0, 99.0, 99.9};
    std::size_t histogram_cap = LatencyRecorder::kDefaultCap;
    bool operator==(const AnalyticsOptions&) const = default;
};

struct LatencyReport {
    LatencySummary end_to_end;    // from scheduled arrival
    LatencySummary send_to_done;  // from actual send
    std::vector<BreakdownRow> modules;
    std::vector<BreakdownRow> components;
    std::map<std::string, double> amplification;
    std::uint64_t error_count = 0;
    std::uint64_t timeout_count = 0;
    std::uint64_t warmup_discarded = 0;
    std::uint64_t quota_unreachable = 0;
    bool measured_empty = false;
    double throughput = 0.0;  // completions per second over the measured window
};

LatencyReport make_latency_report(std::span<const RequestTrace> traces, const AnalyticsOptions& options = {});

}  // namespace ebf
