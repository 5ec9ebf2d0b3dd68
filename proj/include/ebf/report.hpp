// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "ebf/analytics.hpp"
#include "ebf/kernels.hpp"
#include "ebf/queuing.hpp"
#include "ebf/sim/engine.hpp"
#include "ebf/trainer.hpp"

namespace ebf {

std::string_view tool_version() noexcept;

// Every key that holds a quantity carries its unit as a suffix
// (_ms, _ns, _s, _per_s); bare numbers are counts or ratios.

nlohmann::json to_json(const LatencySummary& s);
nlohmann::json to_json(const BreakdownRow& row);
nlohmann::json to_json(const LatencyReport& r);
nlohmann::json to_json(const RunStats& s);
nlohmann::json to_json(const QueuePrediction& p);
nlohmann::json to_json(const GapReport& g);
nlohmann::json to_json(const TradeoffRecord& r);
nlohmann::json to_json(const QualityOutcome& q);
/// Deterministic part of a kernel result; timings go to timing_json.
nlohmann::json to_json(const kernels::KernelResult& k);
nlohmann::json timing_json(const kernels::KernelResult& k);
nlohmann::json to_json(const Span& s);
nlohmann::json to_json(const RequestTrace& t);

/// Writes to a sibling temporary file and renames it over `path`, so an
/// interrupted run never leaves a truncated report. Throws Io.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// One JSON object per line, each tagged with `run`.
void write_traces_ndjson(std::ostream& out, std::string_view run, std::span<const RequestTrace> traces);

/// Plot-ready breakdown: run,level,node,count,mean_ms,p90_ms,p99_ms,service_mean_ms,service_p99_ms,share
void write_breakdown_csv_header(std::ostream& out);
void write_breakdown_csv(std::ostream& out, std::string_view run, const LatencyReport& r);

/// Human-readable rendering of a report produced by this tool.
std::string render_report(const nlohmann::json& report);

}  // namespace ebf
