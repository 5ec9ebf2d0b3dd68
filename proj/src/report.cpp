// SPDX-License-Identifier: Apache-2.0
#include "ebf/report.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <unistd.h>

#include <fmt/format.h>

#include "ebf/error.hpp"

#ifndef EBF_VERSION
#define EBF_VERSION "0.0.0"
#endif

namespace ebf {

using nlohmann::json;

std::string_view tool_version() noexcept { return EBF_VERSION; }

namespace {

std::string percentile_key(double p) {
    std::ostringstream ss;
    ss << p;
    return ss.str();
}

double ms(Nanos d) { return to_ms(d); }

}  // namespace

json to_json(const LatencySummary& s) {
    json j{{"count", s.count},          {"mean_ms", s.mean_ns / 1e6}, {"p50_ms", ms(s.p50)},
           {"p90_ms", ms(s.p90)},       {"p99_ms", ms(s.p99)},        {"p99_9_ms", ms(s.p999)},
           {"max_ms", ms(s.max)},       {"exact", s.exact}};
    json extra = json::object();
    for (const auto& [p, v] : s.extra) extra[percentile_key(p)] = ms(v);
    j["percentiles_ms"] = extra;
    return j;
}

json to_json(const BreakdownRow& r) {
    return json{{"node", r.node},
                {"count", r.count},
                {"mean_ms", r.mean_ns / 1e6},
                {"p90_ms", ms(r.p90)},
                {"p99_ms", ms(r.p99)},
                {"service_mean_ms", r.service_mean_ns / 1e6},
                {"service_p90_ms", ms(r.service_p90)},
                {"service_p99_ms", ms(r.service_p99)},
                {"share_of_e2e", r.share}};
}

json to_json(const LatencyReport& r) {
    json mods = json::array(), comps = json::array();
    for (const auto& row : r.modules) mods.push_back(to_json(row));
    for (const auto& row : r.components) comps.push_back(to_json(row));
    return json{{"end_to_end", to_json(r.end_to_end)},
                {"send_to_done", to_json(r.send_to_done)},
                {"breakdown", {{"module", mods}, {"component", comps}}},
                {"amplification", r.amplification},
                {"error_count", r.error_count},
                {"timeout_count", r.timeout_count},
                {"warmup_discarded", r.warmup_discarded},
                {"quota_unreachable", r.quota_unreachable},
                {"measured_empty", r.measured_empty},
                {"throughput_per_s", r.throughput}};
}

json to_json(const RunStats& s) {
    json stations = json::array();
    for (const auto& st : s.stations)
        stations.push_back({{"id", st.id}, {"utilization", st.utilization}, {"served", st.served}});
    const double window_s = to_seconds(s.end_time - s.measure_start);
    return json{{"injected", s.injected},
                {"completed", s.completed},
                {"in_flight", s.in_flight},
                {"discarded_warmup", s.discarded_warmup},
                {"quota_unreachable", s.quota_unreachable},
                {"trainer_updates", s.trainer_updates},
                {"measure_start_s", to_seconds(s.measure_start)},
                {"measured_window_s", window_s},
                {"mean_in_system", s.mean_in_system},
                {"arrival_rate_per_s", s.arrival_rate},
                {"throughput_per_s", s.throughput},
                {"stations", stations},
                {"warnings", s.warnings}};
}

json to_json(const QueuePrediction& p) {
    return json{{"lambda_per_s", p.lambda},
                {"mu_per_s", p.mu},
                {"percentile", p.p},
                {"mean_ms", p.t_mean.count() * 1e3},
                {"tail_ms", p.t_p.count() * 1e3}};
}

json to_json(const GapReport& g) {
    json settings = json::array();
    for (const auto& s : g.settings)
        settings.push_back({{"lambda_per_s", s.lambda},
                            {"measured_mean_ms", s.measured_mean.count() * 1e3},
                            {"predicted_mean_ms", s.predicted_mean.count() * 1e3},
                            {"measured_tail_ms", s.measured_tail.count() * 1e3},
                            {"predicted_tail_ms", s.predicted_tail.count() * 1e3},
                            {"mean_ratio", s.mean_ratio},
                            {"tail_ratio", s.tail_ratio}});
    return json{{"settings", settings},
                {"mean_ratio_arithmetic", g.mean_ratio_arithmetic},
                {"tail_ratio_arithmetic", g.tail_ratio_arithmetic},
                {"mean_ratio_geometric", g.mean_ratio_geometric},
                {"tail_ratio_geometric", g.tail_ratio_geometric}};
}

json to_json(const TradeoffRecord& r) {
    return json{{"interval_s", to_seconds(r.interval)},
                {"updates", r.updates},
                {"total_cost_s", to_seconds(r.total_cost)},
                {"overhead_fraction", r.overhead_fraction},
                {"gain", r.gain},
                {"objective", r.objective},
                {"feasible", r.feasible}};
}

json to_json(const QualityOutcome& q) {
    json j{{"pass", q.pass}, {"achieved", q.achieved}, {"threshold", q.threshold}};
    if (q.stats) j["latency"] = to_json(*q.stats);
    return j;
}

json to_json(const kernels::KernelResult& k) {
    return json{{"name", k.name}, {"shape", k.shape}, {"reps", k.reps},
                {"checksum", fmt::format("{:016x}", k.checksum)}, {"bytes", k.bytes}, {"flops", k.flops}};
}

json timing_json(const kernels::KernelResult& k) {
    return json{{"name", k.name}, {"min_ns", k.min.count()}, {"mean_ns", k.mean.count()}, {"p99_ns", k.p99.count()}};
}

json to_json(const Span& s) {
    json j{{"id", s.id},
           {"kind", std::string(to_string(s.kind))},
           {"enqueue_ns", s.enqueue.count()},
           {"start_ns", s.start.count()},
           {"end_ns", s.end.count()}};
    if (!s.children.empty()) {
        json kids = json::array();
        for (const auto& c : s.children) kids.push_back(to_json(c));
        j["children"] = std::move(kids);
    }
    return j;
}

json to_json(const RequestTrace& t) {
    json j{{"request_id", t.request_id},
           {"class", std::string(to_string(t.cls))},
           {"arrival_ns", t.arrival.count()},
           {"sent_ns", t.sent.count()},
           {"completion_ns", t.completion.count()},
           {"quota_unreachable", t.quota_unreachable},
           {"root", to_json(t.root)}};
    if (t.quality_achieved) j["quality"] = *t.quality_achieved;
    return j;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    const auto tmp = dir / ("." + path.filename().string() + ".tmp." + std::to_string(::getpid()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            std::filesystem::remove(tmp, ec);
            throw Error(ErrorCode::Io, "short write to '" + tmp.string() + "'");
        }
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error(ErrorCode::Io, "cannot rename onto '" + path.string() + "'");
    }
}

void write_traces_ndjson(std::ostream& out, std::string_view run, std::span<const RequestTrace> traces) {
    for (const auto& t : traces) {
        json j = to_json(t);
        j["run"] = run;
        out << j.dump() << '\n';
    }
}

void write_breakdown_csv_header(std::ostream& out) {
    out << "run,level,node,count,mean_ms,p90_ms,p99_ms,service_mean_ms,service_p99_ms,share\n";
}

void write_breakdown_csv(std::ostream& out, std::string_view run, const LatencyReport& r) {
    auto rows = [&](std::string_view level, const std::vector<BreakdownRow>& v) {
        for (const auto& row : v)
            out << fmt::format("{},{},{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", run, level, row.node, row.count,
                               row.mean_ns / 1e6, ms(row.p90), ms(row.p99), row.service_mean_ns / 1e6,
                               ms(row.service_p99), row.share);
    };
    rows("module", r.modules);
    rows("component", r.components);
}

std::string render_report(const json& rep) {
    std::ostringstream o;
    o << "ebf report";
    if (rep.contains("tool")) o << " (tool " << rep["tool"].value("version", "?") << ")";
    o << "\n";
    if (rep.contains("config_hash")) o << "config  " << rep["config_hash"].get<std::string>() << "\n";
    if (rep.contains("mode")) o << "mode    " << rep["mode"].get<std::string>() << "   seed " << rep.value("seed", 0) << "\n";
    for (const auto& run : rep.value("runs", json::array())) {
        o << "\n== run " << run.value("label", "") << "\n";
        if (!run.contains("latency")) continue;
        const auto& lat = run["latency"];
        const auto& e = lat["end_to_end"];
        o << fmt::format("  e2e       n={:<8} mean={:9.2f} ms  p50={:9.2f}  p90={:9.2f}  p99={:9.2f}  p99.9={:9.2f}\n",
                         e.value("count", 0), e.value("mean_ms", 0.0), e.value("p50_ms", 0.0), e.value("p90_ms", 0.0),
                         e.value("p99_ms", 0.0), e.value("p99_9_ms", 0.0));
        for (const char* level : {"module", "component"}) {
            const auto& rows = lat["breakdown"][level];
            if (rows.empty()) continue;
            o << "  " << level << " breakdown\n";
            for (const auto& r : rows)
                o << fmt::format("    {:<22} mean={:9.2f} ms  p99={:9.2f} ms  share={:5.1f}%\n", r.value("node", ""),
                                 r.value("mean_ms", 0.0), r.value("p99_ms", 0.0), 100.0 * r.value("share_of_e2e", 0.0));
        }
        if (lat.value("error_count", 0) || lat.value("timeout_count", 0))
            o << "  errors " << lat.value("error_count", 0) << "  timeouts " << lat.value("timeout_count", 0) << "\n";
        if (run.contains("warnings"))
            for (const auto& w : run["warnings"]) o << "  warning: " << w.get<std::string>() << "\n";
    }
    if (rep.contains("queuing")) {
        const auto& q = rep["queuing"];
        o << "\n== queuing (mu = " << q.value("mu_per_s", 0.0) << "/s, " << q.value("mu_source", "") << ")\n";
        for (const auto& p : q.value("predictions", json::array()))
            o << fmt::format("  lambda={:7.2f}/s  mean={:9.2f} ms  p{}={:9.2f} ms\n", p.value("lambda_per_s", 0.0),
                             p.value("mean_ms", 0.0), p.value("percentile", 0.0), p.value("tail_ms", 0.0));
        if (q.contains("gaps"))
            o << fmt::format("  gap: mean x{:.3f}  tail x{:.3f} (arithmetic means of ratios)\n",
                             q["gaps"].value("mean_ratio_arithmetic", 0.0), q["gaps"].value("tail_ratio_arithmetic", 0.0));
    }
    if (rep.contains("latency_bounded_throughput_per_s"))
        o << "\nlatency-bounded throughput: " << rep["latency_bounded_throughput_per_s"].dump() << " /s\n";
    if (rep.contains("trainer")) {
        o << "\n== trainer\n";
        for (const auto& r : rep["trainer"].value("records", json::array()))
            o << fmt::format("  interval={:10.1f} s  overhead={:.4f}  gain={:.4f}  objective={:+.4f}{}\n",
                             r.value("interval_s", 0.0), r.value("overhead_fraction", 0.0), r.value("gain", 0.0),
                             r.value("objective", 0.0), r.value("feasible", true) ? "" : "  (infeasible)");
        if (rep["trainer"].contains("chosen_interval_s"))
            o << "  chosen interval: " << rep["trainer"]["chosen_interval_s"].dump() << " s\n";
    }
    if (rep.contains("kernels")) {
        o << "\n== kernels\n";
        const json timing = rep.contains("timing") ? rep["timing"].value("kernels", json::array()) : json::array();
        for (std::size_t i = 0; i < rep["kernels"].size(); ++i) {
            const auto& k = rep["kernels"][i];
            o << fmt::format("  {:<22} checksum={}", k.value("name", ""), k.value("checksum", ""));
            if (i < timing.size())
                o << fmt::format("  min={} ns  mean={} ns  p99={} ns", timing[i].value("min_ns", 0), timing[i].value("mean_ns", 0),
                                 timing[i].value("p99_ns", 0));
            o << "\n";
        }
    }
    if (rep.contains("slo"))
        o << "\nslo: p99 bound " << rep["slo"].value("p99_bound_ms", 0.0) << " ms -> "
          << (rep["slo"].value("violated", false) ? "VIOLATED" : "ok") << "\n";
    return o.str();
}

}  // namespace ebf
