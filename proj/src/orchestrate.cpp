// SPDX-License-Identifier: Apache-2.0
#include "ebf/orchestrate.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <future>
#include <memory>
#include <sstream>

#include <spdlog/spdlog.h>

#include "ebf/core/topology.hpp"
#include "ebf/core/trace.hpp"
#include "ebf/error.hpp"
#include "ebf/net/driver.hpp"
#include "ebf/net/service.hpp"
#include "ebf/queuing.hpp"
#include "ebf/report.hpp"
#include "ebf/trainer.hpp"

namespace ebf {

using nlohmann::json;

namespace {

json header(const RunConfig& c) {
    return json{{"tool", {{"name", "ebf"}, {"version", std::string(tool_version())}}},
                {"config_hash", config_hash(c)},
                {"seed", c.seed},
                {"mode", std::string(to_string(c.mode))}};
}

std::string rate_label(double rate) {
    std::ostringstream ss;
    ss << "lambda=" << rate;
    return ss.str();
}

AnalyticsOptions analytics_options(const RunConfig& c) {
    return AnalyticsOptions{c.analytics.percentiles, c.analytics.histogram_cap};
}

/// Weakest quality target over the components that declare one.
std::optional<QualityAttr> pipeline_quality(const Topology& t) {
    std::optional<QualityAttr> q;
    for (const auto& comp : t.components)
        if (comp.quality && (!q || comp.quality->target < q->target)) q = comp.quality;
    return q;
}

void finish_analytics(RunRecord& r, const RunConfig& c) {
    r.latency = make_latency_report(r.traces, analytics_options(c));
    if (!c.analytics.amplification.empty() && !r.traces.empty()) {
        std::map<std::string, double> chosen;
        for (const auto& id : c.analytics.amplification) {
            try {
                chosen[id] = amplification(r.traces, id);
            } catch (const Error& e) {
                spdlog::warn("amplification for '{}' unavailable: {}", id, e.what());
            }
        }
        r.latency.amplification = std::move(chosen);
    }
}

RunRecord simulate_one(const Pipeline& pipeline, const RunConfig& c, std::optional<double> rate) {
    WorkloadSpec w = c.workload;
    if (rate) w.rate = *rate;
    SimOptions opts;
    if (c.trainer && c.trainer->station)
        opts.trainer = TrainerLoad{*c.trainer->station, c.trainer->policy.interval, c.trainer->per_update_cost};
    SimResult res = simulate(pipeline, w, opts);
    RunRecord r;
    r.label = rate ? rate_label(*rate) : "run";
    r.offered_rate = rate;
    r.traces = std::move(res.traces);
    r.arrival_rate = res.stats.arrival_rate;
    for (const auto& warn : res.stats.warnings) spdlog::warn("{}: {}", r.label, warn);
    finish_analytics(r, c);
    r.latency.throughput = res.stats.throughput;
    r.latency.warmup_discarded = res.stats.discarded_warmup;
    r.sim_stats = std::move(res.stats);
    return r;
}

std::vector<RunRecord> simulate_runs(const Pipeline& pipeline, const RunConfig& c) {
    std::vector<std::optional<double>> points;
    if (c.sweep) {
        for (double r : c.sweep->rates) points.emplace_back(r);
    } else {
        points.emplace_back(c.workload.mode == LoopMode::open_loop ? std::optional<double>(c.workload.rate) : std::nullopt);
    }
    std::vector<RunRecord> out;
    if (c.sweep && c.sweep->parallel && points.size() > 1) {
        std::vector<std::future<RunRecord>> futs;
        for (const auto& p : points)
            futs.push_back(std::async(std::launch::async, [&pipeline, &c, p] { return simulate_one(pipeline, c, p); }));
        for (auto& f : futs) out.push_back(f.get());
    } else {
        for (const auto& p : points) {
            spdlog::info("simulating {}", p ? rate_label(*p) : std::string("run"));
            out.push_back(simulate_one(pipeline, c, p));
        }
    }
    return out;
}

std::vector<RunRecord> network_runs(const std::shared_ptr<const Pipeline>& pipeline, const RunConfig& c) {
    net::LocalCluster cluster(pipeline, c.network.addresses, c.network.timeout, c.seed);
    const auto& entry = cluster.entry();
    std::vector<std::optional<double>> points;
    if (c.sweep) {
        for (double r : c.sweep->rates) points.emplace_back(r);
    } else {
        points.emplace_back(c.workload.mode == LoopMode::open_loop ? std::optional<double>(c.workload.rate) : std::nullopt);
    }
    std::vector<RunRecord> out;
    for (const auto& p : points) {
        WorkloadSpec w = c.workload;
        if (p) w.rate = *p;
        net::DriveOptions opts;
        opts.timeout = c.network.timeout;
        spdlog::info("driving {} against {}", p ? rate_label(*p) : std::string("run"), net::to_string(entry));
        net::DriveResult d = net::drive_load(entry, *pipeline, w, opts);
        RunRecord r;
        r.label = p ? rate_label(*p) : "run";
        r.offered_rate = p;
        r.traces = std::move(d.traces);
        finish_analytics(r, c);
        r.latency.error_count = d.errors;
        r.latency.timeout_count = d.timeouts;
        r.latency.warmup_discarded = d.discarded_warmup;
        const double window = to_seconds(d.elapsed - w.warmup);
        if (window > 0) {
            r.latency.throughput = static_cast<double>(r.traces.size()) / window;
            r.arrival_rate = static_cast<double>(d.issued - d.discarded_warmup) / window;
        }
        for (const auto& e : d.error_samples) spdlog::warn("{}: {}", r.label, e);
        out.push_back(std::move(r));
    }
    return out;
}

json run_json(const RunRecord& r, const RunConfig& c) {
    json j{{"label", r.label}, {"latency", to_json(r.latency)}, {"arrival_rate_per_s", r.arrival_rate}};
    j["offered_rate_per_s"] = r.offered_rate ? json(*r.offered_rate) : json(nullptr);
    if (r.sim_stats) {
        j["stats"] = to_json(*r.sim_stats);
        const double mean_s = r.latency.end_to_end.mean_ns / 1e9;
        j["littles_law"] = {{"mean_in_system", r.sim_stats->mean_in_system},
                            {"arrival_rate_x_mean_latency", r.sim_stats->arrival_rate * mean_s}};
        j["warnings"] = r.sim_stats->warnings;
    }
    if (const auto q = pipeline_quality(c.topology); q && !r.traces.empty()) {
        try {
            j["quality"] = to_json(quality_ensured(r.traces, *q));
        } catch (const Error& e) {
            j["quality"] = {{"unavailable", e.what()}};
        }
    }
    return j;
}

double service_rate(const Pipeline& pipeline, const RunConfig& c, std::string& source) {
    if (c.queuing.mu) {
        source = "configured";
        return *c.queuing.mu;
    }
    source = "saturation";
    WorkloadSpec like = c.workload;
    like.seed = c.seed;
    return estimate_service_rate(pipeline, like);
}

json queuing_json(const Pipeline& pipeline, const RunConfig& c, const std::vector<RunRecord>& runs) {
    std::string source;
    const double mu = service_rate(pipeline, c, source);
    json q{{"model", "M/M/1"}, {"mu_per_s", mu}, {"mu_source", source}, {"percentile", c.queuing.percentile}};
    json preds = json::array(), unstable = json::array();
    std::vector<MeasuredPoint> measured;
    std::vector<QueuePrediction> predicted;
    for (const auto& r : runs) {
        const double lambda = r.offered_rate.value_or(r.arrival_rate);
        if (!(lambda >= 0.0 && lambda < mu)) {
            unstable.push_back({{"label", r.label}, {"lambda_per_s", lambda}});
            continue;
        }
        const QueuePrediction p = predict_mm1(lambda, mu, c.queuing.percentile);
        preds.push_back(to_json(p));
        if (r.traces.empty()) continue;
        LatencyRecorder rec(c.analytics.histogram_cap);
        for (const auto& t : r.traces) rec.add(end_to_end_latency(t));
        measured.push_back({lambda, Seconds(rec.mean_ns() / 1e9), Seconds(to_seconds(rec.percentile(c.queuing.percentile)))});
        predicted.push_back(p);
    }
    q["predictions"] = preds;
    if (!unstable.empty()) q["unstable"] = unstable;
    if (!measured.empty()) q["gaps"] = to_json(gap_report(measured, predicted));
    return q;
}

json trainer_json(const TrainerConfig& t) {
    const auto records = evaluate_policy(t.policy, t.horizon, t.per_update_cost, t.candidates, t.weight);
    json recs = json::array();
    for (const auto& r : records) recs.push_back(to_json(r));
    json j{{"mode", t.policy.mode == UpdateMode::batch ? "batch" : "streaming"},
           {"base_accuracy", t.policy.base_accuracy},
           {"horizon_s", to_seconds(t.horizon)},
           {"per_update_cost_s", to_seconds(t.per_update_cost)},
           {"weight", t.weight},
           {"records", recs}};
    try {
        j["chosen_interval_s"] = to_seconds(choose_interval(records, t.max_interval));
    } catch (const Error& e) {
        j["chosen_interval_s"] = nullptr;
        j["note"] = e.what();
    }
    return j;
}

void attach_kernels(json& j, json& timing, const RunConfig& c) {
    json ks = json::array(), ts = json::array();
    for (const auto& k : c.kernels) {
        kernels::KernelSpec spec;
        spec.kernel = kernels::parse_kernel(k.name);
        spec.shape = k.shape.empty() ? kernels::default_shape(spec.kernel) : k.shape;
        spec.reps = k.reps;
        spec.seed = c.seed;
        spec.precision = k.f64 ? kernels::Precision::f64 : kernels::Precision::f32;
        const auto res = kernels::run_kernel(spec);
        ks.push_back(to_json(res));
        ts.push_back(timing_json(res));
    }
    j["kernels"] = ks;
    timing["kernels"] = ts;
}

void attach_slo(Report& rep, const RunConfig& c) {
    if (!c.analytics.slo_p99) return;
    const double bound = to_ms(*c.analytics.slo_p99);
    double worst = 0.0;
    for (const auto& r : rep.runs) worst = std::max(worst, to_ms(r.latency.end_to_end.p99));
    rep.threshold_violated = worst > bound;
    rep.json["slo"] = {{"p99_bound_ms", bound}, {"worst_p99_ms", worst}, {"violated", rep.threshold_violated}};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::vector<double> offered_rates(const RunConfig& c) {
    if (c.sweep) return c.sweep->rates;
    if (c.workload.mode == LoopMode::open_loop && c.workload.rate > 0.0) return {c.workload.rate};
    return {};
}

Report orchestrate(const RunConfig& c) {
    const auto t0 = std::chrono::steady_clock::now();
    auto pipeline = std::make_shared<const Pipeline>(c.topology);
    Report rep;
    rep.json = header(c);
    json timing = json::object();

    rep.runs = c.mode == RunMode::simulate ? simulate_runs(*pipeline, c) : network_runs(pipeline, c);
    json runs = json::array();
    for (const auto& r : rep.runs) runs.push_back(run_json(r, c));
    rep.json["runs"] = runs;

    if (c.queuing.enabled()) rep.json["queuing"] = queuing_json(*pipeline, c, rep.runs);
    if (c.sweep && c.analytics.latency_bound) {
        std::vector<SweepPoint> pts;
        for (const auto& r : rep.runs)
            if (r.offered_rate && !r.traces.empty()) pts.push_back({*r.offered_rate, r.latency.end_to_end.p99});
        try {
            rep.json["latency_bounded_throughput_per_s"] = latency_bounded_throughput(pts, *c.analytics.latency_bound);
        } catch (const Error& e) {
            rep.json["latency_bounded_throughput_per_s"] = nullptr;
            rep.json["latency_bounded_throughput_note"] = e.what();
        }
    }
    if (c.trainer) rep.json["trainer"] = trainer_json(*c.trainer);
    if (!c.kernels.empty()) attach_kernels(rep.json, timing, c);
    attach_slo(rep, c);
    timing["wall_s"] = seconds_since(t0);
    rep.json["timing"] = timing;
    return rep;
}

Report predict_only(const RunConfig& c) {
    const auto t0 = std::chrono::steady_clock::now();
    Report rep;
    rep.json = header(c);
    const auto rates = offered_rates(c);
    if (rates.empty()) throw Error(ErrorCode::ConstraintViolation, "workload: predictions need open-loop rates");
    if (!c.queuing.enabled()) throw Error(ErrorCode::ConstraintViolation, "queuing: predictions need 'mu'");
    const Pipeline pipeline(c.topology);
    std::string source;
    const double mu = service_rate(pipeline, c, source);
    json preds = json::array();
    for (double lambda : rates) {
        try {
            preds.push_back(to_json(predict_mm1(lambda, mu, c.queuing.percentile)));
        } catch (const Error& e) {
            preds.push_back({{"lambda_per_s", lambda}, {"mu_per_s", mu}, {"error", e.what()}});
        }
    }
    rep.json["queuing"] = {{"model", "M/M/1"}, {"mu_per_s", mu}, {"mu_source", source},
                           {"percentile", c.queuing.percentile}, {"predictions", preds}};
    rep.json["timing"] = {{"wall_s", seconds_since(t0)}};
    return rep;
}

Report tradeoff_only(const RunConfig& c) {
    if (!c.trainer) throw Error(ErrorCode::ConstraintViolation, "trainer: section required");
    Report rep;
    rep.json = header(c);
    rep.json["trainer"] = trainer_json(*c.trainer);
    rep.json["timing"] = json::object();
    return rep;
}

Report kernels_only(const RunConfig& c) {
    const auto t0 = std::chrono::steady_clock::now();
    Report rep;
    rep.json = header(c);
    json timing = json::object();
    attach_kernels(rep.json, timing, c);
    timing["wall_s"] = seconds_since(t0);
    rep.json["timing"] = timing;
    return rep;
}

void write_outputs(const Report& rep, const RunConfig& c, const std::string& report_override) {
    const std::string report_path = report_override.empty() ? c.output.report : report_override;
    if (!report_path.empty()) write_file_atomic(report_path, rep.json.dump(2) + "\n");
    if (!c.output.traces.empty()) {
        const std::filesystem::path path(c.output.traces);
        const auto tmp = path.string() + ".partial";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw Error(ErrorCode::Io, "cannot write '" + tmp + "'");
            for (const auto& r : rep.runs) write_traces_ndjson(out, r.label, r.traces);
            if (!out.flush()) throw Error(ErrorCode::Io, "short write to '" + tmp + "'");
        }
        std::filesystem::rename(tmp, path);
    }
    if (!c.output.breakdown_csv.empty()) {
        std::ostringstream csv;
        write_breakdown_csv_header(csv);
        for (const auto& r : rep.runs) write_breakdown_csv(csv, r.label, r.latency);
        write_file_atomic(c.output.breakdown_csv, csv.str());
    }
}

}  // namespace ebf
