// SPDX-License-Identifier: Apache-2.0
#include "ebf/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "ebf/core/trace.hpp"
#include "ebf/error.hpp"

namespace ebf {

namespace {

const double kLogBase = std::log(1.01);

void check_p(double p) {
    if (!(p > 0.0 && p <= 100.0)) throw Error(ErrorCode::InvalidPercentile, "percentile must lie in (0, 100], got " + std::to_string(p));
}

}  // namespace

std::size_t nearest_rank(std::size_t n, double p) {
    check_p(p);
    // The epsilon absorbs representation error in p (99.9 is not exact).
    const double x = p / 100.0 * static_cast<double>(n);
    const auto rank = static_cast<std::size_t>(std::ceil(x - 1e-7));
    return std::clamp<std::size_t>(rank, 1, n);
}

Nanos percentile_sorted(std::span<const Nanos> sorted, double p) {
    if (sorted.empty()) throw Error(ErrorCode::EmptySamples, "percentile of an empty sample set");
    return sorted[nearest_rank(sorted.size(), p) - 1];
}

Nanos percentile(std::span<const Nanos> samples, double p) {
    if (samples.empty()) throw Error(ErrorCode::EmptySamples, "percentile of an empty sample set");
    std::vector<Nanos> copy(samples.begin(), samples.end());
    const std::size_t k = nearest_rank(copy.size(), p) - 1;
    std::nth_element(copy.begin(), copy.begin() + static_cast<std::ptrdiff_t>(k), copy.end());
    return copy[k];
}

// --- LogHistogram ----------------------------------------------------------

std::size_t LogHistogram::bucket(std::int64_t v) {
    if (v <= 1) return 0;
    return 1 + static_cast<std::size_t>(std::floor(std::log(static_cast<double>(v)) / kLogBase));
}

Nanos LogHistogram::representative(std::size_t b) {
    if (b == 0) return Nanos{1};
    const double lo = std::exp(static_cast<double>(b - 1) * kLogBase);
    return Nanos{static_cast<std::int64_t>(std::llround(lo * std::sqrt(1.01)))};
}

void LogHistogram::record(Nanos v) {
    const std::size_t b = bucket(v.count());
    if (b >= buckets_.size()) buckets_.resize(b + 1, 0);
    ++buckets_[b];
    ++count_;
}

void LogHistogram::merge(const LogHistogram& other) {
    if (other.buckets_.size() > buckets_.size()) buckets_.resize(other.buckets_.size(), 0);
    for (std::size_t i = 0; i < other.buckets_.size(); ++i) buckets_[i] += other.buckets_[i];
    count_ += other.count_;
}

Nanos LogHistogram::percentile(double p) const {
    if (count_ == 0) throw Error(ErrorCode::EmptySamples, "percentile of an empty histogram");
    const std::uint64_t rank = nearest_rank(count_, p);
    std::uint64_t seen = 0;
    for (std::size_t b = 0; b < buckets_.size(); ++b) {
        seen += buckets_[b];
        if (seen >= rank) return representative(b);
    }
    return representative(buckets_.size() - 1);
}

// --- LatencyRecorder -------------------------------------------------------

void LatencyRecorder::add(Nanos v) {
    ++count_;
    sum_ += static_cast<double>(v.count());
    if (histogram_) {
        histogram_->record(v);
        return;
    }
    if (!samples_.empty() && v < samples_.back()) sorted_ = false;
    samples_.push_back(v);
    if (samples_.size() > cap_) {
        histogram_.emplace();
        for (Nanos s : samples_) histogram_->record(s);
        samples_.clear();
        samples_.shrink_to_fit();
    }
}

double LatencyRecorder::mean_ns() const {
    if (count_ == 0) throw Error(ErrorCode::EmptySamples, "mean of an empty sample set");
    return sum_ / static_cast<double>(count_);
}

Nanos LatencyRecorder::percentile(double p) const {
    if (histogram_) return histogram_->percentile(p);
    if (!sorted_) {
        std::sort(samples_.begin(), samples_.end());
        sorted_ = true;
    }
    return percentile_sorted(samples_, p);
}

LatencySummary summarize(const LatencyRecorder& rec, std::span<const double> extra_percentiles) {
    LatencySummary s;
    s.count = rec.count();
    s.exact = rec.exact();
    if (s.count == 0) return s;
    s.mean_ns = rec.mean_ns();
    s.p50 = rec.percentile(50);
    s.p90 = rec.percentile(90);
    s.p99 = rec.percentile(99);
    s.p999 = rec.percentile(99.9);
    s.max = rec.percentile(100);
    for (double p : extra_percentiles) s.extra[p] = rec.percentile(p);
    return s;
}

// --- breakdown -------------------------------------------------------------

namespace {

struct NodeAccumulator {
    LatencyRecorder latency;
    LatencyRecorder service;
    double total_ns = 0.0;
};

struct PerTrace {
    Nanos latency{};
    Nanos service{};
};

void collect_leaves(const Span& s, std::unordered_map<std::string, PerTrace>& out) {
    if (s.kind == SpanKind::leaf) {
        auto& acc = out[s.id];
        acc.latency += s.latency();
        acc.service += s.service();
    }
    for (const Span& c : s.children) collect_leaves(c, out);
}

void collect_modules(const Span& root, std::unordered_map<std::string, PerTrace>& out) {
    auto add = [&](const Span& s) {
        const std::string key = s.id.empty() ? std::string(to_string(s.kind)) : s.id;
        auto& acc = out[key];
        acc.latency += s.latency();
        acc.service += s.service();
    };
    if (root.kind == SpanKind::leaf) return add(root);
    for (const Span& c : root.children) add(c);
}

/// Every span carrying `id`, at any depth, summed per trace.
bool collect_node(const Span& s, const std::string& id, Nanos& acc) {
    bool found = false;
    if (s.id == id) {
        acc += s.latency();
        found = true;
    }
    for (const Span& c : s.children) found = collect_node(c, id, acc) || found;
    return found;
}

}  // namespace

std::vector<BreakdownRow> breakdown(std::span<const RequestTrace> traces, BreakdownLevel level, std::size_t cap) {
    std::map<std::string, NodeAccumulator> nodes;
    double e2e_total = 0.0;
    std::unordered_map<std::string, PerTrace> per;
    for (const auto& t : traces) {
        e2e_total += static_cast<double>(end_to_end_latency(t).count());
        per.clear();
        if (level == BreakdownLevel::component) {
            collect_leaves(t.root, per);
        } else {
            collect_modules(t.root, per);
        }
        for (const auto& [id, v] : per) {
            auto [it, inserted] = nodes.try_emplace(id, NodeAccumulator{LatencyRecorder(cap), LatencyRecorder(cap), 0.0});
            it->second.latency.add(v.latency);
            it->second.service.add(v.service);
            it->second.total_ns += static_cast<double>(v.latency.count());
        }
    }
    std::vector<BreakdownRow> rows;
    for (const auto& [id, acc] : nodes) {
        BreakdownRow r;
        r.node = id;
        r.count = acc.latency.count();
        r.mean_ns = acc.latency.mean_ns();
        r.p90 = acc.latency.percentile(90);
        r.p99 = acc.latency.percentile(99);
        r.service_mean_ns = acc.service.mean_ns();
        r.service_p90 = acc.service.percentile(90);
        r.service_p99 = acc.service.percentile(99);
        r.share = e2e_total > 0.0 ? acc.total_ns / e2e_total : 0.0;
        rows.push_back(std::move(r));
    }
    return rows;
}

double amplification(std::span<const RequestTrace> traces, const std::string& node_id) {
    std::vector<Nanos> e2e;
    std::vector<Nanos> node;
    e2e.reserve(traces.size());
    for (const auto& t : traces) {
        e2e.push_back(end_to_end_latency(t));
        Nanos acc{};
        if (collect_node(t.root, node_id, acc)) node.push_back(acc);
    }
    if (node.empty()) throw Error(ErrorCode::NodeNotFound, "no span named '" + node_id + "'");
    const Nanos node_p99 = percentile(node, 99);
    if (node_p99 <= Nanos::zero()) throw Error(ErrorCode::ZeroComponentTail, "node '" + node_id + "' has p99 of zero");
    return static_cast<double>(percentile(e2e, 99).count()) / static_cast<double>(node_p99.count());
}

QualityOutcome quality_ensured(std::span<const RequestTrace> traces, const QualityAttr& attr, double tolerance) {
    if (traces.empty()) throw Error(ErrorCode::MissingQualityData, "no traces");
    double sum = 0.0;
    LatencyRecorder rec;
    for (const auto& t : traces) {
        if (!t.quality_achieved)
            throw Error(ErrorCode::MissingQualityData, "request " + std::to_string(t.request_id) + " has no quality value");
        sum += *t.quality_achieved;
        rec.add(end_to_end_latency(t));
    }
    QualityOutcome out;
    out.achieved = sum / static_cast<double>(traces.size());
    out.threshold = attr.target * (1.0 - tolerance);
    // Relative slack so a value printed at the boundary (0.93 * 0.98) passes.
    out.pass = out.achieved >= out.threshold * (1.0 - 1e-12);
    if (out.pass) out.stats = summarize(rec);
    return out;
}

double latency_bounded_throughput(std::span<const SweepPoint> sweep, Nanos bound) {
    if (sweep.empty()) throw Error(ErrorCode::EmptySweep, "latency-bounded throughput needs at least one sweep point");
    std::optional<double> best;
    for (const auto& pt : sweep)
        if (pt.p99 <= bound && (!best || pt.rate > *best)) best = pt.rate;
    if (!best)
        throw Error(ErrorCode::NoneSustains,
                    "no offered rate keeps p99 within " + std::to_string(to_ms(bound)) + " ms");
    return *best;
}

LatencyReport make_latency_report(std::span<const RequestTrace> traces, const AnalyticsOptions& options) {
    LatencyReport r;
    r.measured_empty = traces.empty();
    LatencyRecorder e2e(options.histogram_cap);
    LatencyRecorder send(options.histogram_cap);
    for (const auto& t : traces) {
        e2e.add(end_to_end_latency(t));
        send.add(send_to_completion(t));
        if (t.quota_unreachable) ++r.quota_unreachable;
    }
    r.end_to_end = summarize(e2e, options.percentiles);
    r.send_to_done = summarize(send, options.percentiles);
    if (traces.empty()) return r;
    r.modules = breakdown(traces, BreakdownLevel::module, options.histogram_cap);
    r.components = breakdown(traces, BreakdownLevel::component, options.histogram_cap);
    const double e2e_p99 = static_cast<double>(r.end_to_end.p99.count());
    auto amp = [&](const BreakdownRow& row) {
        if (row.p99 > Nanos::zero()) r.amplification[row.node] = e2e_p99 / static_cast<double>(row.p99.count());
    };
    for (const auto& row : r.modules) amp(row);
    for (const auto& row : r.components) amp(row);
    return r;
}

}  // namespace ebf
