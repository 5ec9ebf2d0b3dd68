// SPDX-License-Identifier: Apache-2.0
#include "ebf/sim/execution.hpp"

#include <algorithm>
#include <cmath>

namespace ebf {

namespace {
template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

Nanos positive(double seconds) {
    const Nanos d = from_seconds(seconds);
    return d > Nanos::zero() ? d : Nanos{1};
}
}  // namespace

Nanos sample_service_time(const ServiceTimeModel& model, Rng& rng) {
    return std::visit(
        overloaded{
            [](const Deterministic& d) { return d.value; },
            [&](const Exponential& e) { return positive(rng.exponential(e.rate)); },
            [&](const Lognormal& l) { return positive(std::exp(l.location + l.scale * rng.standard_normal())); },
            [&](const ShiftedPareto& p) {
                const double x = to_seconds(p.scale) * std::pow(rng.uniform_open_low(), -1.0 / p.shape);
                return positive(to_seconds(p.shift) + x);
            },
            [&](const Empirical& e) { return e.samples[rng.below(e.samples.size())]; },
        },
        model);
}

std::uint64_t sample_yield(const YieldModel& model, Rng& rng) {
    switch (model.dist) {
        case YieldModel::Dist::deterministic: return static_cast<std::uint64_t>(std::llround(model.a));
        case YieldModel::Dist::poisson: return rng.poisson(model.a);
        case YieldModel::Dist::uniform: {
            const auto lo = static_cast<std::uint64_t>(std::llround(model.a));
            const auto hi = static_cast<std::uint64_t>(std::llround(model.b));
            return lo + rng.below(hi - lo + 1);
        }
    }
    return 0;
}

std::size_t resolve_branch(const PlanNode& branch, RequestClass cls, Rng& rng) {
    if (branch.branch_mode == BranchMode::by_class) return cls == RequestClass::text ? 0 : 1;
    const double u = rng.uniform();
    const auto& cw = branch.cumulative_weights;
    auto it = std::upper_bound(cw.begin(), cw.end(), u);
    const auto idx = static_cast<std::size_t>(it - cw.begin());
    return std::min(idx, cw.size() - 1);
}

TieredOutcome execute_tiered_search(std::span<const TierProbe> tiers, std::uint64_t quota, Nanos start, Rng& rng) {
    TieredOutcome out;
    TieredSearch search(tiers.size(), quota);
    Nanos clock = start;
    while (!search.done()) {
        const TierProbe& tier = tiers[search.next_tier()];
        Span s;
        s.id = tier.component;
        s.kind = SpanKind::leaf;
        s.enqueue = s.start = clock;
        clock += sample_service_time(tier.service, rng);
        s.end = clock;
        out.spans.push_back(std::move(s));
        search.record_probe(sample_yield(tier.yield, rng));
    }
    out.results = search.results();
    out.quota_unreachable = search.quota_unreachable();
    return out;
}

}  // namespace ebf
