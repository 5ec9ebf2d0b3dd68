// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include <gtest/gtest.h>

#include "ebf/analytics.hpp"
#include "ebf/core/trace.hpp"
#include "ebf/queuing.hpp"
#include "ebf/sim/engine.hpp"
#include "ebf/sim/execution.hpp"
#include "support.hpp"

namespace ebf {
namespace {

using test::fixed_ms;
using test::station;

WorkloadSpec poisson(double rate, std::uint64_t n, std::uint64_t seed = 1) {
    WorkloadSpec w;
    w.rate = rate;
    w.stop = StopCondition::requests(n);
    w.warmup = std::chrono::seconds(50);
    w.seed = seed;
    return w;
}

LatencyRecorder e2e(const std::vector<RequestTrace>& ts) {
    LatencyRecorder r;
    for (const auto& t : ts) r.add(end_to_end_latency(t));
    return r;
}

TEST(Sim, MM1MatchesClosedForm) {
    const Pipeline p(test::mm1_topology(20.0));
    const auto res = simulate(p, poisson(9.1, 300000));
    ASSERT_EQ(res.traces.size(), 300000u);
    const auto r = e2e(res.traces);
    EXPECT_NEAR(r.mean_ns() / 1e9, mm1_mean(9.1, 20.0).count(), 0.03 * mm1_mean(9.1, 20.0).count());
    EXPECT_NEAR(to_seconds(r.percentile(99)), mm1_percentile(9.1, 20.0, 99).count(), 0.06 * mm1_percentile(9.1, 20.0, 99).count());
}

TEST(Sim, LittlesLaw) {
    const Pipeline p(test::mm1_topology(20.0));
    const auto res = simulate(p, poisson(16.7, 200000));
    const double mean_s = e2e(res.traces).mean_ns() / 1e9;
    EXPECT_NEAR(res.stats.mean_in_system, res.stats.arrival_rate * mean_s, 0.03 * res.stats.mean_in_system);
    EXPECT_NEAR(res.stats.arrival_rate, 16.7, 16.7 * 0.02);
    ASSERT_EQ(res.stats.stations.size(), 1u);
    EXPECT_NEAR(res.stats.stations[0].utilization, 16.7 / 20.0, 0.02);
}

TEST(Sim, MMkMatchesErlangC) {
    Topology t;
    t.components = {station("pool", Exponential{4.0}, 3)};
    t.pipeline = Expr::reference("pool");
    t.entry = "pool";
    const Pipeline p(validate_topology(t));
    const auto res = simulate(p, poisson(10.0, 300000));
    EXPECT_NEAR(e2e(res.traces).mean_ns() / 1e9, mmk_mean_response(10.0, 4.0, 3).count(),
                0.03 * mmk_mean_response(10.0, 4.0, 3).count());
}

TEST(Sim, DeterministicReplay) {
    const Pipeline p(test::mm1_topology(20.0));
    const auto a = simulate(p, poisson(12.0, 20000, 77));
    const auto b = simulate(p, poisson(12.0, 20000, 77));
    EXPECT_EQ(a.traces, b.traces);
    const auto c = simulate(p, poisson(12.0, 20000, 78));
    EXPECT_NE(a.traces, c.traces);
}

TEST(Sim, UncontendedChainAddsUp) {
    const Pipeline p(test::chain({{"a", 5}, {"b", 10}, {"c", 15}}));
    const auto res = simulate(p, poisson(1.0, 200));
    for (const auto& t : res.traces) {
        ASSERT_EQ(end_to_end_latency(t), std::chrono::milliseconds(30));
        ASSERT_EQ(critical_path(t), std::chrono::milliseconds(30));
        ASSERT_NO_THROW(check_span_tree(t.root));
        ASSERT_EQ(t.root.children.size(), 3u);
    }
}

TEST(Sim, ParallelTakesTheSlowestArm) {
    Topology t;
    t.components = {station("front", fixed_ms(1), 8), station("x", fixed_ms(4), 8), station("y", fixed_ms(9), 8)};
    t.pipeline = Expr::seq({Expr::reference("front"), Expr::par({Expr::reference("x"), Expr::reference("y")})});
    t.entry = "front";
    const Pipeline p(validate_topology(t));
    for (const auto& tr : simulate(p, poisson(1.0, 100)).traces) ASSERT_EQ(end_to_end_latency(tr), std::chrono::milliseconds(10));
}

TEST(Sim, ClassBranchFollowsRequestClass) {
    Topology t;
    t.components = {station("front", fixed_ms(1), 8), station("txt", fixed_ms(2), 8), station("img", fixed_ms(7), 8)};
    t.pipeline = Expr::seq({Expr::reference("front"), Expr::by_class(Expr::reference("txt"), Expr::reference("img"))});
    t.entry = "front";
    const Pipeline p(validate_topology(t));
    auto w = poisson(1.0, 400);
    w.fraction_text = 0.5;
    std::size_t images = 0;
    for (const auto& tr : simulate(p, w).traces) {
        const bool text = tr.cls == RequestClass::text;
        images += !text;
        ASSERT_EQ(end_to_end_latency(tr), std::chrono::milliseconds(text ? 3 : 8));
    }
    EXPECT_GT(images, 100u);
}

TEST(Sim, TieredSearchStopsAtQuota) {
    TieredSearch s(3, 10);
    s.record_probe(6);
    EXPECT_FALSE(s.done());
    s.record_probe(20);
    EXPECT_TRUE(s.done());
    EXPECT_TRUE(s.quota_met());
    EXPECT_EQ(s.next_tier(), 2u);

    TieredSearch starved(2, 10);
    starved.record_probe(1);
    starved.record_probe(2);
    EXPECT_TRUE(starved.quota_unreachable());

    std::vector<TierProbe> tiers{{"t0", fixed_ms(1), {YieldModel::Dist::deterministic, 4, 0}},
                                 {"t1", fixed_ms(2), {YieldModel::Dist::deterministic, 4, 0}},
                                 {"t2", fixed_ms(3), {YieldModel::Dist::deterministic, 4, 0}}};
    Rng rng(1);
    auto out = execute_tiered_search(tiers, 8, Nanos{0}, rng);
    ASSERT_EQ(out.spans.size(), 2u);
    EXPECT_EQ(out.spans[1].end, std::chrono::milliseconds(3));
    EXPECT_FALSE(out.quota_unreachable);
    out = execute_tiered_search(tiers, 100, Nanos{0}, rng);
    EXPECT_EQ(out.spans.size(), 3u);
    EXPECT_TRUE(out.quota_unreachable);
}

TEST(Sim, QuotaUnreachableIsFlagged) {
    Topology t;
    t.components = {station("front", fixed_ms(1), 4), station("s0", fixed_ms(1), 4), station("s1", fixed_ms(1), 4)};
    t.pipeline = Expr::seq({Expr::reference("front"),
                            Expr::tiered({{"s0", {YieldModel::Dist::deterministic, 2, 0}, {}},
                                          {"s1", {YieldModel::Dist::deterministic, 3, 0}, {}}},
                                         10)});
    t.entry = "front";
    const Pipeline p(validate_topology(t));
    const auto res = simulate(p, poisson(1.0, 50));
    EXPECT_EQ(res.stats.quota_unreachable, 50u);
    for (const auto& tr : res.traces) EXPECT_TRUE(tr.quota_unreachable);
}

TEST(Sim, ServiceSamplesMatchDistributions) {
    const auto& d = test::oracles()["distributions"];
    Rng rng(5);
    auto check = [&](const ServiceTimeModel& m, const nlohmann::json& o) {
        std::vector<Nanos> xs(400000);
        for (auto& x : xs) x = sample_service_time(m, rng);
        double sum = 0;
        for (auto x : xs) sum += to_seconds(x);
        EXPECT_NEAR(sum / xs.size(), o["mean_s"].get<double>(), 0.03 * o["mean_s"].get<double>());
        EXPECT_NEAR(to_seconds(percentile(xs, 99)), o["p99_s"].get<double>(), 0.03 * o["p99_s"].get<double>());
        EXPECT_NEAR(mean_seconds(m), o["mean_s"].get<double>(), 1e-9);
    };
    check(Exponential{20.0}, d["exponential"]);
    check(Lognormal{-4.574, 1.433}, d["lognormal"]);
    check(ShiftedPareto{2.5, from_ms(4), from_ms(1)}, d["shifted_pareto"]);
}

TEST(Sim, TrainerUpdatesConsumeCapacity) {
    const Pipeline p(test::chain({{"model", 2}}));
    auto w = poisson(50.0, 20000);
    const auto base = simulate(p, w);
    SimOptions opts;
    opts.trainer = TrainerLoad{"model", std::chrono::seconds(5), std::chrono::milliseconds(500)};
    const auto loaded = simulate(p, w, opts);
    EXPECT_GT(loaded.stats.trainer_updates, 0u);
    EXPECT_GT(e2e(loaded.traces).percentile(99), e2e(base.traces).percentile(99));
}

TEST(Sim, OverloadWarns) {
    const Pipeline p(test::mm1_topology(5.0));
    const auto res = simulate(p, poisson(10.0, 5000));
    EXPECT_FALSE(res.stats.warnings.empty());
}

TEST(Sim, ClosedLoopCompletesRequestedCount) {
    const Pipeline p(test::mm1_topology(100.0));
    WorkloadSpec w;
    w.mode = LoopMode::closed_loop;
    w.users = 10;
    w.think_time_mean = std::chrono::milliseconds(500);
    w.stop = StopCondition::requests(5000);
    w.warmup = std::chrono::seconds(5);
    const auto res = simulate(p, w);
    EXPECT_EQ(res.traces.size(), 5000u);
    // interactive response time law: X = N / (Z + R)
    const double r = e2e(res.traces).mean_ns() / 1e9;
    EXPECT_NEAR(res.stats.throughput, 10.0 / (0.5 + r), 0.05 * res.stats.throughput);
}

TEST(Sim, SaturationEstimate) {
    const Pipeline p(test::mm1_topology(20.0));
    EXPECT_NEAR(estimate_service_rate(p, poisson(1.0, 10)), 20.0, 20.0 * 0.03);
}

}  // namespace
}  // namespace ebf
