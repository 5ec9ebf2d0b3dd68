// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "ebf/workload.hpp"
#include "support.hpp"

namespace ebf {
namespace {

using test::code_of;

WorkloadSpec open_loop(double rate, std::uint64_t n) {
    WorkloadSpec w;
    w.rate = rate;
    w.stop = StopCondition::requests(n);
    w.seed = 9;
    return w;
}

TEST(Workload, OpenLoopRateAndClassMix) {
    auto w = open_loop(50.0, 200000);
    w.fraction_text = 0.7;
    const auto ev = gen_open_loop(w);
    ASSERT_EQ(ev.size(), 200000u);
    const double span_s = to_seconds(ev.back().scheduled);
    EXPECT_NEAR(ev.size() / span_s, 50.0, 50.0 * 0.01);
    std::size_t text = 0;
    for (std::size_t i = 0; i < ev.size(); ++i) {
        text += ev[i].cls == RequestClass::text;
        if (i) ASSERT_GE(ev[i].scheduled, ev[i - 1].scheduled);
        ASSERT_EQ(ev[i].request_id, i);
    }
    EXPECT_NEAR(static_cast<double>(text) / ev.size(), 0.7, 0.005);
}

TEST(Workload, OpenLoopGapsAreExponential) {
    const auto ev = gen_open_loop(open_loop(10.0, 100000));
    // coefficient of variation of an exponential is 1
    double sum = 0, sq = 0;
    for (std::size_t i = 1; i < ev.size(); ++i) {
        const double g = to_seconds(ev[i].scheduled - ev[i - 1].scheduled);
        sum += g;
        sq += g * g;
    }
    const double n = static_cast<double>(ev.size() - 1), mean = sum / n;
    EXPECT_NEAR(std::sqrt(sq / n - mean * mean) / mean, 1.0, 0.02);
}

TEST(Workload, SameSeedSameArrivals) {
    EXPECT_EQ(gen_open_loop(open_loop(5.0, 1000)), gen_open_loop(open_loop(5.0, 1000)));
    auto other = open_loop(5.0, 1000);
    other.seed = 10;
    EXPECT_NE(gen_open_loop(other), gen_open_loop(open_loop(5.0, 1000)));
}

TEST(Workload, WarmupArrivalsAreExtra) {
    auto w = open_loop(100.0, 500);
    w.warmup = std::chrono::seconds(2);
    const auto ev = gen_open_loop(w);
    std::size_t measured = 0;
    for (const auto& e : ev) measured += e.scheduled >= w.warmup;
    EXPECT_EQ(measured, 500u);
    EXPECT_GT(ev.size(), 500u);
}

TEST(Workload, DurationStop) {
    auto w = open_loop(100.0, 0);
    w.stop = StopCondition::for_duration(std::chrono::seconds(10));
    const auto ev = gen_open_loop(w);
    EXPECT_LT(ev.back().scheduled, std::chrono::seconds(10));
    EXPECT_NEAR(static_cast<double>(ev.size()), 1000.0, 150.0);
}

TEST(Workload, RejectsBadRates) {
    EXPECT_EQ(code_of([] { validate_workload(open_loop(0.0, 10)); }), ErrorCode::InvalidRate);
    EXPECT_EQ(code_of([] { validate_workload(open_loop(-1.0, 10)); }), ErrorCode::InvalidRate);
    EXPECT_EQ(code_of([] { validate_workload(open_loop(std::nan(""), 10)); }), ErrorCode::InvalidRate);
    auto w = open_loop(1.0, 10);
    w.fraction_text = 1.5;
    EXPECT_EQ(code_of([&] { validate_workload(w); }), ErrorCode::InvalidWorkload);
    w = open_loop(1.0, 10);
    w.mode = LoopMode::closed_loop;
    w.users = 0;
    EXPECT_EQ(code_of([&] { validate_workload(w); }), ErrorCode::InvalidWorkload);
}

TEST(Workload, ClosedLoopThinkTime) {
    WorkloadSpec w;
    w.mode = LoopMode::closed_loop;
    w.users = 4;
    w.think_time_mean = std::chrono::milliseconds(200);
    w.stop = StopCondition::requests(100);
    auto users = make_users(w);
    ASSERT_EQ(users.size(), 4u);
    double total = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const auto ev = next_closed_loop_arrival(users[0], Nanos{1000}, w, i);
        ASSERT_GE(ev.scheduled, Nanos{1000});
        total += to_ms(ev.scheduled - Nanos{1000});
    }
    EXPECT_NEAR(total / n, 200.0, 200.0 * 0.03);
}

TEST(Workload, SplitWarmup) {
    std::vector<RequestTrace> ts(5);
    for (int i = 0; i < 5; ++i) ts[i].arrival = std::chrono::seconds(i);
    const auto s = split_warmup(ts, std::chrono::seconds(2));
    EXPECT_EQ(s.discarded.size(), 2u);
    EXPECT_EQ(s.measured.size(), 3u);
    EXPECT_EQ(s.measured.front().arrival, std::chrono::seconds(2));
}

TEST(Workload, ArrivalExport) {
    std::ostringstream out;
    const std::vector<ArrivalEvent> ev{{0, Nanos{5}, RequestClass::text}, {1, Nanos{9}, RequestClass::image}};
    write_arrivals(out, ev);
    EXPECT_EQ(out.str(), "0,5,text\n1,9,image\n");
}

}  // namespace
}  // namespace ebf
