// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "ebf/trainer.hpp"
#include "support.hpp"

namespace ebf {
namespace {

using std::chrono::seconds;
using test::code_of;

UpdatePolicy policy(std::vector<CurvePoint> curve) {
    UpdatePolicy p;
    p.interval = seconds(60);
    p.curve = std::move(curve);
    return p;
}

TEST(Trainer, InterpolationMatchesNumpy) {
    for (const auto& c : test::oracles()["trainer"]) {
        std::vector<CurvePoint> curve;
        for (const auto& pt : c["curve"]) curve.push_back({pt[0], pt[1]});
        const auto p = policy(curve);
        for (std::size_t i = 0; i < c["x"].size(); ++i)
            EXPECT_NEAR(interpolate_gain(p, c["x"][i]), c["gain"][i].get<double>(), 1e-15);
    }
}

TEST(Trainer, ExactCurvePoints) {
    EXPECT_EQ(interpolate_gain(policy({{0.35, 0.019}}), 0.35), 0.019);
    EXPECT_EQ(interpolate_gain(policy({{0.35, 0.019}}), 0.0), 0.0);
    EXPECT_EQ(interpolate_gain(policy({{0.10, 0.003}}), 0.10), 0.003);
}

TEST(Trainer, NoExtrapolation) {
    EXPECT_EQ(code_of([] { interpolate_gain(policy({{0.35, 0.019}}), 0.36); }), ErrorCode::OutOfCurveRange);
    EXPECT_EQ(code_of([] { interpolate_gain(policy({{0.35, 0.019}}), -0.01); }), ErrorCode::OutOfCurveRange);
}

TEST(Trainer, PolicyValidation) {
    EXPECT_EQ(code_of([] { validate_policy(policy({})); }), ErrorCode::InvalidPolicy);
    EXPECT_EQ(code_of([] { validate_policy(policy({{0.3, 0.01}, {0.2, 0.02}})); }), ErrorCode::InvalidPolicy);
    auto p = policy({{0.3, 0.01}});
    p.interval = Nanos{0};
    EXPECT_EQ(code_of([&] { validate_policy(p); }), ErrorCode::InvalidPolicy);
}

TEST(Trainer, TradeoffRecordsAndChoice) {
    const auto p = policy({{0.1, 0.004}, {0.3, 0.01}, {0.6, 0.012}});
    const std::vector<Nanos> cands{seconds(10), seconds(30), seconds(100), seconds(1000)};
    const auto recs = evaluate_policy(p, seconds(1000), seconds(3), cands, 0.01);
    ASSERT_EQ(recs.size(), 4u);
    EXPECT_EQ(recs[0].updates, 100u);
    EXPECT_DOUBLE_EQ(recs[0].overhead_fraction, 0.3);
    EXPECT_NEAR(recs[0].gain, 0.01, 1e-15);
    EXPECT_EQ(recs[3].updates, 1u);
    // 10 s: 0.01 - 0.003 = 0.007 ; 30 s: overhead 0.099 -> gain 0.00396 - 0.00099
    EXPECT_EQ(choose_interval(recs), seconds(10));
    EXPECT_EQ(choose_interval(recs, seconds(30)), seconds(10));
    EXPECT_EQ(code_of([&] { choose_interval(recs, seconds(5)); }), ErrorCode::NoCandidates);
}

TEST(Trainer, InfeasibleAndEmpty) {
    const auto p = policy({{0.1, 0.004}});
    const std::vector<Nanos> cands{seconds(1)};
    const auto recs = evaluate_policy(p, seconds(100), seconds(1), cands);
    EXPECT_FALSE(recs[0].feasible);
    EXPECT_EQ(code_of([&] { evaluate_policy(p, seconds(100), seconds(1), std::vector<Nanos>{}); }), ErrorCode::NoCandidates);
    EXPECT_EQ(code_of([&] { evaluate_policy(p, seconds(1), seconds(1), std::vector<Nanos>{seconds(5)}); }), ErrorCode::InvalidPolicy);
}

}  // namespace
}  // namespace ebf
