// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "ebf/core/topology.hpp"
#include "ebf/core/trace.hpp"
#include "ebf/rng.hpp"
#include "support.hpp"

namespace ebf {
namespace {

using test::code_of;
using test::fixed_ms;
using test::station;

Topology three_stage() {
    Topology t;
    t.components = {station("c", fixed_ms(3)), station("a", fixed_ms(1)), station("b", fixed_ms(2))};
    t.pipeline = Expr::seq({Expr::reference("a"), Expr::reference("b"), Expr::reference("c")});
    t.entry = "a";
    return t;
}

TEST(Topology, CanonicalisesAndIsIdempotent) {
    const auto v = validate_topology(three_stage());
    ASSERT_EQ(v.components.size(), 3u);
    EXPECT_EQ(v.components[0].id, "a");
    EXPECT_EQ(v.components[2].id, "c");
    EXPECT_EQ(validate_topology(v), v);
}

TEST(Topology, RejectsEmpty) {
    EXPECT_EQ(code_of([] { validate_topology(Topology{}); }), ErrorCode::EmptyTopology);
}

TEST(Topology, RejectsUnknownReference) {
    auto t = three_stage();
    t.pipeline.children.push_back(Expr::reference("ghost"));
    try {
        validate_topology(t);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownNodeId);
        EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos);
    }
}

TEST(Topology, RejectsModuleCycle) {
    auto t = three_stage();
    t.modules["m1"] = Expr::seq({Expr::reference("a"), Expr::reference("m2")});
    t.modules["m2"] = Expr::seq({Expr::reference("b"), Expr::reference("m1")});
    t.pipeline = Expr::reference("m1");
    EXPECT_EQ(code_of([&] { validate_topology(t); }), ErrorCode::CycleDetected);
}

TEST(Topology, BranchWeightsMustSumToOne) {
    auto t = three_stage();
    t.pipeline = Expr::seq({Expr::reference("a"), Expr::branch({0.5, 0.4}, {Expr::reference("b"), Expr::reference("c")})});
    EXPECT_EQ(code_of([&] { validate_topology(t); }), ErrorCode::BranchWeightSumInvalid);
    t.pipeline.children[1].weights = {0.25, 0.75};
    EXPECT_NO_THROW(validate_topology(t));
}

TEST(Topology, RejectsZeroServers) {
    auto t = three_stage();
    t.components[0].servers = 0;
    EXPECT_EQ(code_of([&] { validate_topology(t); }), ErrorCode::InvalidComponent);
}

TEST(Topology, RejectsDuplicateIds) {
    auto t = three_stage();
    t.components.push_back(station("a", fixed_ms(1)));
    EXPECT_NE(code_of([&] { validate_topology(t); }), ErrorCode::Io);
}

TEST(Topology, PipelineResolvesStations) {
    const Pipeline p(validate_topology(three_stage()));
    EXPECT_EQ(p.root().kind, SpanKind::seq);
    ASSERT_EQ(p.root().children.size(), 3u);
    EXPECT_EQ(p.stations()[p.root().children[1].station].id, "b");
    EXPECT_EQ(p.stations()[p.entry_station()].id, "a");
    EXPECT_EQ(first_leaf(p.root()).label, "a");
}

Span leaf(const char* id, std::int64_t enq, std::int64_t start, std::int64_t end) {
    Span s;
    s.id = id;
    s.enqueue = Nanos{enq};
    s.start = Nanos{start};
    s.end = Nanos{end};
    return s;
}

TEST(Trace, CriticalPathOfSequenceAndParallel) {
    Span root;
    root.kind = SpanKind::seq;
    Span par;
    par.kind = SpanKind::par;
    par.children = {leaf("x", 10, 10, 40), leaf("y", 10, 12, 25)};
    par.enqueue = par.start = Nanos{10};
    par.end = Nanos{40};
    root.children = {leaf("a", 0, 0, 10), par, leaf("c", 40, 45, 50)};
    root.enqueue = root.start = Nanos{0};
    root.end = Nanos{50};
    EXPECT_NO_THROW(check_span_tree(root));
    EXPECT_EQ(critical_path(root), Nanos{50});
}

TEST(Trace, ChildOutsideParentIsMalformed) {
    Span root;
    root.kind = SpanKind::seq;
    root.children = {leaf("a", 0, 0, 10), leaf("b", 10, 10, 30)};
    root.enqueue = root.start = Nanos{0};
    root.end = Nanos{20};
    EXPECT_EQ(code_of([&] { check_span_tree(root); }), ErrorCode::MalformedSpanTree);
}

TEST(Trace, StartBeforeEnqueueIsMalformed) {
    EXPECT_EQ(code_of([] { check_span_tree(leaf("a", 5, 4, 10)); }), ErrorCode::MalformedSpanTree);
}

TEST(Rng, Fnv1aMatchesReferenceVectors) {
    for (const auto& v : test::oracles()["fnv1a64"]) {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(v["text"].get<std::string>())));
        EXPECT_EQ(std::string(buf), v["hash"].get<std::string>());
    }
}

TEST(Rng, SubstreamsAreStableAndIndependent) {
    const Rng master(42);
    auto a1 = master.substream("arrivals");
    auto a2 = master.substream("arrivals");
    auto b = master.substream("service");
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a1.next_u64(), a2.next_u64());
    auto a3 = master.substream("arrivals");
    int same = 0;
    for (int i = 0; i < 100; ++i) same += a3.next_u64() == b.next_u64();
    EXPECT_EQ(same, 0);
}

TEST(Rng, UniformStaysInUnitInterval) {
    Rng r(3);
    for (int i = 0; i < 100000; ++i) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        ASSERT_GT(r.uniform_open_low(), 0.0);
    }
}

}  // namespace
}  // namespace ebf
