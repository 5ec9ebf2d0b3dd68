// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <sys/wait.h>

#include "ebf/config.hpp"
#include "ebf/orchestrate.hpp"
#include "ebf/report.hpp"
#include "support.hpp"

namespace ebf {
namespace {

namespace fs = std::filesystem;
using test::code_of;

const fs::path kPresets = EBF_PRESET_DIR;

std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("ebf_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int n = 0;
        return n;
    }
};

const char* kSmall = R"(
seed: 5
topology:
  entry: a
  components:
    - {id: a, kind: non_ai, servers: 1, service: {dist: exponential, rate: 20}}
  pipeline: a
workload:
  mode: open_loop
  rate: 9.1
  stop: {requests: 2000}
)";

TEST(Config, EcommercePresetTopology) {
    const auto c = load_config(kPresets / "ecommerce.yaml");
    const auto& t = c.topology;
    EXPECT_EQ(t.entry, "search_planner");
    EXPECT_EQ(t.components.size(), 10u);
    ASSERT_EQ(t.pipeline.kind, ExprKind::seq);
    ASSERT_EQ(t.pipeline.children.size(), 4u);
    EXPECT_EQ(t.pipeline.children[1].ref, "recommender");
    EXPECT_EQ(t.pipeline.children[2].ref, "searcher");
    const auto& rec = t.modules.at("recommender");
    ASSERT_EQ(rec.children.size(), 4u);
    EXPECT_EQ(rec.children[2].branch_mode, BranchMode::by_class);
    const auto& search = t.modules.at("searcher");
    EXPECT_EQ(search.kind, ExprKind::tiered);
    EXPECT_EQ(search.tiers.size(), 3u);
    EXPECT_EQ(search.quota, 10u);
    EXPECT_EQ(c.workload.mode, LoopMode::closed_loop);
    EXPECT_EQ(c.workload.users, 1000u);
    EXPECT_NO_THROW(Pipeline{t});
}

TEST(Config, RoundTripAndStableHash) {
    for (const char* name : {"ecommerce.yaml", "mm1.yaml", "loopback3.yaml"}) {
        const auto c = load_config(kPresets / name);
        const auto text = serialize_config(c);
        const auto again = parse_config(text, kPresets);
        EXPECT_EQ(again, c) << name;
        EXPECT_EQ(serialize_config(again), text) << name;
        EXPECT_EQ(config_hash(again), config_hash(c)) << name;
        EXPECT_EQ(config_hash(c).size(), 64u);
    }
    auto c = parse_config(kSmall);
    const auto h = config_hash(c);
    c.seed = 6;
    EXPECT_NE(config_hash(c), h);
}

TEST(Config, Errors) {
    EXPECT_EQ(code_of([] { parse_config(""); }), ErrorCode::SyntaxError);
    EXPECT_EQ(code_of([] { parse_config("seed: [1, 2"); }), ErrorCode::SyntaxError);
    std::string text = kSmall;
    text.replace(text.find("exponential"), 11, "exponentail");
    try {
        parse_config(text);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownKey);
        EXPECT_NE(std::string(e.what()).find("topology.components[0].service.dist"), std::string::npos) << e.what();
    }
    EXPECT_EQ(code_of([] { parse_config(std::string(kSmall) + "extra: 1\n"); }), ErrorCode::UnknownKey);
    EXPECT_EQ(code_of([] { parse_config(std::string(kSmall) + "sweep: {rates: [3, 2]}\n"); }), ErrorCode::ConstraintViolation);
    std::string neg = kSmall;
    neg.replace(neg.find("rate: 9.1"), 9, "rate: -1");
    EXPECT_EQ(code_of([&] { parse_config(neg); }), ErrorCode::ConstraintViolation);
    std::string ghost = kSmall;
    ghost.replace(ghost.find("pipeline: a"), 11, "pipeline: b");
    EXPECT_EQ(code_of([&] { parse_config(ghost); }), ErrorCode::UnknownNodeId);
}

TEST(Config, EmpiricalSamplesResolveAgainstConfigDir) {
    TempDir dir;
    std::ofstream(dir.path / "samples.txt") << "1.5\n2.5\n\n3\n";
    std::string text = kSmall;
    text.replace(text.find("{dist: exponential, rate: 20}"), 29, "{dist: empirical, file: samples.txt}");
    const auto c = parse_config(text, dir.path);
    const auto& e = std::get<Empirical>(c.topology.components[0].service);
    ASSERT_EQ(e.samples.size(), 3u);
    EXPECT_EQ(e.samples[1], from_ms(2.5));
}

TEST(Orchestrate, SimulateIsDeterministic) {
    auto c = parse_config(kSmall);
    c.queuing.mu = 20;
    const auto a = orchestrate(c), b = orchestrate(c);
    auto ja = a.json, jb = b.json;
    ja.erase("timing");
    jb.erase("timing");
    EXPECT_EQ(ja.dump(), jb.dump());
    EXPECT_EQ(a.runs[0].traces, b.runs[0].traces);
    EXPECT_EQ(ja["queuing"]["predictions"].size(), 1u);
    EXPECT_EQ(ja["config_hash"], config_hash(c));
}

TEST(Orchestrate, SweepGivesThreePairs) {
    const auto c = load_config(kPresets / "mm1.yaml");
    auto small = c;
    small.workload.stop = StopCondition::requests(5000);
    small.workload.warmup = std::chrono::seconds(10);
    const auto rep = orchestrate(small);
    EXPECT_EQ(rep.runs.size(), 3u);
    EXPECT_EQ(rep.json["queuing"]["predictions"].size(), 3u);
    EXPECT_EQ(rep.json["queuing"]["gaps"]["settings"].size(), 3u);
    small.sweep->parallel = true;
    auto par = orchestrate(small).json;
    auto seq = rep.json;
    for (auto* j : {&par, &seq}) {
        j->erase("timing");
        j->erase("config_hash");  // the parallel flag is part of the config
    }
    EXPECT_EQ(par, seq);
}

TEST(Orchestrate, PredictOnly) {
    auto c = parse_config(kSmall);
    c.queuing.mu = 20;
    const auto rep = predict_only(c);
    EXPECT_TRUE(rep.runs.empty());
    EXPECT_NEAR(rep.json["queuing"]["predictions"][0]["mean_ms"].get<double>(), 91.743, 1e-3);
}

TEST(Orchestrate, SloViolation) {
    auto c = parse_config(kSmall);
    c.analytics.slo_p99 = std::chrono::milliseconds(1);
    EXPECT_TRUE(orchestrate(c).threshold_violated);
    c.analytics.slo_p99 = std::chrono::seconds(100);
    EXPECT_FALSE(orchestrate(c).threshold_violated);
}

TEST(Report, AtomicWriteAndOutputs) {
    TempDir dir;
    auto c = parse_config(kSmall);
    c.output.report = (dir.path / "r.json").string();
    c.output.traces = (dir.path / "t.ndjson").string();
    c.output.breakdown_csv = (dir.path / "b.csv").string();
    const auto rep = orchestrate(c);
    write_outputs(rep, c);
    const auto j = nlohmann::json::parse(read(c.output.report));
    EXPECT_EQ(j["config_hash"], config_hash(c));
    std::ifstream traces(c.output.traces);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(traces, line)) {
        ++lines;
        ASSERT_EQ(nlohmann::json::parse(line)["run"], "lambda=9.1");
    }
    EXPECT_EQ(lines, 2000u);
    EXPECT_EQ(read(c.output.breakdown_csv).rfind("run,level,node,", 0), 0u);
    for (const auto& e : fs::directory_iterator(dir.path)) EXPECT_EQ(e.path().extension() == ".partial", false);
    std::ofstream(dir.path / "plain") << "x";
    EXPECT_EQ(code_of([&] { write_file_atomic(dir.path / "plain" / "r.json", "x"); }), ErrorCode::Io);
}

int run_cli(const std::string& args) {
    const int rc = std::system((std::string(EBF_CLI) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

TEST(Cli, ExitCodes) {
    TempDir dir;
    const auto cfg = dir.path / "c.yaml";
    std::ofstream(cfg) << kSmall;
    EXPECT_EQ(run_cli("simulate -c " + cfg.string() + " -o " + (dir.path / "r.json").string()), 0);
    EXPECT_TRUE(fs::exists(dir.path / "r.json"));
    EXPECT_EQ(run_cli("report " + (dir.path / "r.json").string()), 0);
    EXPECT_EQ(run_cli("predict --lambda 1,9.1,16.7 --mu 20"), 0);

    const auto bad = dir.path / "bad.yaml";
    std::ofstream(bad) << "seed: 1\nfoo: 2\n";
    EXPECT_EQ(run_cli("simulate -c " + bad.string()), 1);
    EXPECT_EQ(run_cli("simulate"), 1);

    const auto net = dir.path / "n.yaml";
    std::ofstream(net) << kSmall << "mode: network\nnetwork: {addresses: {a: \"127.0.0.1:1\"}}\n";
    EXPECT_EQ(run_cli("sweep --rates 1 -c " + net.string()), 2);
    EXPECT_EQ(run_cli("drive --entry 127.0.0.1:1 -c " + cfg.string()), 2);

    const auto slo = dir.path / "slo.yaml";
    std::ofstream(slo) << kSmall << "analytics: {slo_p99_ms: 1}\n";
    EXPECT_EQ(run_cli("simulate -c " + slo.string()), 3);
}

TEST(Cli, SeedOverrideAndKernels) {
    TempDir dir;
    const auto cfg = dir.path / "c.yaml";
    std::ofstream(cfg) << kSmall;
    const auto r1 = dir.path / "r1.json", r2 = dir.path / "r2.json";
    ASSERT_EQ(run_cli("simulate -c " + cfg.string() + " -o " + r1.string()), 0);
    ASSERT_EQ(std::system(("EBF_SEED=99 " + std::string(EBF_CLI) + " simulate -c " + cfg.string() + " -o " + r2.string() + " 2>/dev/null").c_str()), 0);
    const auto j1 = nlohmann::json::parse(read(r1)), j2 = nlohmann::json::parse(read(r2));
    EXPECT_EQ(j2["seed"], 99);
    EXPECT_NE(j1["config_hash"], j2["config_hash"]);
    ASSERT_EQ(run_cli("kernels run --name softmax --shape 8x8 --reps 2 -o " + r1.string()), 0);
    const auto j3 = nlohmann::json::parse(read(r1));
    ASSERT_EQ(j3["kernels"].size(), 1u);
    EXPECT_EQ(j3["kernels"][0]["name"], "softmax");
    EXPECT_EQ(j3["runs"], j1["runs"]);
    EXPECT_EQ(run_cli("kernels run --name sofmax"), 1);
}

TEST(Cli, Tradeoff) {
    TempDir dir;
    const auto pol = dir.path / "p.yaml";
    std::ofstream(pol) << "interval_s: 60\ncurve: [{overhead: 0.35, gain: 0.019}]\ncandidates_s: [10, 60, 600]\n"
                          "per_update_cost_s: 2\nhorizon_s: 3600\n";
    EXPECT_EQ(run_cli("tradeoff " + pol.string()), 0);
    std::ofstream(pol) << "intervl_s: 60\n";
    EXPECT_EQ(run_cli("tradeoff " + pol.string()), 1);
}

}  // namespace
}  // namespace ebf
