// SPDX-License-Identifier: Apache-2.0
// Acceptance checks 1-10. One PASS/FAIL line each; exit status is the
// number of failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ebf/analytics.hpp"
#include "ebf/config.hpp"
#include "ebf/core/trace.hpp"
#include "ebf/kernels.hpp"
#include "ebf/net/driver.hpp"
#include "ebf/net/frame.hpp"
#include "ebf/net/service.hpp"
#include "ebf/orchestrate.hpp"
#include "ebf/queuing.hpp"
#include "ebf/sim/engine.hpp"
#include "ebf/trainer.hpp"

namespace fs = std::filesystem;
using namespace ebf;

namespace {

const fs::path kPresets = EBF_PRESET_DIR;
const fs::path kFixtures = EBF_FIXTURE_DIR;

struct Outcome {
    bool pass = false;
    std::string detail;
};

bool within(double got, double want, double tol) { return std::abs(got - want) <= tol; }
bool within_rel(double got, double want, double rel) { return std::abs(got - want) <= rel * std::abs(want); }

Outcome queuing_formulas() {
    const double lambdas[] = {1.0, 9.1, 16.7};
    const double ours_mean[] = {52.6, 91.7, 303.0}, ours_tail[] = {242.4, 422.5, 1395.5};
    const double paper_mean[] = {53, 91, 303}, paper_tail[] = {242, 422, 1394};
    bool ok = true;
    std::string means, tails;
    for (int i = 0; i < 3; ++i) {
        const auto p = predict_mm1(lambdas[i], 20.0, 99.0);
        const double m = p.t_mean.count() * 1e3, t = p.t_p.count() * 1e3;
        ok = ok && within(m, ours_mean[i], 0.05) && within(t, ours_tail[i], 0.05);
        ok = ok && within(m, paper_mean[i], 2.0) && within(t, paper_tail[i], 2.0);
        means += fmt::format("{}{:.1f}", i ? "/" : "", m);
        tails += fmt::format("{}{:.1f}", i ? "/" : "", t);
    }
    return {ok, fmt::format("mean {} ms, p99 {} ms", means, tails)};
}

Outcome simulator_oracle() {
    Topology t;
    ComponentSpec c;
    c.id = "server";
    c.service = Exponential{20.0};
    t.components = {c};
    t.pipeline = Expr::reference("server");
    t.entry = "server";
    const Pipeline p(validate_topology(t));
    WorkloadSpec w;
    w.rate = 9.1;
    w.warmup = std::chrono::seconds(100);
    w.stop = StopCondition::requests(1'000'000);
    w.seed = 20240101;
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = simulate(p, w);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    LatencyRecorder rec;
    for (const auto& tr : res.traces) rec.add(end_to_end_latency(tr));
    const double mean = rec.mean_ns() / 1e9, p99 = to_seconds(rec.percentile(99));
    const double want_mean = mm1_mean(9.1, 20).count(), want_p99 = mm1_percentile(9.1, 20, 99).count();
    const double little_rhs = res.stats.arrival_rate * mean;
    const bool ok = res.traces.size() >= 1'000'000 && within_rel(mean, want_mean, 0.02) && within_rel(p99, want_p99, 0.05) &&
                    within_rel(res.stats.mean_in_system, little_rhs, 0.03);
    return {ok, fmt::format("n={} mean {:.2f}/{:.2f} ms, p99 {:.1f}/{:.1f} ms, L={:.4f} vs lambda*W={:.4f}, {:.1f}s",
                            res.traces.size(), mean * 1e3, want_mean * 1e3, p99 * 1e3, want_p99 * 1e3,
                            res.stats.mean_in_system, little_rhs, secs)};
}

Outcome gap_ratios() {
    const double lam[] = {1.0, 9.1, 16.7};
    const double mean_ms[] = {123, 459, 852}, tail_ms[] = {953, 5008, 11980};
    std::vector<MeasuredPoint> measured;
    std::vector<QueuePrediction> predicted;
    for (int i = 0; i < 3; ++i) {
        measured.push_back({lam[i], Seconds(mean_ms[i] / 1e3), Seconds(tail_ms[i] / 1e3)});
        predicted.push_back(predict_mm1(lam[i], 20.0, 99.0));
    }
    const auto g = gap_report(measured, predicted);
    const bool ok = within(g.mean_ratio_arithmetic, 3.4, 0.05) && within(g.tail_ratio_arithmetic, 8.1, 0.05);
    return {ok, fmt::format("mean-of-ratios {:.3f} (mean), {:.3f} (p99); geometric {:.3f}/{:.3f}", g.mean_ratio_arithmetic,
                            g.tail_ratio_arithmetic, g.mean_ratio_geometric, g.tail_ratio_geometric)};
}

Outcome tail_amplification() {
    auto c = load_config(kPresets / "ecommerce.yaml");
    c.queuing = QueuingConfig{};
    c.queuing.saturation = true;
    const auto rep = orchestrate(c);
    const auto& run = rep.runs.at(0);
    const double amp = amplification(run.traces, "searcher");
    const double mu = rep.json["queuing"]["mu_per_s"].get<double>();
    const double lambda = run.arrival_rate;
    const double predicted_ms = mm1_mean(lambda, mu).count() * 1e3;
    const double simulated_ms = run.latency.end_to_end.mean_ns / 1e6;
    const bool ok = amp > 10.0 && simulated_ms >= 2.0 * predicted_ms;
    return {ok, fmt::format("e2e p99 / searcher p99 = {:.1f}x; M/M/1 mean {:.2f} ms (lambda {:.1f}/s, mu {:.1f}/s) vs "
                            "simulated {:.2f} ms ({:.1f}x)",
                            amp, predicted_ms, lambda, mu, simulated_ms, simulated_ms / predicted_ms)};
}

Outcome breakdown_fit() {
    auto c = load_config(kPresets / "ecommerce.yaml");
    c.workload.stop = StopCondition::requests(100'000);
    c.queuing = QueuingConfig{};
    const auto rep = orchestrate(c);
    const auto& rows = rep.runs.at(0).latency.modules;
    const auto it = std::find_if(rows.begin(), rows.end(), [](const BreakdownRow& r) { return r.node == "recommender"; });
    if (it == rows.end()) return {false, "no recommender row"};
    const double mean = it->mean_ns / 1e6, p99 = to_ms(it->p99);
    const bool ok = it->count >= 100'000 && within(mean, 48.0, 3.0) && within(p99, 317.0, 20.0);
    return {ok, fmt::format("recommender n={} mean {:.2f} ms, p90 {:.1f} ms, p99 {:.1f} ms", it->count, mean, to_ms(it->p90), p99)};
}

Outcome percentile_oracle() {
    std::mt19937_64 gen(6);
    std::size_t checks = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + gen() % 10'000;
        std::vector<Nanos> xs(n);
        const std::uint64_t range = 1 + gen() % 100'000;
        for (auto& x : xs) x = Nanos{static_cast<std::int64_t>(gen() % range)};
        auto sorted = xs;
        std::sort(sorted.begin(), sorted.end());
        Nanos prev = Nanos::min();
        for (std::size_t h = 1; h <= 200; ++h) {
            // p = h/2 percent; exact rank is ceil(h*n/200)
            const double p = static_cast<double>(h) / 2.0;
            const std::size_t rank = (h * n + 199) / 200;
            const Nanos got = percentile(xs, p);
            if (got != sorted[std::max<std::size_t>(rank, 1) - 1] || got < prev)
                return {false, fmt::format("trial {} n={} p={} disagrees", trial, n, p)};
            prev = got;
            ++checks;
        }
    }
    return {true, fmt::format("1000 multisets, {} (sample, p) checks, monotone", checks)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const auto dir = fs::temp_directory_path() / fmt::format("ebf_acceptance_{}", ::getpid());
    fs::create_directories(dir);
    auto c = load_config(kPresets / "ecommerce.yaml");
    std::string first;
    bool ok = true;
    std::size_t bytes = 0;
    for (int i = 0; i < 2; ++i) {
        c.output = OutputConfig{};
        c.output.traces = (dir / fmt::format("traces{}.ndjson", i)).string();
        write_outputs(orchestrate(c), c);
        const auto content = slurp(c.output.traces);
        if (i == 0) first = content;
        else ok = content == first;
        bytes = content.size();
    }
    fs::remove_all(dir);
    return {ok && bytes > 0, fmt::format("two E-commerce runs, trace files of {} bytes {}", bytes, ok ? "identical" : "differ")};
}

Outcome wire_protocol() {
    std::mt19937_64 g(8);
    for (int i = 0; i < 10'000; ++i) {
        net::Frame f;
        f.type = static_cast<net::MsgType>(1 + g() % 4);
        f.request_id = g();
        f.cls = static_cast<std::uint8_t>(g());
        f.payload.resize(g() % 512);
        for (auto& b : f.payload) b = static_cast<std::uint8_t>(g());
        f.timestamps.resize(g() % 32);
        for (auto& t : f.timestamps)
            t = {g(), static_cast<std::int64_t>(g()), static_cast<std::int64_t>(g()), static_cast<std::int64_t>(g())};
        if (net::decode(net::encode(f)) != f) return {false, fmt::format("frame {} did not round-trip", i)};
    }
    const auto c = load_config(kPresets / "loopback3.yaml");
    auto pipeline = std::make_shared<const Pipeline>(c.topology);
    net::LocalCluster cluster(pipeline, {}, c.network.timeout, c.seed);
    const auto res = net::drive_load(cluster.entry(), *pipeline, c.workload);
    if (res.traces.empty()) return {false, "no loopback completions"};
    std::vector<Nanos> lat;
    for (const auto& t : res.traces) lat.push_back(end_to_end_latency(t));
    const double p50 = to_ms(percentile(lat, 50));
    const bool ok = res.errors == 0 && res.timeouts == 0 && p50 >= 30.0 && p50 <= 40.0;
    return {ok, fmt::format("10000 frames lossless; loopback 5/10/15 ms p50 {:.2f} ms over {} requests ({} errors, {} timeouts)",
                            p50, res.traces.size(), res.errors, res.timeouts)};
}

Outcome trainer_interpolation() {
    UpdatePolicy a;
    a.interval = std::chrono::seconds(60);
    a.curve = {{0.35, 0.019}};
    UpdatePolicy b = a;
    b.curve = {{0.10, 0.003}};
    const double g1 = interpolate_gain(a, 0.35), g0 = interpolate_gain(a, 0.0), g2 = interpolate_gain(b, 0.10);
    const bool ok = g1 == 0.019 && g0 == 0.0 && g2 == 0.003;
    return {ok, fmt::format("gain(0.35)={}, gain(0)={}, gain(0.10)={}", g1, g0, g2)};
}

std::vector<std::size_t> small_shape(kernels::Kernel k, std::mt19937_64& g) {
    using kernels::Kernel;
    auto r = [&](std::size_t lo, std::size_t hi) { return lo + g() % (hi - lo + 1); };
    switch (k) {
        case Kernel::convolution: {
            const std::size_t kk = r(1, 5);
            return {r(kk, 24), r(kk, 24), kk};
        }
        case Kernel::fully_connected: return {r(1, 8), r(1, 32), r(1, 32)};
        case Kernel::max_pooling:
        case Kernel::avg_pooling: return {r(2, 32), r(2, 32)};
        case Kernel::batch_norm:
        case Kernel::softmax:
        case Kernel::cosine_norm:
        case Kernel::data_arrangement: return {r(1, 16), r(1, 48)};
        default: return {r(1, 8), r(1, 128)};
    }
}

template <class T>
double worst_relative(const kernels::Tensor<T>& a, const kernels::Tensor<T>& b) {
    if (a.shape != b.shape) return INFINITY;
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a.data[i], y = b.data[i], scale = std::max(std::abs(x), std::abs(y));
        const double err = std::abs(x - y);
        if (err <= 1e-12) continue;
        worst = std::max(worst, err / scale);
    }
    return worst;
}

Outcome kernel_correctness() {
    using namespace kernels;
    std::mt19937_64 g(10);
    double worst32 = 0.0, worst64 = 0.0, softmax_err = 0.0;
    std::size_t cases = 0;
    for (auto k : kAllKernels) {
        for (int trial = 0; trial < 100; ++trial) {
            const auto shape = small_shape(k, g);
            Params params;
            params.seed = static_cast<std::uint64_t>(trial);
            const auto in32 = make_inputs<float>(k, shape, params, 500 + trial);
            const auto in64 = make_inputs<double>(k, shape, params, 500 + trial);
            worst32 = std::max(worst32, worst_relative(compute(in32), reference_oracle(in32)));
            const auto out64 = compute(in64);
            worst64 = std::max(worst64, worst_relative(out64, reference_oracle(in64)));
            if (k == Kernel::softmax) {
                const std::size_t rows = shape[0], cols = shape[1];
                for (std::size_t r = 0; r < rows; ++r) {
                    double s = 0.0;
                    for (std::size_t c = 0; c < cols; ++c) s += out64.data[r * cols + c];
                    softmax_err = std::max(softmax_err, std::abs(s - 1.0));
                }
            }
            ++cases;
        }
    }
    // fixed cases computed with numpy
    std::ifstream fin(kFixtures / "oracles.json");
    const auto fixtures = nlohmann::json::parse(fin);
    double worst_numpy = 0.0;
    std::size_t numpy_cases = 0;
    for (const auto& c : fixtures["kernels"]) {
        Inputs<double> in;
        in.kernel = parse_kernel(c["name"].get<std::string>());
        const auto shape = c["shape"].get<std::vector<std::size_t>>();
        std::vector<std::vector<std::size_t>> shapes;
        switch (in.kernel) {
            case Kernel::convolution: shapes = {{shape[0], shape[1]}, {shape[2], shape[2]}}; break;
            case Kernel::fully_connected: shapes = {{shape[0], shape[1]}, {shape[1], shape[2]}, {shape[2]}}; break;
            case Kernel::batch_norm: shapes = {shape, {shape[1]}, {shape[1]}, {shape[1]}, {shape[1]}}; break;
            case Kernel::elementwise_multiply: shapes = {shape, shape}; break;
            default: shapes = {shape};
        }
        const auto& ops = c["operands"];
        for (std::size_t i = 0; i < ops.size() && i < shapes.size(); ++i)
            in.operands.push_back({shapes[i], ops[i].get<std::vector<double>>()});
        const Tensor<double> want{c["expected_shape"].get<std::vector<std::size_t>>(), c["expected"].get<std::vector<double>>()};
        worst_numpy = std::max(worst_numpy, worst_relative(compute(in), want));
        ++numpy_cases;
    }
    const bool ok = worst32 <= 1e-6 && worst64 <= 1e-6 && softmax_err <= 1e-9 && numpy_cases >= 13 && worst_numpy <= 1e-6;
    return {ok, fmt::format("{} random cases vs reference, worst relative error f32 {:.2e}, f64 {:.2e}; {} numpy cases {:.2e}; "
                            "softmax |row sum - 1| <= {:.1e}",
                            cases, worst32, worst64, numpy_cases, worst_numpy, softmax_err)};
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::warn);
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"queuing formula reproduction", queuing_formulas},
        {"simulator vs M/M/1 oracle", simulator_oracle},
        {"gap-ratio arithmetic", gap_ratios},
        {"tail amplification", tail_amplification},
        {"breakdown fit", breakdown_fit},
        {"percentile oracle", percentile_oracle},
        {"determinism", determinism},
        {"wire protocol", wire_protocol},
        {"trainer interpolation", trainer_interpolation},
        {"kernel correctness", kernel_correctness},
    };
    int failures = 0, n = 0;
    for (const auto& [name, check] : criteria) {
        ++n;
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("criterion %2d %-30s %s  %s\n", n, name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%d criteria passed\n", n - failures, n);
    return failures;
}
