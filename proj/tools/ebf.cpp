// SPDX-License-Identifier: Apache-2.0
// ebf command line: simulate, serve, drive, sweep, predict, tradeoff,
// kernels, report.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ebf/config.hpp"
#include "ebf/error.hpp"
#include "ebf/net/service.hpp"
#include "ebf/orchestrate.hpp"
#include "ebf/queuing.hpp"
#include "ebf/report.hpp"

namespace {

enum Exit : int { ok = 0, config_error = 1, runtime_error = 2, threshold = 3 };

/// Thrown around anything that happens before a run starts, so the exit
/// code can tell a bad config from a failed run.
struct ConfigFailure {
    std::string message;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigFailure{"Io: cannot read '" + path + "'"};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ebf::RunConfig load(const std::string& path) {
    ebf::RunConfig c;
    try {
        c = ebf::load_config(path);
    } catch (const ebf::Error& e) {
        throw ConfigFailure{path + ": " + e.what()};
    }
    if (const char* s = std::getenv("EBF_SEED"); s && *s) {
        try {
            c.seed = std::stoull(s);
        } catch (const std::exception&) {
            throw ConfigFailure{std::string("EBF_SEED: not an unsigned integer: '") + s + "'"};
        }
        c.workload.seed = c.seed;
    }
    return c;
}

std::vector<std::size_t> parse_shape(const std::string& text) {
    std::vector<std::size_t> shape;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, 'x')) {
        std::size_t pos = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(part, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != part.size() || v == 0) throw ConfigFailure{"--shape: expected dimensions like 32x32, got '" + text + "'"};
        shape.push_back(v);
    }
    return shape;
}

void emit(const ebf::Report& rep, const ebf::RunConfig& c, const std::string& out) {
    ebf::write_outputs(rep, c, out);
    if (out.empty() && c.output.report.empty()) std::cout << rep.json.dump(2) << "\n";
    else std::cerr << ebf::render_report(rep.json);
}

int finish(const ebf::Report& rep) {
    if (rep.threshold_violated) {
        spdlog::error("p99 exceeds the configured SLO");
        return threshold;
    }
    return ok;
}

void set_log_level(const std::string& level) {
    if (level.empty()) return;
    const auto lvl = spdlog::level::from_str(level);
    if (lvl == spdlog::level::off && level != "off") throw ConfigFailure{"unknown log level '" + level + "'"};
    spdlog::set_level(lvl);
}

}  // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("ebf");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    spdlog::cfg::load_env_levels();  // SPDLOG_LEVEL
    if (const char* lvl = std::getenv("EBF_LOG_LEVEL"); lvl && *lvl) spdlog::set_level(spdlog::level::from_str(lvl));

    CLI::App app{"End-to-end AI benchmark toolkit"};
    app.set_version_flag("--version", std::string(ebf::tool_version()));
    app.require_subcommand(1);
    std::string log_level;
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off");

    std::string config, out;

    auto* sim = app.add_subcommand("simulate", "Run the configured topology in the simulator");
    sim->add_option("-c,--config", config, "run config (YAML)")->required()->check(CLI::ExistingFile);
    sim->add_option("-o,--out", out, "report path (overrides output.report)");

    auto* run = app.add_subcommand("run", "Run a config in its own mode (network mode starts a loopback cluster)");
    run->add_option("-c,--config", config, "run config (YAML)")->required()->check(CLI::ExistingFile);
    run->add_option("-o,--out", out, "report path (overrides output.report)");

    auto* sweep = app.add_subcommand("sweep", "Sweep open-loop arrival rates");
    std::vector<double> rates;
    bool parallel = false;
    sweep->add_option("-c,--config", config, "run config (YAML)")->required()->check(CLI::ExistingFile);
    sweep->add_option("--rates", rates, "arrival rates per second (replaces sweep.rates)")->delimiter(',');
    sweep->add_flag("--parallel", parallel, "run sweep points concurrently");
    sweep->add_option("-o,--out", out, "report path");

    auto* serve = app.add_subcommand("serve", "Serve one component over TCP");
    std::string component, listen;
    serve->add_option("--component", component, "component id")->required();
    serve->add_option("-c,--config", config, "run config (YAML)")->required()->check(CLI::ExistingFile);
    serve->add_option("--listen", listen, "host:port (default: network.addresses entry)");

    auto* drive = app.add_subcommand("drive", "Drive the workload against a running entry service");
    std::string entry;
    drive->add_option("--entry", entry, "entry service host:port")->required();
    drive->add_option("-c,--config", config, "run config (YAML)")->required()->check(CLI::ExistingFile);
    drive->add_option("-o,--out", out, "report path");

    auto* predict = app.add_subcommand("predict", "M/M/1 response-time predictions");
    std::vector<double> lambdas;
    double mu = 0.0, pct = 99.0;
    predict->add_option("--lambda", lambdas, "arrival rates per second")->delimiter(',');
    predict->add_option("--mu", mu, "service rate per second");
    predict->add_option("--p", pct, "percentile")->capture_default_str();
    predict->add_option("-c,--config", config, "predict from a run config instead")->check(CLI::ExistingFile);
    predict->add_option("-o,--out", out, "report path (with --config)");

    auto* tradeoff = app.add_subcommand("tradeoff", "Model-update interval trade-off table");
    std::string policy;
    tradeoff->add_option("policy", policy, "policy file (YAML trainer section or run config)")->required()->check(CLI::ExistingFile);
    tradeoff->add_option("-o,--out", out, "also write a JSON report");

    auto* kernels = app.add_subcommand("kernels", "Micro-benchmark kernels");
    kernels->require_subcommand(1);
    auto* krun = kernels->add_subcommand("run", "Run one kernel, or every kernel in a config");
    std::string kname, kshape, kprec = "f32";
    std::size_t kreps = 10;
    std::uint64_t kseed = 1;
    krun->add_option("--name", kname, "kernel name");
    krun->add_option("--shape", kshape, "dimensions, e.g. 32x32x3");
    krun->add_option("--reps", kreps, "timed repetitions")->capture_default_str()->check(CLI::PositiveNumber);
    krun->add_option("--precision", kprec, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}))->capture_default_str();
    krun->add_option("--seed", kseed, "input seed")->capture_default_str();
    krun->add_option("-c,--config", config, "run every kernel listed in a config")->check(CLI::ExistingFile);
    krun->add_option("-o,--out", out, "JSON report to append results to");

    auto* report = app.add_subcommand("report", "Pretty-print a JSON report");
    std::string report_path;
    report->add_option("file", report_path, "report JSON")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? ok : config_error;
    }

    bool running = false;
    try {
        set_log_level(log_level);

        if (*sim || *run) {
            auto c = load(config);
            if (*sim) c.mode = ebf::RunMode::simulate;
            running = true;
            const auto rep = ebf::orchestrate(c);
            emit(rep, c, out);
            return finish(rep);
        }
        if (*sweep) {
            auto c = load(config);
            if (!rates.empty()) {
                if (!std::is_sorted(rates.begin(), rates.end(), std::less_equal<>()) || rates.front() <= 0.0)
                    throw ConfigFailure{"--rates: must be positive and strictly increasing"};
                if (c.workload.mode != ebf::LoopMode::open_loop) throw ConfigFailure{"--rates: a sweep needs an open-loop workload"};
                c.sweep = ebf::SweepConfig{rates, parallel};
            }
            if (!c.sweep) throw ConfigFailure{config + ": no sweep section and no --rates"};
            if (parallel) c.sweep->parallel = true;
            running = true;
            const auto rep = ebf::orchestrate(c);
            emit(rep, c, out);
            return finish(rep);
        }
        if (*serve) {
            auto c = load(config);
            std::shared_ptr<const ebf::Pipeline> pipeline;
            try {
                pipeline = std::make_shared<const ebf::Pipeline>(c.topology);
                if (!c.topology.find(component)) throw ebf::Error(ebf::ErrorCode::UnknownNodeId, "'" + component + "'");
            } catch (const ebf::Error& e) {
                throw ConfigFailure{e.what()};
            }
            ebf::net::ServiceOptions opts;
            if (!listen.empty()) {
                try {
                    opts.listen = ebf::net::parse_address(listen);
                } catch (const ebf::Error& e) {
                    throw ConfigFailure{std::string("--listen: ") + e.what()};
                }
            } else if (auto it = c.network.addresses.find(component); it != c.network.addresses.end()) {
                opts.listen = it->second;
            } else {
                throw ConfigFailure{"no --listen and no network.addresses entry for '" + component + "'"};
            }
            opts.downstreams = c.network.addresses;
            opts.call_timeout = c.network.timeout;
            opts.seed = c.seed;
            running = true;
            ebf::net::serve_component(pipeline, component, opts);
            return ok;
        }
        if (*drive) {
            auto c = load(config);
            ebf::net::Address addr;
            try {
                addr = ebf::net::parse_address(entry);
            } catch (const ebf::Error& e) {
                throw ConfigFailure{std::string("--entry: ") + e.what()};
            }
            c.mode = ebf::RunMode::network;
            c.network.addresses[c.topology.entry] = addr;
            running = true;
            const auto rep = ebf::orchestrate(c);
            emit(rep, c, out);
            return finish(rep);
        }
        if (*predict) {
            if (!config.empty()) {
                const auto c = load(config);
                running = true;
                const auto rep = ebf::predict_only(c);
                emit(rep, c, out);
                return ok;
            }
            if (lambdas.empty() || mu <= 0.0) throw ConfigFailure{"predict: give --lambda and --mu, or --config"};
            running = true;
            std::cout << fmt::format("{:>12} {:>12} {:>14} {:>14}\n", "lambda/s", "mu/s", "mean_ms", fmt::format("p{}_ms", pct));
            int rc = ok;
            for (double l : lambdas) {
                try {
                    const auto p = ebf::predict_mm1(l, mu, pct);
                    std::cout << fmt::format("{:>12.4f} {:>12.4f} {:>14.4f} {:>14.4f}\n", l, mu, p.t_mean.count() * 1e3,
                                             p.t_p.count() * 1e3);
                } catch (const ebf::Error& e) {
                    std::cout << fmt::format("{:>12.4f} {:>12.4f} {:>14} {:>14}  {}\n", l, mu, "-", "-", e.what());
                    rc = runtime_error;
                }
            }
            return rc;
        }
        if (*tradeoff) {
            ebf::TrainerConfig t;
            try {
                t = ebf::parse_policy(slurp(policy));
            } catch (const ebf::Error& e) {
                throw ConfigFailure{policy + ": " + e.what()};
            }
            running = true;
            const auto records = ebf::evaluate_policy(t.policy, t.horizon, t.per_update_cost, t.candidates, t.weight);
            std::cout << fmt::format("{:>12} {:>8} {:>12} {:>10} {:>10} {:>10} {:>9}\n", "interval_s", "updates", "cost_s",
                                     "overhead", "gain", "objective", "feasible");
            for (const auto& r : records)
                std::cout << fmt::format("{:>12.3f} {:>8} {:>12.3f} {:>10.5f} {:>10.5f} {:>10.5f} {:>9}\n",
                                         ebf::to_seconds(r.interval), r.updates, ebf::to_seconds(r.total_cost),
                                         r.overhead_fraction, r.gain, r.objective, r.feasible ? "yes" : "no");
            try {
                std::cout << fmt::format("chosen interval: {:.3f} s\n", ebf::to_seconds(ebf::choose_interval(records, t.max_interval)));
            } catch (const ebf::Error& e) {
                std::cout << "chosen interval: none (" << e.what() << ")\n";
            }
            if (!out.empty()) {
                nlohmann::json j{{"tool", {{"name", "ebf"}, {"version", std::string(ebf::tool_version())}}}};
                nlohmann::json recs = nlohmann::json::array();
                for (const auto& r : records) recs.push_back(ebf::to_json(r));
                j["trainer"] = {{"records", recs}};
                ebf::write_file_atomic(out, j.dump(2) + "\n");
            }
            return ok;
        }
        if (*krun) {
            ebf::RunConfig c;
            if (!config.empty()) {
                c = load(config);
                if (c.kernels.empty()) throw ConfigFailure{config + ": no kernels listed"};
            } else {
                if (kname.empty()) throw ConfigFailure{"kernels run: give --name or --config"};
                try {
                    ebf::kernels::parse_kernel(kname);
                } catch (const ebf::Error& e) {
                    throw ConfigFailure{e.what()};
                }
                c.seed = kseed;
                c.kernels.push_back({kname, kshape.empty() ? std::vector<std::size_t>{} : parse_shape(kshape), kreps, kprec == "f64"});
            }
            running = true;
            const auto rep = ebf::kernels_only(c);
            for (const auto& k : rep.json["kernels"]) std::cerr << k.dump() << "\n";
            if (out.empty()) {
                std::cout << rep.json.dump(2) << "\n";
                return ok;
            }
            // Append to an existing report when there is one.
            nlohmann::json target = rep.json;
            if (std::ifstream in(out); in) {
                try {
                    nlohmann::json existing = nlohmann::json::parse(in);
                    auto& ks = existing["kernels"];
                    if (!ks.is_array()) ks = nlohmann::json::array();
                    for (const auto& k : rep.json["kernels"]) ks.push_back(k);
                    auto& ts = existing["timing"]["kernels"];
                    if (!ts.is_array()) ts = nlohmann::json::array();
                    for (const auto& k : rep.json["timing"]["kernels"]) ts.push_back(k);
                    target = std::move(existing);
                } catch (const nlohmann::json::exception& e) {
                    throw ebf::Error(ebf::ErrorCode::Io, out + " is not a JSON report: " + e.what());
                }
            }
            ebf::write_file_atomic(out, target.dump(2) + "\n");
            return ok;
        }
        if (*report) {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(slurp(report_path));
            } catch (const nlohmann::json::exception& e) {
                throw ConfigFailure{report_path + ": " + e.what()};
            }
            std::cout << ebf::render_report(j);
            return ok;
        }
    } catch (const ConfigFailure& f) {
        spdlog::error("{}", f.message);
        return config_error;
    } catch (const ebf::Error& e) {
        spdlog::error("{}", e.what());
        return running ? runtime_error : config_error;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return runtime_error;
    }
    return ok;
}
