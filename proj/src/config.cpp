// SPDX-License-Identifier: Apache-2.0
#include "ebf/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include "ebf/core/topology.hpp"
#include "ebf/error.hpp"

namespace ebf {

std::string_view to_string(RunMode m) noexcept { return m == RunMode::simulate ? "simulate" : "network"; }

namespace {

// --- reading helpers -------------------------------------------------------

[[noreturn]] void violation(const std::string& path, const std::string& why) {
    throw Error(ErrorCode::ConstraintViolation, (path.empty() ? std::string("<root>") : path) + ": " + why);
}

[[noreturn]] void unknown(const std::string& path, const std::string& what = {}) {
    throw Error(ErrorCode::UnknownKey, path + (what.empty() ? "" : " ('" + what + "')"));
}

std::string key_path(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
}

std::string index_path(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void expect_map(const YAML::Node& n, const std::string& path) {
    if (!n.IsMap()) violation(path, "expected a mapping");
}

void allow_keys(const YAML::Node& n, const std::string& path, std::initializer_list<std::string_view> keys) {
    expect_map(n, path);
    for (const auto& kv : n) {
        const auto k = kv.first.as<std::string>();
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) unknown(key_path(path, k));
    }
}

std::string text(const YAML::Node& n, const std::string& path) {
    if (!n.IsScalar()) violation(path, "expected a string");
    return n.as<std::string>();
}

double number(const YAML::Node& n, const std::string& path) {
    if (!n.IsScalar()) violation(path, "expected a number");
    try {
        const double v = n.as<double>();
        if (!std::isfinite(v)) violation(path, "expected a finite number");
        return v;
    } catch (const YAML::BadConversion&) {
        violation(path, "expected a number, got '" + n.as<std::string>() + "'");
    }
}

std::uint64_t integer(const YAML::Node& n, const std::string& path) {
    if (!n.IsScalar()) violation(path, "expected a non-negative integer");
    const auto s = n.as<std::string>();
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) violation(path, "expected a non-negative integer, got '" + s + "'");
    return v;
}

bool boolean(const YAML::Node& n, const std::string& path) {
    if (!n.IsScalar()) violation(path, "expected true or false");
    try {
        return n.as<bool>();
    } catch (const YAML::BadConversion&) {
        violation(path, "expected true or false");
    }
}

double positive(const YAML::Node& n, const std::string& path) {
    const double v = number(n, path);
    if (!(v > 0.0)) violation(path, "must be > 0");
    return v;
}

double non_negative(const YAML::Node& n, const std::string& path) {
    const double v = number(n, path);
    if (!(v >= 0.0)) violation(path, "must be >= 0");
    return v;
}

template <class F>
auto each(const YAML::Node& n, const std::string& path, F f) {
    if (!n.IsSequence()) violation(path, "expected a list");
    for (std::size_t i = 0; i < n.size(); ++i) f(n[i], index_path(path, i));
}

// --- topology --------------------------------------------------------------

ServiceTimeModel parse_service(const YAML::Node& n, const std::string& path, const std::filesystem::path& base) {
    expect_map(n, path);
    if (!n["dist"]) violation(path, "missing 'dist'");
    const std::string dist = text(n["dist"], key_path(path, "dist"));
    if (dist == "deterministic") {
        allow_keys(n, path, {"dist", "ms"});
        return Deterministic{from_ms(non_negative(n["ms"], key_path(path, "ms")))};
    }
    if (dist == "exponential") {
        allow_keys(n, path, {"dist", "rate"});
        return Exponential{positive(n["rate"], key_path(path, "rate"))};
    }
    if (dist == "lognormal") {
        allow_keys(n, path, {"dist", "location", "scale"});
        return Lognormal{number(n["location"], key_path(path, "location")), non_negative(n["scale"], key_path(path, "scale"))};
    }
    if (dist == "shifted_pareto") {
        allow_keys(n, path, {"dist", "shape", "scale_ms", "shift_ms"});
        ShiftedPareto p;
        p.shape = positive(n["shape"], key_path(path, "shape"));
        p.scale = from_ms(positive(n["scale_ms"], key_path(path, "scale_ms")));
        p.shift = n["shift_ms"] ? from_ms(non_negative(n["shift_ms"], key_path(path, "shift_ms"))) : Nanos::zero();
        return p;
    }
    if (dist == "empirical") {
        allow_keys(n, path, {"dist", "file"});
        Empirical e;
        e.file = text(n["file"], key_path(path, "file"));
        const std::filesystem::path file = std::filesystem::path(e.file).is_absolute() ? std::filesystem::path(e.file) : base / e.file;
        std::ifstream in(file);
        if (!in) violation(key_path(path, "file"), "cannot open '" + file.string() + "'");
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
            double ms = 0;
            std::istringstream ss(line);
            if (!(ss >> ms) || !(ms >= 0.0))
                violation(key_path(path, "file"), file.string() + ":" + std::to_string(lineno) + ": expected a non-negative ms value");
            e.samples.push_back(from_ms(ms));
        }
        if (e.samples.empty()) violation(key_path(path, "file"), "no samples in '" + file.string() + "'");
        return e;
    }
    unknown(key_path(path, "dist"), dist);
}

YieldModel parse_yield(const YAML::Node& n, const std::string& path) {
    expect_map(n, path);
    const std::string dist = text(n["dist"], key_path(path, "dist"));
    YieldModel y;
    if (dist == "deterministic") {
        allow_keys(n, path, {"dist", "value"});
        y.dist = YieldModel::Dist::deterministic;
        y.a = non_negative(n["value"], key_path(path, "value"));
    } else if (dist == "poisson") {
        allow_keys(n, path, {"dist", "mean"});
        y.dist = YieldModel::Dist::poisson;
        y.a = non_negative(n["mean"], key_path(path, "mean"));
    } else if (dist == "uniform") {
        allow_keys(n, path, {"dist", "min", "max"});
        y.dist = YieldModel::Dist::uniform;
        y.a = non_negative(n["min"], key_path(path, "min"));
        y.b = non_negative(n["max"], key_path(path, "max"));
        if (y.b < y.a) violation(path, "max must be >= min");
    } else {
        unknown(key_path(path, "dist"), dist);
    }
    return y;
}

Expr parse_expr(const YAML::Node& n, const std::string& path) {
    if (n.IsScalar()) return Expr::reference(n.as<std::string>());
    expect_map(n, path);
    if (n.size() != 1) violation(path, "a combinator has exactly one of seq, par, branch, tiered");
    const auto key = n.begin()->first.as<std::string>();
    const YAML::Node body = n.begin()->second;
    const std::string here = key_path(path, key);
    auto list = [&] {
        std::vector<Expr> kids;
        each(body, here, [&](const YAML::Node& c, const std::string& p) { kids.push_back(parse_expr(c, p)); });
        return kids;
    };
    if (key == "seq") return Expr::seq(list());
    if (key == "par") return Expr::par(list());
    if (key == "branch") {
        expect_map(body, here);
        if (body["by"]) {
            allow_keys(body, here, {"by", "text", "image"});
            const auto by = text(body["by"], key_path(here, "by"));
            if (by != "class") unknown(key_path(here, "by"), by);
            if (!body["text"] || !body["image"]) violation(here, "class branch needs 'text' and 'image'");
            return Expr::by_class(parse_expr(body["text"], key_path(here, "text")),
                                  parse_expr(body["image"], key_path(here, "image")));
        }
        allow_keys(body, here, {"weights", "arms"});
        std::vector<double> weights;
        each(body["weights"], key_path(here, "weights"),
             [&](const YAML::Node& w, const std::string& p) { weights.push_back(number(w, p)); });
        std::vector<Expr> arms;
        each(body["arms"], key_path(here, "arms"),
             [&](const YAML::Node& a, const std::string& p) { arms.push_back(parse_expr(a, p)); });
        return Expr::branch(std::move(weights), std::move(arms));
    }
    if (key == "tiered") {
        allow_keys(body, here, {"quota", "tiers"});
        const auto quota = integer(body["quota"], key_path(here, "quota"));
        std::vector<Tier> tiers;
        each(body["tiers"], key_path(here, "tiers"), [&](const YAML::Node& t, const std::string& p) {
            allow_keys(t, p, {"component", "yield", "data_fraction"});
            Tier tier;
            tier.component = text(t["component"], key_path(p, "component"));
            tier.yield = parse_yield(t["yield"], key_path(p, "yield"));
            if (t["data_fraction"]) tier.data_fraction = non_negative(t["data_fraction"], key_path(p, "data_fraction"));
            tiers.push_back(std::move(tier));
        });
        return Expr::tiered(std::move(tiers), static_cast<std::uint32_t>(quota));
    }
    unknown(here);
}

ComponentSpec parse_component(const YAML::Node& n, const std::string& path, const std::filesystem::path& base) {
    allow_keys(n, path, {"id", "kind", "servers", "discipline", "service", "quality", "work", "kernel"});
    ComponentSpec c;
    c.id = text(n["id"], key_path(path, "id"));
    if (n["kind"]) {
        const auto k = text(n["kind"], key_path(path, "kind"));
        if (k == "ai") c.kind = ComponentKind::ai;
        else if (k == "non_ai") c.kind = ComponentKind::non_ai;
        else unknown(key_path(path, "kind"), k);
    }
    if (n["servers"]) {
        const auto s = integer(n["servers"], key_path(path, "servers"));
        if (s < 1 || s > 4096) violation(key_path(path, "servers"), "must lie in [1, 4096]");
        c.servers = static_cast<std::uint32_t>(s);
    }
    if (n["discipline"]) {
        const auto d = text(n["discipline"], key_path(path, "discipline"));
        if (d != "fifo") unknown(key_path(path, "discipline"), d);
    }
    if (!n["service"]) violation(path, "missing 'service'");
    c.service = parse_service(n["service"], key_path(path, "service"), base);
    if (n["quality"]) {
        const std::string qp = key_path(path, "quality");
        allow_keys(n["quality"], qp, {"metric", "target", "achieved"});
        QualityAttr q;
        q.metric = text(n["quality"]["metric"], key_path(qp, "metric"));
        q.target = positive(n["quality"]["target"], key_path(qp, "target"));
        if (n["quality"]["achieved"]) q.achieved = non_negative(n["quality"]["achieved"], key_path(qp, "achieved"));
        c.quality = q;
    }
    if (n["work"]) {
        const auto w = text(n["work"], key_path(path, "work"));
        if (w == "sleep") c.work = WorkMode::sleep;
        else if (w == "spin") c.work = WorkMode::spin;
        else if (w == "kernel") c.work = WorkMode::kernel;
        else unknown(key_path(path, "work"), w);
    }
    if (n["kernel"]) {
        const std::string kp = key_path(path, "kernel");
        allow_keys(n["kernel"], kp, {"name", "shape"});
        KernelWork k;
        k.name = text(n["kernel"]["name"], key_path(kp, "name"));
        try {
            kernels::parse_kernel(k.name);
        } catch (const Error&) {
            unknown(key_path(kp, "name"), k.name);
        }
        if (n["kernel"]["shape"])
            each(n["kernel"]["shape"], key_path(kp, "shape"), [&](const YAML::Node& d, const std::string& p) {
                const auto v = integer(d, p);
                if (v < 1) violation(p, "dimensions must be >= 1");
                k.shape.push_back(v);
            });
        c.kernel = k;
    }
    if (c.work == WorkMode::kernel && !c.kernel) violation(key_path(path, "work"), "kernel work needs a 'kernel' block");
    return c;
}

Topology parse_topology(const YAML::Node& n, const std::filesystem::path& base) {
    const std::string path = "topology";
    allow_keys(n, path, {"components", "modules", "pipeline", "entry"});
    Topology t;
    if (!n["components"]) violation(path, "missing 'components'");
    each(n["components"], "topology.components",
         [&](const YAML::Node& c, const std::string& p) { t.components.push_back(parse_component(c, p, base)); });
    if (n["modules"]) {
        expect_map(n["modules"], "topology.modules");
        for (const auto& kv : n["modules"]) {
            const auto name = kv.first.as<std::string>();
            t.modules.emplace(name, parse_expr(kv.second, key_path("topology.modules", name)));
        }
    }
    if (!n["pipeline"]) violation(path, "missing 'pipeline'");
    t.pipeline = parse_expr(n["pipeline"], "topology.pipeline");
    if (n["entry"]) t.entry = text(n["entry"], "topology.entry");
    return validate_topology(std::move(t));
}

// --- other sections --------------------------------------------------------

WorkloadSpec parse_workload(const YAML::Node& n, bool have_sweep) {
    const std::string path = "workload";
    allow_keys(n, path, {"mode", "rate", "users", "think_time_ms", "fraction_text", "warmup_s", "stop"});
    WorkloadSpec w;
    const auto mode = text(n["mode"], "workload.mode");
    if (mode == "open_loop") w.mode = LoopMode::open_loop;
    else if (mode == "closed_loop") w.mode = LoopMode::closed_loop;
    else unknown("workload.mode", mode);
    if (n["rate"]) w.rate = positive(n["rate"], "workload.rate");
    if (w.mode == LoopMode::open_loop && !n["rate"] && !have_sweep) violation("workload.rate", "open loop needs a rate or a sweep");
    if (n["users"]) {
        const auto u = integer(n["users"], "workload.users");
        if (u < 1 || u > 1'000'000) violation("workload.users", "must lie in [1, 1000000]");
        w.users = static_cast<std::uint32_t>(u);
    }
    if (n["think_time_ms"]) w.think_time_mean = from_ms(positive(n["think_time_ms"], "workload.think_time_ms"));
    if (w.mode == LoopMode::closed_loop && (!n["users"] || !n["think_time_ms"]))
        violation(path, "closed loop needs 'users' and 'think_time_ms'");
    w.fraction_text = 1.0;
    if (n["fraction_text"]) {
        w.fraction_text = number(n["fraction_text"], "workload.fraction_text");
        if (!(w.fraction_text >= 0.0 && w.fraction_text <= 1.0)) violation("workload.fraction_text", "must lie in [0, 1]");
    }
    if (n["warmup_s"]) w.warmup = from_seconds(non_negative(n["warmup_s"], "workload.warmup_s"));
    if (!n["stop"]) violation(path, "missing 'stop'");
    allow_keys(n["stop"], "workload.stop", {"requests", "duration_s"});
    if (n["stop"].size() != 1) violation("workload.stop", "give exactly one of 'requests' or 'duration_s'");
    if (n["stop"]["requests"]) w.stop = StopCondition::requests(integer(n["stop"]["requests"], "workload.stop.requests"));
    else w.stop = StopCondition::for_duration(from_seconds(positive(n["stop"]["duration_s"], "workload.stop.duration_s")));
    return w;
}

AnalyticsConfig parse_analytics(const YAML::Node& n) {
    allow_keys(n, "analytics", {"percentiles", "histogram_cap", "latency_bound_ms", "slo_p99_ms", "amplification"});
    AnalyticsConfig a;
    if (n["percentiles"]) {
        a.percentiles.clear();
        each(n["percentiles"], "analytics.percentiles", [&](const YAML::Node& p, const std::string& path) {
            const double v = number(p, path);
            if (!(v > 0.0 && v <= 100.0)) violation(path, "percentile must lie in (0, 100]");
            a.percentiles.push_back(v);
        });
    }
    if (n["histogram_cap"]) a.histogram_cap = integer(n["histogram_cap"], "analytics.histogram_cap");
    if (n["latency_bound_ms"]) a.latency_bound = from_ms(positive(n["latency_bound_ms"], "analytics.latency_bound_ms"));
    if (n["slo_p99_ms"]) a.slo_p99 = from_ms(positive(n["slo_p99_ms"], "analytics.slo_p99_ms"));
    if (n["amplification"])
        each(n["amplification"], "analytics.amplification",
             [&](const YAML::Node& id, const std::string& p) { a.amplification.push_back(text(id, p)); });
    return a;
}

QueuingConfig parse_queuing(const YAML::Node& n) {
    allow_keys(n, "queuing", {"mu", "percentile"});
    QueuingConfig q;
    if (!n["mu"]) violation("queuing", "missing 'mu'");
    if (n["mu"].IsScalar() && n["mu"].as<std::string>() == "saturation") {
        q.saturation = true;
    } else {
        q.mu = positive(n["mu"], "queuing.mu");
    }
    if (n["percentile"]) {
        q.percentile = number(n["percentile"], "queuing.percentile");
        if (!(q.percentile > 0.0 && q.percentile < 100.0)) violation("queuing.percentile", "must lie in (0, 100)");
    }
    return q;
}

TrainerConfig parse_trainer(const YAML::Node& n, const Topology& topo) {
    allow_keys(n, "trainer", {"mode", "interval_s", "curve", "base_accuracy", "candidates_s", "per_update_cost_s",
                              "horizon_s", "weight", "max_interval_s", "station"});
    TrainerConfig t;
    if (n["mode"]) {
        const auto m = text(n["mode"], "trainer.mode");
        if (m == "batch") t.policy.mode = UpdateMode::batch;
        else if (m == "streaming") t.policy.mode = UpdateMode::streaming;
        else unknown("trainer.mode", m);
    }
    t.policy.interval = from_seconds(positive(n["interval_s"], "trainer.interval_s"));
    each(n["curve"], "trainer.curve", [&](const YAML::Node& pt, const std::string& p) {
        allow_keys(pt, p, {"overhead", "gain"});
        t.policy.curve.push_back({non_negative(pt["overhead"], key_path(p, "overhead")), non_negative(pt["gain"], key_path(p, "gain"))});
    });
    if (n["base_accuracy"]) t.policy.base_accuracy = number(n["base_accuracy"], "trainer.base_accuracy");
    try {
        validate_policy(t.policy);
    } catch (const Error& e) {
        violation("trainer", e.what());
    }
    if (n["candidates_s"]) {
        each(n["candidates_s"], "trainer.candidates_s",
             [&](const YAML::Node& c, const std::string& p) { t.candidates.push_back(from_seconds(positive(c, p))); });
    } else {
        t.candidates.push_back(t.policy.interval);
    }
    t.per_update_cost = from_seconds(non_negative(n["per_update_cost_s"], "trainer.per_update_cost_s"));
    t.horizon = from_seconds(positive(n["horizon_s"], "trainer.horizon_s"));
    if (n["weight"]) t.weight = non_negative(n["weight"], "trainer.weight");
    if (n["max_interval_s"]) t.max_interval = from_seconds(positive(n["max_interval_s"], "trainer.max_interval_s"));
    if (n["station"]) {
        t.station = text(n["station"], "trainer.station");
        if (!topo.find(*t.station)) violation("trainer.station", "unknown component '" + *t.station + "'");
        if (t.per_update_cost <= Nanos::zero()) violation("trainer.per_update_cost_s", "must be > 0 when a station is given");
    }
    return t;
}

SweepConfig parse_sweep(const YAML::Node& n) {
    allow_keys(n, "sweep", {"rates", "parallel"});
    SweepConfig s;
    each(n["rates"], "sweep.rates", [&](const YAML::Node& r, const std::string& p) {
        const double v = positive(r, p);
        if (!s.rates.empty() && !(v > s.rates.back())) violation(p, "sweep rates must be strictly increasing");
        s.rates.push_back(v);
    });
    if (s.rates.empty()) violation("sweep.rates", "at least one rate");
    if (n["parallel"]) s.parallel = boolean(n["parallel"], "sweep.parallel");
    return s;
}

NetworkConfig parse_network(const YAML::Node& n, const Topology& topo) {
    allow_keys(n, "network", {"addresses", "timeout_ms"});
    NetworkConfig c;
    if (n["addresses"]) {
        expect_map(n["addresses"], "network.addresses");
        for (const auto& kv : n["addresses"]) {
            const auto id = kv.first.as<std::string>();
            const std::string p = key_path("network.addresses", id);
            if (!topo.find(id)) unknown(p);
            try {
                c.addresses.emplace(id, net::parse_address(text(kv.second, p)));
            } catch (const Error& e) {
                violation(p, e.what());
            }
        }
    }
    if (n["timeout_ms"]) c.timeout = from_ms(positive(n["timeout_ms"], "network.timeout_ms"));
    return c;
}

OutputConfig parse_output(const YAML::Node& n) {
    allow_keys(n, "output", {"report", "traces", "breakdown_csv"});
    OutputConfig o;
    if (n["report"]) o.report = text(n["report"], "output.report");
    if (n["traces"]) o.traces = text(n["traces"], "output.traces");
    if (n["breakdown_csv"]) o.breakdown_csv = text(n["breakdown_csv"], "output.breakdown_csv");
    return o;
}

std::vector<KernelRun> parse_kernels(const YAML::Node& n) {
    std::vector<KernelRun> out;
    each(n, "kernels", [&](const YAML::Node& k, const std::string& p) {
        allow_keys(k, p, {"name", "shape", "reps", "precision"});
        KernelRun r;
        r.name = text(k["name"], key_path(p, "name"));
        try {
            kernels::parse_kernel(r.name);
        } catch (const Error&) {
            unknown(key_path(p, "name"), r.name);
        }
        if (k["shape"])
            each(k["shape"], key_path(p, "shape"), [&](const YAML::Node& d, const std::string& dp) {
                const auto v = integer(d, dp);
                if (v < 1) violation(dp, "dimensions must be >= 1");
                r.shape.push_back(v);
            });
        if (k["reps"]) {
            r.reps = integer(k["reps"], key_path(p, "reps"));
            if (r.reps < 1) violation(key_path(p, "reps"), "must be >= 1");
        }
        if (k["precision"]) {
            const auto prec = text(k["precision"], key_path(p, "precision"));
            if (prec == "f64") r.f64 = true;
            else if (prec != "f32") unknown(key_path(p, "precision"), prec);
        }
        out.push_back(std::move(r));
    });
    return out;
}

// --- writing helpers -------------------------------------------------------

std::string num(double v) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, p);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

std::string ms(Nanos d) { return num(to_ms(d)); }
std::string secs(Nanos d) { return num(to_seconds(d)); }

void emit_service(YAML::Emitter& out, const ServiceTimeModel& m) {
    out << YAML::BeginMap;
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Deterministic>) {
                out << YAML::Key << "dist" << YAML::Value << "deterministic" << YAML::Key << "ms" << YAML::Value << ms(s.value);
            } else if constexpr (std::is_same_v<T, Exponential>) {
                out << YAML::Key << "dist" << YAML::Value << "exponential" << YAML::Key << "rate" << YAML::Value << num(s.rate);
            } else if constexpr (std::is_same_v<T, Lognormal>) {
                out << YAML::Key << "dist" << YAML::Value << "lognormal" << YAML::Key << "location" << YAML::Value
                    << num(s.location) << YAML::Key << "scale" << YAML::Value << num(s.scale);
            } else if constexpr (std::is_same_v<T, ShiftedPareto>) {
                out << YAML::Key << "dist" << YAML::Value << "shifted_pareto" << YAML::Key << "shape" << YAML::Value
                    << num(s.shape) << YAML::Key << "scale_ms" << YAML::Value << ms(s.scale) << YAML::Key << "shift_ms"
                    << YAML::Value << ms(s.shift);
            } else {
                out << YAML::Key << "dist" << YAML::Value << "empirical" << YAML::Key << "file" << YAML::Value << s.file;
            }
        },
        m);
    out << YAML::EndMap;
}

void emit_yield(YAML::Emitter& out, const YieldModel& y) {
    out << YAML::Flow << YAML::BeginMap;
    switch (y.dist) {
        case YieldModel::Dist::deterministic:
            out << YAML::Key << "dist" << YAML::Value << "deterministic" << YAML::Key << "value" << YAML::Value << num(y.a);
            break;
        case YieldModel::Dist::poisson:
            out << YAML::Key << "dist" << YAML::Value << "poisson" << YAML::Key << "mean" << YAML::Value << num(y.a);
            break;
        case YieldModel::Dist::uniform:
            out << YAML::Key << "dist" << YAML::Value << "uniform" << YAML::Key << "min" << YAML::Value << num(y.a)
                << YAML::Key << "max" << YAML::Value << num(y.b);
            break;
    }
    out << YAML::EndMap;
}

void emit_expr(YAML::Emitter& out, const Expr& e) {
    switch (e.kind) {
        case ExprKind::ref: out << e.ref; return;
        case ExprKind::seq:
        case ExprKind::par:
            out << YAML::BeginMap << YAML::Key << (e.kind == ExprKind::seq ? "seq" : "par") << YAML::Value << YAML::BeginSeq;
            for (const auto& c : e.children) emit_expr(out, c);
            out << YAML::EndSeq << YAML::EndMap;
            return;
        case ExprKind::branch:
            out << YAML::BeginMap << YAML::Key << "branch" << YAML::Value << YAML::BeginMap;
            if (e.branch_mode == BranchMode::by_class) {
                out << YAML::Key << "by" << YAML::Value << "class" << YAML::Key << "text" << YAML::Value;
                emit_expr(out, e.children.at(0));
                out << YAML::Key << "image" << YAML::Value;
                emit_expr(out, e.children.at(1));
            } else {
                out << YAML::Key << "weights" << YAML::Value << YAML::Flow << YAML::BeginSeq;
                for (double w : e.weights) out << num(w);
                out << YAML::EndSeq << YAML::Key << "arms" << YAML::Value << YAML::BeginSeq;
                for (const auto& c : e.children) emit_expr(out, c);
                out << YAML::EndSeq;
            }
            out << YAML::EndMap << YAML::EndMap;
            return;
        case ExprKind::tiered:
            out << YAML::BeginMap << YAML::Key << "tiered" << YAML::Value << YAML::BeginMap;
            out << YAML::Key << "quota" << YAML::Value << e.quota << YAML::Key << "tiers" << YAML::Value << YAML::BeginSeq;
            for (const auto& t : e.tiers) {
                out << YAML::BeginMap << YAML::Key << "component" << YAML::Value << t.component << YAML::Key << "yield"
                    << YAML::Value;
                emit_yield(out, t.yield);
                if (t.data_fraction) out << YAML::Key << "data_fraction" << YAML::Value << num(*t.data_fraction);
                out << YAML::EndMap;
            }
            out << YAML::EndSeq << YAML::EndMap << YAML::EndMap;
            return;
    }
}

}  // namespace

RunConfig parse_config(std::string_view text_in, const std::filesystem::path& base_dir) {
    YAML::Node root;
    try {
        root = YAML::Load(std::string(text_in));
    } catch (const YAML::ParserException& e) {
        throw Error(ErrorCode::SyntaxError, "line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    if (!root || root.IsNull()) throw Error(ErrorCode::SyntaxError, "line 1: empty configuration");
    if (!root.IsMap()) throw Error(ErrorCode::SyntaxError, "line " + std::to_string(root.Mark().line + 1) + ": top level must be a mapping");
    allow_keys(root, "", {"seed", "mode", "topology", "workload", "analytics", "queuing", "trainer", "sweep", "network",
                          "output", "kernels"});

    RunConfig c;
    if (root["seed"]) c.seed = integer(root["seed"], "seed");
    if (root["mode"]) {
        const auto m = text(root["mode"], "mode");
        if (m == "simulate") c.mode = RunMode::simulate;
        else if (m == "network") c.mode = RunMode::network;
        else unknown("mode", m);
    }
    if (!root["topology"]) violation("", "missing 'topology'");
    c.topology = parse_topology(root["topology"], base_dir);
    if (root["sweep"]) c.sweep = parse_sweep(root["sweep"]);
    if (!root["workload"]) violation("", "missing 'workload'");
    c.workload = parse_workload(root["workload"], c.sweep.has_value());
    c.workload.seed = c.seed;
    if (root["analytics"]) c.analytics = parse_analytics(root["analytics"]);
    for (const auto& id : c.analytics.amplification)
        if (!c.topology.find(id) && !c.topology.modules.count(id))
            violation("analytics.amplification", "unknown node '" + id + "'");
    if (root["queuing"]) c.queuing = parse_queuing(root["queuing"]);
    if (root["trainer"]) c.trainer = parse_trainer(root["trainer"], c.topology);
    if (root["network"]) c.network = parse_network(root["network"], c.topology);
    if (root["output"]) c.output = parse_output(root["output"]);
    if (root["kernels"]) c.kernels = parse_kernels(root["kernels"]);
    if (c.sweep && c.workload.mode != LoopMode::open_loop) violation("sweep", "a rate sweep needs an open-loop workload");
    return c;
}

TrainerConfig parse_policy(std::string_view text_in) {
    YAML::Node root;
    try {
        root = YAML::Load(std::string(text_in));
    } catch (const YAML::ParserException& e) {
        throw Error(ErrorCode::SyntaxError, "line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    if (!root || root.IsNull()) throw Error(ErrorCode::SyntaxError, "line 1: empty policy");
    if (!root.IsMap()) throw Error(ErrorCode::SyntaxError, "line " + std::to_string(root.Mark().line + 1) + ": top level must be a mapping");
    if (root["topology"]) {
        auto c = parse_config(text_in);
        if (!c.trainer) violation("", "missing 'trainer'");
        return *c.trainer;
    }
    return parse_trainer(root["trainer"] ? root["trainer"] : root, Topology{});
}

RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read config '" + file.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), file.has_parent_path() ? file.parent_path() : std::filesystem::path("."));
}

std::string serialize_config(const RunConfig& c) {
    YAML::Emitter out;
    out << YAML::BeginMap;
    out << YAML::Key << "seed" << YAML::Value << c.seed;
    out << YAML::Key << "mode" << YAML::Value << std::string(to_string(c.mode));

    out << YAML::Key << "topology" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "entry" << YAML::Value << c.topology.entry;
    out << YAML::Key << "components" << YAML::Value << YAML::BeginSeq;
    for (const auto& comp : c.topology.components) {
        out << YAML::BeginMap;
        out << YAML::Key << "id" << YAML::Value << comp.id;
        out << YAML::Key << "kind" << YAML::Value << std::string(to_string(comp.kind));
        out << YAML::Key << "servers" << YAML::Value << comp.servers;
        out << YAML::Key << "discipline" << YAML::Value << "fifo";
        out << YAML::Key << "service" << YAML::Value;
        emit_service(out, comp.service);
        if (comp.quality) {
            out << YAML::Key << "quality" << YAML::Value << YAML::BeginMap;
            out << YAML::Key << "metric" << YAML::Value << comp.quality->metric;
            out << YAML::Key << "target" << YAML::Value << num(comp.quality->target);
            if (comp.quality->achieved) out << YAML::Key << "achieved" << YAML::Value << num(*comp.quality->achieved);
            out << YAML::EndMap;
        }
        out << YAML::Key << "work" << YAML::Value << std::string(to_string(comp.work));
        if (comp.kernel) {
            out << YAML::Key << "kernel" << YAML::Value << YAML::BeginMap;
            out << YAML::Key << "name" << YAML::Value << comp.kernel->name;
            if (!comp.kernel->shape.empty()) out << YAML::Key << "shape" << YAML::Value << YAML::Flow << comp.kernel->shape;
            out << YAML::EndMap;
        }
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    if (!c.topology.modules.empty()) {
        out << YAML::Key << "modules" << YAML::Value << YAML::BeginMap;
        for (const auto& [name, e] : c.topology.modules) {
            out << YAML::Key << name << YAML::Value;
            emit_expr(out, e);
        }
        out << YAML::EndMap;
    }
    out << YAML::Key << "pipeline" << YAML::Value;
    emit_expr(out, c.topology.pipeline);
    out << YAML::EndMap;

    const auto& w = c.workload;
    out << YAML::Key << "workload" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "mode" << YAML::Value << (w.mode == LoopMode::open_loop ? "open_loop" : "closed_loop");
    if (w.rate > 0.0) out << YAML::Key << "rate" << YAML::Value << num(w.rate);
    if (w.mode == LoopMode::closed_loop) {
        out << YAML::Key << "users" << YAML::Value << w.users;
        out << YAML::Key << "think_time_ms" << YAML::Value << ms(w.think_time_mean);
    }
    out << YAML::Key << "fraction_text" << YAML::Value << num(w.fraction_text);
    out << YAML::Key << "warmup_s" << YAML::Value << secs(w.warmup);
    out << YAML::Key << "stop" << YAML::Value << YAML::Flow << YAML::BeginMap;
    if (w.stop.kind == StopCondition::Kind::request_count) out << YAML::Key << "requests" << YAML::Value << w.stop.count;
    else out << YAML::Key << "duration_s" << YAML::Value << secs(w.stop.duration);
    out << YAML::EndMap << YAML::EndMap;

    const auto& a = c.analytics;
    out << YAML::Key << "analytics" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "percentiles" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (double p : a.percentiles) out << num(p);
    out << YAML::EndSeq;
    out << YAML::Key << "histogram_cap" << YAML::Value << a.histogram_cap;
    if (a.latency_bound) out << YAML::Key << "latency_bound_ms" << YAML::Value << ms(*a.latency_bound);
    if (a.slo_p99) out << YAML::Key << "slo_p99_ms" << YAML::Value << ms(*a.slo_p99);
    if (!a.amplification.empty()) out << YAML::Key << "amplification" << YAML::Value << YAML::Flow << a.amplification;
    out << YAML::EndMap;

    if (c.queuing.enabled()) {
        out << YAML::Key << "queuing" << YAML::Value << YAML::BeginMap << YAML::Key << "mu" << YAML::Value;
        if (c.queuing.saturation) out << "saturation";
        else out << num(*c.queuing.mu);
        out << YAML::Key << "percentile" << YAML::Value << num(c.queuing.percentile) << YAML::EndMap;
    }
    if (c.trainer) {
        const auto& t = *c.trainer;
        out << YAML::Key << "trainer" << YAML::Value << YAML::BeginMap;
        out << YAML::Key << "mode" << YAML::Value << (t.policy.mode == UpdateMode::batch ? "batch" : "streaming");
        out << YAML::Key << "interval_s" << YAML::Value << secs(t.policy.interval);
        out << YAML::Key << "curve" << YAML::Value << YAML::BeginSeq;
        for (const auto& pt : t.policy.curve)
            out << YAML::Flow << YAML::BeginMap << YAML::Key << "overhead" << YAML::Value << num(pt.overhead) << YAML::Key
                << "gain" << YAML::Value << num(pt.gain) << YAML::EndMap;
        out << YAML::EndSeq;
        out << YAML::Key << "base_accuracy" << YAML::Value << num(t.policy.base_accuracy);
        out << YAML::Key << "candidates_s" << YAML::Value << YAML::Flow << YAML::BeginSeq;
        for (Nanos cand : t.candidates) out << secs(cand);
        out << YAML::EndSeq;
        out << YAML::Key << "per_update_cost_s" << YAML::Value << secs(t.per_update_cost);
        out << YAML::Key << "horizon_s" << YAML::Value << secs(t.horizon);
        out << YAML::Key << "weight" << YAML::Value << num(t.weight);
        if (t.max_interval) out << YAML::Key << "max_interval_s" << YAML::Value << secs(*t.max_interval);
        if (t.station) out << YAML::Key << "station" << YAML::Value << *t.station;
        out << YAML::EndMap;
    }
    if (c.sweep) {
        out << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
        out << YAML::Key << "rates" << YAML::Value << YAML::Flow << YAML::BeginSeq;
        for (double r : c.sweep->rates) out << num(r);
        out << YAML::EndSeq << YAML::Key << "parallel" << YAML::Value << c.sweep->parallel << YAML::EndMap;
    }
    out << YAML::Key << "network" << YAML::Value << YAML::BeginMap;
    if (!c.network.addresses.empty()) {
        out << YAML::Key << "addresses" << YAML::Value << YAML::BeginMap;
        for (const auto& [id, addr] : c.network.addresses) out << YAML::Key << id << YAML::Value << net::to_string(addr);
        out << YAML::EndMap;
    }
    out << YAML::Key << "timeout_ms" << YAML::Value << ms(c.network.timeout) << YAML::EndMap;

    const auto& o = c.output;
    if (!o.report.empty() || !o.traces.empty() || !o.breakdown_csv.empty()) {
        out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
        if (!o.report.empty()) out << YAML::Key << "report" << YAML::Value << o.report;
        if (!o.traces.empty()) out << YAML::Key << "traces" << YAML::Value << o.traces;
        if (!o.breakdown_csv.empty()) out << YAML::Key << "breakdown_csv" << YAML::Value << o.breakdown_csv;
        out << YAML::EndMap;
    }
    if (!c.kernels.empty()) {
        out << YAML::Key << "kernels" << YAML::Value << YAML::BeginSeq;
        for (const auto& k : c.kernels) {
            out << YAML::BeginMap << YAML::Key << "name" << YAML::Value << k.name;
            if (!k.shape.empty()) out << YAML::Key << "shape" << YAML::Value << YAML::Flow << k.shape;
            out << YAML::Key << "reps" << YAML::Value << k.reps;
            out << YAML::Key << "precision" << YAML::Value << (k.f64 ? "f64" : "f32") << YAML::EndMap;
        }
        out << YAML::EndSeq;
    }
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

std::string config_hash(const RunConfig& config) {
    const std::string canon = serialize_config(config);
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(canon.data(), canon.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorCode::Io, "SHA-256 digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xF]);
    }
    return out;
}

}  // namespace ebf
