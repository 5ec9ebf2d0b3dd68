// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ebf/time.hpp"

namespace ebf {

enum class ComponentKind : std::uint8_t { ai, non_ai };
enum class Discipline : std::uint8_t { fifo };
enum class RequestClass : std::uint8_t { text = 0, image = 1 };

/// How a networked service spends its sampled service time.
enum class WorkMode : std::uint8_t { sleep, spin, kernel };

// --- service-time models -------------------------------------------------

struct Deterministic {
    Nanos value{};
    bool operator==(const Deterministic&) const = default;
};

struct Exponential {
    double rate = 1.0;  // per second
    bool operator==(const Exponential&) const = default;
};

/// ln(duration in seconds) ~ Normal(location, scale^2).
struct Lognormal {
    double location = 0.0;
    double scale = 1.0;
    bool operator==(const Lognormal&) const = default;
};

/// shift + Pareto(shape, scale); mean = shift + shape*scale/(shape-1).
struct ShiftedPareto {
    double shape = 2.0;
    Nanos scale{};
    Nanos shift{};
    bool operator==(const ShiftedPareto&) const = default;
};

/// Resampled uniformly from a recorded list of durations.
struct Empirical {
    std::string file;
    std::vector<Nanos> samples;
    bool operator==(const Empirical&) const = default;
};

using ServiceTimeModel = std::variant<Deterministic, Exponential, Lognormal, ShiftedPareto, Empirical>;

/// Analytic mean of a service-time model in seconds.
double mean_seconds(const ServiceTimeModel& model);

struct QualityAttr {
    std::string metric;
    double target = 1.0;
    std::optional<double> achieved;  // defaults to target when absent
    bool operator==(const QualityAttr&) const = default;

    double achieved_or_target() const noexcept { return achieved.value_or(target); }
};

/// Optional real CPU work executed by a networked service instead of sleeping.
struct KernelWork {
    std::string name;
    std::vector<std::size_t> shape;
    bool operator==(const KernelWork&) const = default;
};

struct ComponentSpec {
    std::string id;
    ComponentKind kind = ComponentKind::non_ai;
    std::uint32_t servers = 1;
    Discipline discipline = Discipline::fifo;
    ServiceTimeModel service = Deterministic{};
    std::optional<QualityAttr> quality;
    WorkMode work = WorkMode::sleep;
    std::optional<KernelWork> kernel;
    bool operator==(const ComponentSpec&) const = default;
};

// --- composition ---------------------------------------------------------

enum class ExprKind : std::uint8_t { ref, seq, par, branch, tiered };
enum class BranchMode : std::uint8_t { probability, by_class };

/// Number of results a tier returns per probe.
struct YieldModel {
    enum class Dist : std::uint8_t { deterministic, poisson, uniform };
    Dist dist = Dist::deterministic;
    double a = 0.0;  // value | mean | min
    double b = 0.0;  // unused | unused | max
    bool operator==(const YieldModel&) const = default;
};

struct Tier {
    std::string component;
    YieldModel yield;
    /// Share of the catalogue held by this tier; documentation only, tiers may overlap.
    std::optional<double> data_fraction;
    bool operator==(const Tier&) const = default;
};

/// One node of the composition tree. `ref` names either a component or a
/// named module; composites carry their children.
struct Expr {
    ExprKind kind = ExprKind::ref;
    std::string ref;
    std::vector<Expr> children;
    BranchMode branch_mode = BranchMode::probability;
    std::vector<double> weights;  // probability branches, parallel to children
    std::vector<Tier> tiers;
    std::uint32_t quota = 0;
    bool operator==(const Expr&) const = default;

    static Expr reference(std::string id) {
        Expr e;
        e.ref = std::move(id);
        return e;
    }
    static Expr seq(std::vector<Expr> children) { return composite(ExprKind::seq, std::move(children)); }
    static Expr par(std::vector<Expr> children) { return composite(ExprKind::par, std::move(children)); }
    static Expr branch(std::vector<double> weights, std::vector<Expr> children) {
        Expr e = composite(ExprKind::branch, std::move(children));
        e.weights = std::move(weights);
        return e;
    }
    static Expr by_class(Expr text, Expr image) {
        Expr e = composite(ExprKind::branch, {std::move(text), std::move(image)});
        e.branch_mode = BranchMode::by_class;
        return e;
    }
    static Expr tiered(std::vector<Tier> tiers, std::uint32_t quota) {
        Expr e;
        e.kind = ExprKind::tiered;
        e.tiers = std::move(tiers);
        e.quota = quota;
        return e;
    }

  private:
    static Expr composite(ExprKind kind, std::vector<Expr> children) {
        Expr e;
        e.kind = kind;
        e.children = std::move(children);
        return e;
    }
};

struct Topology {
    std::vector<ComponentSpec> components;
    std::map<std::string, Expr> modules;
    Expr pipeline;
    std::string entry;
    bool operator==(const Topology&) const = default;

    const ComponentSpec* find(std::string_view id) const;
};

// --- traces --------------------------------------------------------------

enum class SpanKind : std::uint8_t { leaf, seq, par, branch, tiered };

/// For leaves `id` is the component id; for composites it is the module
/// name, or empty for anonymous combinators.
struct Span {
    std::string id;
    SpanKind kind = SpanKind::leaf;
    Nanos enqueue{};
    Nanos start{};
    Nanos end{};
    std::vector<Span> children;
    bool operator==(const Span&) const = default;

    Nanos latency() const noexcept { return end - enqueue; }
    Nanos service() const noexcept { return end - start; }
};

struct RequestTrace {
    std::uint64_t request_id = 0;
    RequestClass cls = RequestClass::text;
    Nanos arrival{};     // scheduled (intended) send time
    Nanos sent{};        // actual send time; equals arrival in simulation
    Nanos completion{};
    Span root;
    std::optional<double> quality_achieved;
    bool quota_unreachable = false;
    bool operator==(const RequestTrace&) const = default;
};

std::string_view to_string(ComponentKind k) noexcept;
std::string_view to_string(RequestClass c) noexcept;
std::string_view to_string(SpanKind k) noexcept;
std::string_view to_string(WorkMode m) noexcept;

}  // namespace ebf
