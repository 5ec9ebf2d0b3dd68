// SPDX-License-Identifier: Apache-2.0
#include "ebf/core/topology.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ebf/error.hpp"

namespace ebf {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

void check_component(const ComponentSpec& c) {
    auto fail = [&](const std::string& why) { throw Error(ErrorCode::InvalidComponent, "component '" + c.id + "': " + why); };
    if (c.id.empty()) throw Error(ErrorCode::InvalidComponent, "component with empty id");
    if (c.servers < 1) fail("servers must be >= 1");
    std::visit(overloaded{
                   [&](const Deterministic& d) {
                       if (d.value <= Nanos::zero()) fail("deterministic duration must be > 0");
                   },
                   [&](const Exponential& e) {
                       if (!(e.rate > 0.0) || !std::isfinite(e.rate)) fail("exponential rate must be > 0");
                   },
                   [&](const Lognormal& l) {
                       if (!std::isfinite(l.location) || !(l.scale > 0.0) || !std::isfinite(l.scale))
                           fail("lognormal needs finite location and scale > 0");
                   },
                   [&](const ShiftedPareto& p) {
                       if (!(p.shape > 1.0)) fail("pareto shape must be > 1 for a finite mean");
                       if (p.scale <= Nanos::zero()) fail("pareto scale must be > 0");
                       if (p.shift < Nanos::zero()) fail("pareto shift must be >= 0");
                   },
                   [&](const Empirical& e) {
                       if (e.samples.empty()) fail("empirical sample set '" + e.file + "' is empty");
                       for (Nanos s : e.samples)
                           if (s <= Nanos::zero()) fail("empirical samples must be > 0");
                   },
               },
               c.service);
    if (c.quality) {
        if (!(c.quality->target > 0.0 && c.quality->target <= 1.0)) fail("quality target must lie in (0, 1]");
        if (c.quality->achieved && !(*c.quality->achieved >= 0.0 && *c.quality->achieved <= 1.0))
            fail("achieved quality must lie in [0, 1]");
    }
    if (c.work == WorkMode::kernel && !c.kernel) fail("work mode 'kernel' requires a kernel section");
}

void check_yield(const Tier& t) {
    const auto& y = t.yield;
    auto fail = [&](const std::string& why) {
        throw Error(ErrorCode::ConstraintViolation, "tier '" + t.component + "' yield: " + why);
    };
    if (y.a < 0.0 || !std::isfinite(y.a)) fail("parameters must be finite and >= 0");
    if (y.dist == YieldModel::Dist::uniform && y.b < y.a) fail("uniform max below min");
}

class Checker {
  public:
    explicit Checker(const Topology& t) : topo_(t) {
        for (const auto& c : t.components) components_.insert(c.id);
    }

    void module(const std::string& name) {
        if (done_.contains(name)) return;
        auto on_stack = std::find(stack_.begin(), stack_.end(), name);
        if (on_stack != stack_.end()) {
            std::string path;
            for (auto it = on_stack; it != stack_.end(); ++it) path += *it + " -> ";
            throw Error(ErrorCode::CycleDetected, path + name);
        }
        stack_.push_back(name);
        expr(topo_.modules.at(name), "module '" + name + "'");
        stack_.pop_back();
        done_.insert(name);
    }

    void expr(const Expr& e, const std::string& where) {
        switch (e.kind) {
            case ExprKind::ref:
                if (components_.contains(e.ref)) return;
                if (topo_.modules.contains(e.ref)) return module(e.ref);
                throw Error(ErrorCode::UnknownNodeId, "'" + e.ref + "' referenced from " + where);
            case ExprKind::seq:
            case ExprKind::par:
                if (e.children.empty()) throw Error(ErrorCode::EmptyTopology, "empty combinator in " + where);
                break;
            case ExprKind::branch:
                if (e.children.empty()) throw Error(ErrorCode::EmptyTopology, "empty branch in " + where);
                if (e.branch_mode == BranchMode::by_class) {
                    if (e.children.size() != 2)
                        throw Error(ErrorCode::ConstraintViolation, "class branch in " + where + " needs text and image arms");
                } else {
                    if (e.weights.size() != e.children.size())
                        throw Error(ErrorCode::BranchWeightSumInvalid, "branch in " + where + " has " +
                                                                          std::to_string(e.weights.size()) + " weights for " +
                                                                          std::to_string(e.children.size()) + " arms");
                    double sum = 0.0;
                    for (double w : e.weights) {
                        if (!(w >= 0.0) || !std::isfinite(w))
                            throw Error(ErrorCode::BranchWeightSumInvalid, "negative weight in branch in " + where);
                        sum += w;
                    }
                    if (std::abs(sum - 1.0) > kBranchWeightTolerance)
                        throw Error(ErrorCode::BranchWeightSumInvalid,
                                    "branch in " + where + " weights sum to " + std::to_string(sum));
                }
                break;
            case ExprKind::tiered:
                if (e.tiers.empty()) throw Error(ErrorCode::EmptyTopology, "tiered search without tiers in " + where);
                if (e.quota < 1) throw Error(ErrorCode::ConstraintViolation, "tiered quota must be >= 1 in " + where);
                for (const auto& t : e.tiers) {
                    if (!components_.contains(t.component))
                        throw Error(ErrorCode::UnknownNodeId, "tier '" + t.component + "' in " + where);
                    check_yield(t);
                }
                return;
        }
        for (const auto& c : e.children) expr(c, where);
    }

  private:
    const Topology& topo_;
    std::set<std::string> components_;
    std::vector<std::string> stack_;
    std::set<std::string> done_;
};

PlanNode compile(const Topology& t, const Expr& e, const std::unordered_map<std::string, std::size_t>& index) {
    PlanNode node;
    switch (e.kind) {
        case ExprKind::ref: {
            if (auto it = index.find(e.ref); it != index.end()) {
                node.kind = SpanKind::leaf;
                node.label = e.ref;
                node.station = it->second;
                return node;
            }
            const Expr& body = t.modules.at(e.ref);
            if (body.kind == ExprKind::ref) {
                node.kind = SpanKind::seq;
                node.children.push_back(compile(t, body, index));
            } else {
                node = compile(t, body, index);
            }
            node.label = e.ref;
            return node;
        }
        case ExprKind::seq: node.kind = SpanKind::seq; break;
        case ExprKind::par: node.kind = SpanKind::par; break;
        case ExprKind::branch: {
            node.kind = SpanKind::branch;
            node.branch_mode = e.branch_mode;
            double acc = 0.0;
            for (double w : e.weights) {
                acc += w;
                node.cumulative_weights.push_back(acc);
            }
            if (!node.cumulative_weights.empty()) node.cumulative_weights.back() = 1.0;
            break;
        }
        case ExprKind::tiered:
            node.kind = SpanKind::tiered;
            node.quota = e.quota;
            for (const auto& tier : e.tiers) node.tiers.push_back({index.at(tier.component), tier.yield});
            return node;
    }
    for (const auto& c : e.children) node.children.push_back(compile(t, c, index));
    return node;
}

const Expr* leftmost_component(const Topology& t, const Expr& e) {
    switch (e.kind) {
        case ExprKind::ref:
            if (t.find(e.ref)) return &e;
            return leftmost_component(t, t.modules.at(e.ref));
        case ExprKind::tiered: return nullptr;
        default: return e.children.empty() ? nullptr : leftmost_component(t, e.children.front());
    }
}

}  // namespace

Topology validate_topology(Topology raw) {
    if (raw.components.empty()) throw Error(ErrorCode::EmptyTopology, "topology declares no components");

    std::set<std::string> ids;
    for (const auto& c : raw.components) {
        check_component(c);
        if (!ids.insert(c.id).second) throw Error(ErrorCode::InvalidComponent, "duplicate component id '" + c.id + "'");
    }
    for (const auto& [name, _] : raw.modules) {
        if (name.empty()) throw Error(ErrorCode::ConstraintViolation, "module with empty name");
        if (ids.contains(name))
            throw Error(ErrorCode::ConstraintViolation, "module '" + name + "' collides with a component id");
    }

    Checker checker(raw);
    for (const auto& [name, _] : raw.modules) checker.module(name);
    checker.expr(raw.pipeline, "pipeline");

    if (raw.entry.empty()) {
        const Expr* first = leftmost_component(raw, raw.pipeline);
        if (!first) throw Error(ErrorCode::ConstraintViolation, "pipeline has no leading component to use as entry");
        raw.entry = first->ref;
    } else if (!ids.contains(raw.entry)) {
        throw Error(ErrorCode::UnknownNodeId, "entry '" + raw.entry + "'");
    }

    std::sort(raw.components.begin(), raw.components.end(),
              [](const ComponentSpec& a, const ComponentSpec& b) { return a.id < b.id; });
    return raw;
}

Pipeline::Pipeline(Topology validated) : topology_(std::move(validated)) {
    for (std::size_t i = 0; i < topology_.components.size(); ++i) index_.emplace(topology_.components[i].id, i);
    root_ = compile(topology_, topology_.pipeline, index_);
    entry_ = index_.at(topology_.entry);
}

std::size_t Pipeline::station_index(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) throw Error(ErrorCode::NodeNotFound, std::string(id));
    return it->second;
}

const PlanNode& first_leaf(const PlanNode& node) {
    if (node.kind == SpanKind::leaf || node.children.empty()) return node;
    return first_leaf(node.children.front());
}

}  // namespace ebf
