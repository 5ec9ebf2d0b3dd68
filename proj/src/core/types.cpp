// SPDX-License-Identifier: Apache-2.0
#include "ebf/core/types.hpp"

#include <algorithm>
#include <cmath>

namespace ebf {

namespace {
template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
}  // namespace

double mean_seconds(const ServiceTimeModel& model) {
    return std::visit(
        overloaded{
            [](const Deterministic& d) { return to_seconds(d.value); },
            [](const Exponential& e) { return 1.0 / e.rate; },
            [](const Lognormal& l) { return std::exp(l.location + 0.5 * l.scale * l.scale); },
            [](const ShiftedPareto& p) {
                return to_seconds(p.shift) + p.shape * to_seconds(p.scale) / (p.shape - 1.0);
            },
            [](const Empirical& e) {
                if (e.samples.empty()) return 0.0;
                double sum = 0.0;
                for (Nanos s : e.samples) sum += to_seconds(s);
                return sum / static_cast<double>(e.samples.size());
            },
        },
        model);
}

const ComponentSpec* Topology::find(std::string_view id) const {
    auto it = std::find_if(components.begin(), components.end(), [&](const ComponentSpec& c) { return c.id == id; });
    return it == components.end() ? nullptr : &*it;
}

std::string_view to_string(ComponentKind k) noexcept { return k == ComponentKind::ai ? "ai" : "non_ai"; }

std::string_view to_string(RequestClass c) noexcept { return c == RequestClass::text ? "text" : "image"; }

std::string_view to_string(SpanKind k) noexcept {
    switch (k) {
        case SpanKind::leaf: return "leaf";
        case SpanKind::seq: return "seq";
        case SpanKind::par: return "par";
        case SpanKind::branch: return "branch";
        case SpanKind::tiered: return "tiered";
    }
    return "leaf";
}

std::string_view to_string(WorkMode m) noexcept {
    switch (m) {
        case WorkMode::sleep: return "sleep";
        case WorkMode::spin: return "spin";
        case WorkMode::kernel: return "kernel";
    }
    return "sleep";
}

}  // namespace ebf
