// SPDX-License-Identifier: Apache-2.0
#include "ebf/core/trace.hpp"

#include <algorithm>

#include "ebf/error.hpp"

namespace ebf {

namespace {

void check(const Span& s, const std::string& path) {
    const std::string here = path.empty() ? (s.id.empty() ? std::string(to_string(s.kind)) : s.id)
                                          : path + "/" + (s.id.empty() ? std::string(to_string(s.kind)) : s.id);
    if (!(s.enqueue <= s.start && s.start <= s.end))
        throw Error(ErrorCode::MalformedSpanTree, "span " + here + " violates enqueue <= start <= end");
    for (const Span& c : s.children) {
        if (c.enqueue < s.start || c.end > s.end)
            throw Error(ErrorCode::MalformedSpanTree, "child of " + here + " escapes its parent interval");
        check(c, here);
    }
}

}  // namespace

void check_span_tree(const Span& root) { check(root, ""); }

Nanos critical_path(const Span& s) {
    if (s.kind != SpanKind::leaf && s.children.empty()) return Nanos::zero();
    switch (s.kind) {
        case SpanKind::leaf: return s.latency();
        case SpanKind::par: {
            Nanos worst = Nanos::zero();
            for (const Span& c : s.children) worst = std::max(worst, critical_path(c));
            return worst;
        }
        case SpanKind::branch:
            if (s.children.size() != 1)
                throw Error(ErrorCode::MalformedSpanTree, "branch span '" + s.id + "' must have exactly one child");
            return critical_path(s.children.front());
        case SpanKind::seq:
        case SpanKind::tiered: {
            Nanos total = Nanos::zero();
            for (const Span& c : s.children) total += critical_path(c);
            return total;
        }
    }
    return Nanos::zero();
}

Nanos critical_path(const RequestTrace& trace) {
    check_span_tree(trace.root);
    return critical_path(trace.root);
}

}  // namespace ebf
