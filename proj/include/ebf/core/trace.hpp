// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ebf/core/types.hpp"

namespace ebf {

inline Nanos end_to_end_latency(const RequestTrace& trace) noexcept { return trace.completion - trace.arrival; }

/// Latency measured from the actual send rather than the intended one.
inline Nanos send_to_completion(const RequestTrace& trace) noexcept { return trace.completion - trace.sent; }

/// Throws MalformedSpanTree if enqueue <= start <= end fails anywhere or a
/// child interval escapes its parent's [start, end].
void check_span_tree(const Span& root);

/// Sequential combinators (seq, tiered) add their children, par takes the
/// max, branch forwards its single child; a leaf contributes end - enqueue.
Nanos critical_path(const Span& root);
Nanos critical_path(const RequestTrace& trace);

}  // namespace ebf
