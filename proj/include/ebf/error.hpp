// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ebf {

enum class ErrorCode {
    // topology / core
    CycleDetected,
    UnknownNodeId,
    BranchWeightSumInvalid,
    EmptyTopology,
    InvalidComponent,
    MalformedSpanTree,
    // workload
    InvalidRate,
    InvalidWorkload,
    // analytics
    EmptySamples,
    NodeNotFound,
    ZeroComponentTail,
    MissingQualityData,
    EmptySweep,
    NoneSustains,
    // queuing
    UnstableSystem,
    InvalidPercentile,
    MismatchedSettings,
    // trainer
    OutOfCurveRange,
    NoCandidates,
    InvalidPolicy,
    // kernels
    ShapeMismatch,
    UnknownKernel,
    // netbench
    FrameCorrupt,
    ConnectFailed,
    DownstreamUnreachable,
    Timeout,
    // config
    SyntaxError,
    UnknownKey,
    ConstraintViolation,
    Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure surfaced by the library carries one of the codes above plus
/// a message naming the offending node, key path or value.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

}  // namespace ebf
