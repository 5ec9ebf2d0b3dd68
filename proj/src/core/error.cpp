// SPDX-License-Identifier: Apache-2.0
#include "ebf/error.hpp"

namespace ebf {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::CycleDetected: return "CycleDetected";
        case ErrorCode::UnknownNodeId: return "UnknownNodeId";
        case ErrorCode::BranchWeightSumInvalid: return "BranchWeightSumInvalid";
        case ErrorCode::EmptyTopology: return "EmptyTopology";
        case ErrorCode::InvalidComponent: return "InvalidComponent";
        case ErrorCode::MalformedSpanTree: return "MalformedSpanTree";
        case ErrorCode::InvalidRate: return "InvalidRate";
        case ErrorCode::InvalidWorkload: return "InvalidWorkload";
        case ErrorCode::EmptySamples: return "EmptySamples";
        case ErrorCode::NodeNotFound: return "NodeNotFound";
        case ErrorCode::ZeroComponentTail: return "ZeroComponentTail";
        case ErrorCode::MissingQualityData: return "MissingQualityData";
        case ErrorCode::EmptySweep: return "EmptySweep";
        case ErrorCode::NoneSustains: return "NoneSustains";
        case ErrorCode::UnstableSystem: return "UnstableSystem";
        case ErrorCode::InvalidPercentile: return "InvalidPercentile";
        case ErrorCode::MismatchedSettings: return "MismatchedSettings";
        case ErrorCode::OutOfCurveRange: return "OutOfCurveRange";
        case ErrorCode::NoCandidates: return "NoCandidates";
        case ErrorCode::InvalidPolicy: return "InvalidPolicy";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::UnknownKernel: return "UnknownKernel";
        case ErrorCode::FrameCorrupt: return "FrameCorrupt";
        case ErrorCode::ConnectFailed: return "ConnectFailed";
        case ErrorCode::DownstreamUnreachable: return "DownstreamUnreachable";
        case ErrorCode::Timeout: return "Timeout";
        case ErrorCode::SyntaxError: return "SyntaxError";
        case ErrorCode::UnknownKey: return "UnknownKey";
        case ErrorCode::ConstraintViolation: return "ConstraintViolation";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace ebf
