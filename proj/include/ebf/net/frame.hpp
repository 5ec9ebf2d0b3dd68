// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ebf/core/types.hpp"

namespace ebf::net {

inline constexpr std::array<std::uint8_t, 4> kMagic{'E', 'B', 'F', '1'};
inline constexpr std::uint8_t kVersion = 1;

/// magic(4) version(1) type(1) request_id(8) class(1) payload_len(4)
inline constexpr std::size_t kHeaderSize = 19;
/// component hash(8) enqueue(8) start(8) end(8)
inline constexpr std::size_t kRecordSize = 32;

inline constexpr std::uint32_t kMaxPayload = 16u << 20;
inline constexpr std::uint32_t kMaxRecords = 1u << 16;

enum class MsgType : std::uint8_t { request = 1, response = 2, forward = 3, health = 4 };

struct TimestampRecord {
    std::uint64_t component = 0;  // fnv1a64 of the component id
    std::int64_t enqueue = 0;     // monotonic nanoseconds
    std::int64_t start = 0;
    std::int64_t end = 0;
    bool operator==(const TimestampRecord&) const = default;
};

/// Wire layout (all integers big-endian):
///   header | payload | record_count(4) | record_count * record
struct Frame {
    MsgType type = MsgType::request;
    std::uint64_t request_id = 0;
    std::uint8_t cls = 0;
    std::vector<std::uint8_t> payload;
    std::vector<TimestampRecord> timestamps;
    bool operator==(const Frame&) const = default;
};

std::vector<std::uint8_t> encode(const Frame& frame);

/// Parses exactly one frame occupying all of `bytes`. Throws FrameCorrupt.
Frame decode(std::span<const std::uint8_t> bytes);

struct HeaderInfo {
    MsgType type;
    std::uint64_t request_id;
    std::uint8_t cls;
    std::uint32_t payload_len;
};

/// Validates magic, version, type and length. Throws FrameCorrupt.
HeaderInfo decode_header(std::span<const std::uint8_t, kHeaderSize> header);

/// Reads one frame from a stream socket. Returns nullopt on a clean EOF
/// before the first byte; throws FrameCorrupt on malformed input and
/// DownstreamUnreachable on a mid-frame disconnect.
std::optional<Frame> read_frame(int fd);

/// Throws DownstreamUnreachable when the peer is gone.
void write_frame(int fd, const Frame& frame);

// Response payload: status byte (0 ok, 1 error) followed by either a
// result block or an error message.

struct ResponseBody {
    bool ok = true;
    std::string error;
    bool quota_unreachable = false;
    std::optional<double> quality;
};

std::vector<std::uint8_t> encode_response(const ResponseBody& body);
ResponseBody decode_response(std::span<const std::uint8_t> payload);

}  // namespace ebf::net
