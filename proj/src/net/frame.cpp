// SPDX-License-Identifier: Apache-2.0
#include "ebf/net/frame.hpp"

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cstring>

#include <sys/socket.h>
#include <unistd.h>

#include "ebf/error.hpp"

namespace ebf::net {

namespace {

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
    static_assert(std::is_unsigned_v<T>);
    for (int shift = (sizeof(T) - 1) * 8; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

template <class T>
std::uint8_t* put_at(std::uint8_t* p, T v) {
    for (int shift = (sizeof(T) - 1) * 8; shift >= 0; shift -= 8) *p++ = static_cast<std::uint8_t>(v >> shift);
    return p;
}

template <class T>
T get(const std::uint8_t* p) {
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v = static_cast<T>((v << 8) | p[i]);
    return v;
}

[[noreturn]] void corrupt(const std::string& why) { throw Error(ErrorCode::FrameCorrupt, why); }

bool valid_type(std::uint8_t t) { return t >= 1 && t <= 4; }

TimestampRecord get_record(const std::uint8_t* p) {
    return TimestampRecord{get<std::uint64_t>(p), static_cast<std::int64_t>(get<std::uint64_t>(p + 8)),
                           static_cast<std::int64_t>(get<std::uint64_t>(p + 16)),
                           static_cast<std::int64_t>(get<std::uint64_t>(p + 24))};
}

/// False on EOF before any byte was read.
bool read_exact(int fd, std::uint8_t* buf, std::size_t n, bool eof_ok) {
    std::size_t got = 0;
    while (got < n) {
        const ssize_t r = ::recv(fd, buf + got, n - got, 0);
        if (r > 0) {
            got += static_cast<std::size_t>(r);
            continue;
        }
        if (r < 0 && errno == EINTR) continue;
        if (got == 0 && eof_ok) return false;
        throw Error(ErrorCode::DownstreamUnreachable, r == 0 ? "connection closed mid-frame" : std::strerror(errno));
    }
    return true;
}

}  // namespace

std::vector<std::uint8_t> encode(const Frame& f) {
    if (f.payload.size() > kMaxPayload) corrupt("payload exceeds limit");
    if (f.timestamps.size() > kMaxRecords) corrupt("too many timestamp records");
    std::vector<std::uint8_t> out(kHeaderSize + f.payload.size() + 4 + f.timestamps.size() * kRecordSize);
    std::uint8_t* p = std::copy(kMagic.begin(), kMagic.end(), out.data());
    *p++ = kVersion;
    *p++ = static_cast<std::uint8_t>(f.type);
    p = put_at<std::uint64_t>(p, f.request_id);
    *p++ = f.cls;
    p = put_at<std::uint32_t>(p, static_cast<std::uint32_t>(f.payload.size()));
    if (!f.payload.empty()) p = std::copy(f.payload.begin(), f.payload.end(), p);
    p = put_at<std::uint32_t>(p, static_cast<std::uint32_t>(f.timestamps.size()));
    for (const auto& r : f.timestamps) {
        p = put_at<std::uint64_t>(p, r.component);
        p = put_at<std::uint64_t>(p, static_cast<std::uint64_t>(r.enqueue));
        p = put_at<std::uint64_t>(p, static_cast<std::uint64_t>(r.start));
        p = put_at<std::uint64_t>(p, static_cast<std::uint64_t>(r.end));
    }
    return out;
}

HeaderInfo decode_header(std::span<const std::uint8_t, kHeaderSize> h) {
    if (!std::equal(kMagic.begin(), kMagic.end(), h.begin())) corrupt("bad magic");
    if (h[4] != kVersion) corrupt("unsupported version " + std::to_string(h[4]));
    if (!valid_type(h[5])) corrupt("unknown message type " + std::to_string(h[5]));
    HeaderInfo info{static_cast<MsgType>(h[5]), get<std::uint64_t>(h.data() + 6), h[14], get<std::uint32_t>(h.data() + 15)};
    if (info.payload_len > kMaxPayload) corrupt("payload length " + std::to_string(info.payload_len) + " exceeds limit");
    return info;
}

Frame decode(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeaderSize + 4) corrupt("truncated frame");
    const HeaderInfo h = decode_header(bytes.first<kHeaderSize>());
    std::size_t pos = kHeaderSize;
    if (bytes.size() < pos + h.payload_len + 4) corrupt("payload length exceeds frame");
    Frame f;
    f.type = h.type;
    f.request_id = h.request_id;
    f.cls = h.cls;
    f.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                     bytes.begin() + static_cast<std::ptrdiff_t>(pos + h.payload_len));
    pos += h.payload_len;
    const std::uint32_t count = get<std::uint32_t>(bytes.data() + pos);
    pos += 4;
    if (count > kMaxRecords) corrupt("too many timestamp records");
    if (bytes.size() != pos + static_cast<std::size_t>(count) * kRecordSize) corrupt("timestamp section length mismatch");
    f.timestamps.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i, pos += kRecordSize) f.timestamps.push_back(get_record(bytes.data() + pos));
    return f;
}

std::optional<Frame> read_frame(int fd) {
    std::array<std::uint8_t, kHeaderSize> header{};
    if (!read_exact(fd, header.data(), header.size(), true)) return std::nullopt;
    const HeaderInfo h = decode_header(header);
    Frame f;
    f.type = h.type;
    f.request_id = h.request_id;
    f.cls = h.cls;
    f.payload.resize(h.payload_len);
    if (h.payload_len) read_exact(fd, f.payload.data(), h.payload_len, false);
    std::array<std::uint8_t, 4> cnt{};
    read_exact(fd, cnt.data(), 4, false);
    const auto count = get<std::uint32_t>(cnt.data());
    if (count > kMaxRecords) corrupt("too many timestamp records");
    std::vector<std::uint8_t> recs(static_cast<std::size_t>(count) * kRecordSize);
    if (!recs.empty()) read_exact(fd, recs.data(), recs.size(), false);
    f.timestamps.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) f.timestamps.push_back(get_record(recs.data() + i * kRecordSize));
    return f;
}

void write_frame(int fd, const Frame& frame) {
    const auto bytes = encode(frame);
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        const ssize_t w = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
        if (w > 0) {
            sent += static_cast<std::size_t>(w);
        } else if (w < 0 && errno == EINTR) {
            continue;
        } else {
            throw Error(ErrorCode::DownstreamUnreachable, std::string("send failed: ") + std::strerror(errno));
        }
    }
}

std::vector<std::uint8_t> encode_response(const ResponseBody& b) {
    std::vector<std::uint8_t> out;
    if (!b.ok) {
        out.push_back(1);
        out.insert(out.end(), b.error.begin(), b.error.end());
        return out;
    }
    out.push_back(0);
    out.push_back(static_cast<std::uint8_t>((b.quota_unreachable ? 1 : 0) | (b.quality ? 2 : 0)));
    if (b.quality) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(*b.quality));
    return out;
}

ResponseBody decode_response(std::span<const std::uint8_t> p) {
    ResponseBody b;
    if (p.empty()) corrupt("empty response payload");
    if (p[0] == 1) {
        b.ok = false;
        b.error.assign(p.begin() + 1, p.end());
        return b;
    }
    if (p[0] != 0) corrupt("unknown response status " + std::to_string(p[0]));
    if (p.size() < 2) corrupt("response flags missing");
    b.quota_unreachable = (p[1] & 1) != 0;
    if (p[1] & 2) {
        if (p.size() < 10) corrupt("truncated quality field");
        b.quality = std::bit_cast<double>(get<std::uint64_t>(p.data() + 2));
    }
    return b;
}

}  // namespace ebf::net
