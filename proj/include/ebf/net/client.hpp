// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>

#include "ebf/net/frame.hpp"
#include "ebf/net/socket.hpp"

namespace ebf::net {

/// One TCP connection carrying many outstanding calls, matched to their
/// responses by request_id. Reconnects lazily after the peer goes away.
class MuxClient {
  public:
    /// Receives the response, or nullopt plus a reason when the connection
    /// dropped first. Runs on the reader thread.
    using Callback = std::function<void(std::optional<Frame>, const std::string& error)>;

    MuxClient(Address peer, Nanos connect_timeout);
    ~MuxClient();
    MuxClient(const MuxClient&) = delete;
    MuxClient& operator=(const MuxClient&) = delete;

    /// Throws ConnectFailed; afterwards `cb` is invoked exactly once unless
    /// the call is cancelled.
    void send(const Frame& frame, Callback cb);

    /// Blocking call. Throws ConnectFailed, DownstreamUnreachable or Timeout.
    Frame call(const Frame& frame, Nanos timeout);

    /// Forgets a pending call; a late response is dropped.
    void cancel(std::uint64_t request_id);

    const Address& peer() const noexcept { return peer_; }

  private:
    void ensure_connected();  // requires mu_
    void reader_loop(int fd);

    Address peer_;
    Nanos connect_timeout_;
    std::mutex mu_;
    std::mutex write_mu_;
    Socket sock_;
    bool alive_ = false;
    std::uint64_t generation_ = 0;  // written under both locks
    std::thread reader_;
    std::unordered_map<std::uint64_t, Callback> pending_;
};

}  // namespace ebf::net
