// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "ebf/time.hpp"

namespace ebf::net {

struct Address {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;
    bool operator==(const Address&) const = default;
};

/// "host:port". Throws ConstraintViolation.
Address parse_address(std::string_view text);
std::string to_string(const Address& a);

/// Owning file descriptor.
class Socket {
  public:
    Socket() = default;
    explicit Socket(int fd) noexcept : fd_(fd) {}
    Socket(Socket&& o) noexcept : fd_(o.release()) {}
    Socket& operator=(Socket&& o) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    ~Socket() { close(); }

    int fd() const noexcept { return fd_; }
    bool valid() const noexcept { return fd_ >= 0; }
    int release() noexcept {
        const int f = fd_;
        fd_ = -1;
        return f;
    }
    void close() noexcept;
    /// Wakes any thread blocked reading this socket.
    void shutdown() noexcept;

  private:
    int fd_ = -1;
};

/// Bound, listening socket; port 0 picks an ephemeral port.
Socket listen_tcp(const Address& addr, int backlog = 128);
std::uint16_t local_port(const Socket& s);

void set_nodelay(int fd);

/// Throws ConnectFailed.
Socket connect_tcp(const Address& addr, Nanos timeout);

}  // namespace ebf::net
