// SPDX-License-Identifier: Apache-2.0
#include "ebf/net/socket.hpp"

#include <cerrno>
#include <charconv>
#include <cstring>

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include "ebf/error.hpp"

namespace ebf::net {

Address parse_address(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size())
        throw Error(ErrorCode::ConstraintViolation, "address '" + std::string(text) + "' must be host:port");
    unsigned port = 0;
    const auto digits = text.substr(colon + 1);
    const auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
    if (ec != std::errc{} || p != digits.data() + digits.size() || port > 65535)
        throw Error(ErrorCode::ConstraintViolation, "address '" + std::string(text) + "' has an invalid port");
    return Address{std::string(text.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

std::string to_string(const Address& a) { return a.host + ":" + std::to_string(a.port); }

Socket& Socket::operator=(Socket&& o) noexcept {
    if (this != &o) {
        close();
        fd_ = o.release();
    }
    return *this;
}

void Socket::close() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
}

void Socket::shutdown() noexcept {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

namespace {

sockaddr_in resolve(const Address& a, ErrorCode code) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string host = a.host.empty() ? "0.0.0.0" : a.host;
    if (const int rc = ::getaddrinfo(host.c_str(), nullptr, &hints, &res); rc != 0 || !res)
        throw Error(code, "cannot resolve '" + host + "': " + ::gai_strerror(rc));
    sockaddr_in sa{};
    std::memcpy(&sa, res->ai_addr, sizeof(sa));
    ::freeaddrinfo(res);
    sa.sin_port = htons(a.port);
    return sa;
}

}  // namespace

void set_nodelay(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

Socket listen_tcp(const Address& addr, int backlog) {
    const sockaddr_in sa = resolve(addr, ErrorCode::Io);
    Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!s.valid()) throw Error(ErrorCode::Io, std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(s.fd(), reinterpret_cast<const sockaddr*>(&sa), sizeof(sa)) != 0)
        throw Error(ErrorCode::Io, "bind " + to_string(addr) + ": " + std::strerror(errno));
    if (::listen(s.fd(), backlog) != 0) throw Error(ErrorCode::Io, std::string("listen: ") + std::strerror(errno));
    return s;
}

std::uint16_t local_port(const Socket& s) {
    sockaddr_in sa{};
    socklen_t len = sizeof(sa);
    ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&sa), &len);
    return ntohs(sa.sin_port);
}

Socket connect_tcp(const Address& addr, Nanos timeout) {
    const sockaddr_in sa = resolve(addr, ErrorCode::ConnectFailed);
    Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!s.valid()) throw Error(ErrorCode::ConnectFailed, std::string("socket: ") + std::strerror(errno));
    const int flags = ::fcntl(s.fd(), F_GETFL, 0);
    ::fcntl(s.fd(), F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(s.fd(), reinterpret_cast<const sockaddr*>(&sa), sizeof(sa));
    if (rc != 0 && errno != EINPROGRESS)
        throw Error(ErrorCode::ConnectFailed, to_string(addr) + ": " + std::strerror(errno));
    if (rc != 0) {
        pollfd p{s.fd(), POLLOUT, 0};
        const auto ms = std::max<std::int64_t>(1, std::chrono::duration_cast<std::chrono::milliseconds>(timeout).count());
        rc = ::poll(&p, 1, static_cast<int>(ms));
        if (rc == 0) throw Error(ErrorCode::ConnectFailed, to_string(addr) + ": connect timed out");
        int err = 0;
        socklen_t len = sizeof(err);
        ::getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
        if (rc < 0 || err != 0)
            throw Error(ErrorCode::ConnectFailed, to_string(addr) + ": " + std::strerror(err ? err : errno));
    }
    ::fcntl(s.fd(), F_SETFL, flags);
    set_nodelay(s.fd());
    return s;
}

}  // namespace ebf::net
