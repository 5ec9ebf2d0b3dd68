// SPDX-License-Identifier: Apache-2.0
#include "ebf/net/client.hpp"

#include <future>

#include <spdlog/spdlog.h>

#include "ebf/error.hpp"

namespace ebf::net {

MuxClient::MuxClient(Address peer, Nanos connect_timeout) : peer_(std::move(peer)), connect_timeout_(connect_timeout) {}

MuxClient::~MuxClient() {
    {
        std::lock_guard lk(mu_);
        sock_.shutdown();
    }
    if (reader_.joinable()) reader_.join();
}

void MuxClient::ensure_connected() {
    if (alive_) return;
    if (reader_.joinable()) reader_.join();  // previous generation has already failed its calls
    Socket fresh = connect_tcp(peer_, connect_timeout_);
    {
        std::lock_guard wl(write_mu_);
        sock_ = std::move(fresh);
        ++generation_;
    }
    alive_ = true;
    reader_ = std::thread([this, fd = sock_.fd()] { reader_loop(fd); });
}

void MuxClient::send(const Frame& frame, Callback cb) {
    std::uint64_t gen = 0;
    {
        std::lock_guard lk(mu_);
        ensure_connected();
        pending_[frame.request_id] = std::move(cb);
        gen = generation_;
    }
    std::lock_guard wl(write_mu_);
    if (gen != generation_) return;  // that connection already failed the call
    try {
        write_frame(sock_.fd(), frame);
    } catch (const Error&) {
        // The reader sees the broken connection and fails every pending call.
        sock_.shutdown();
    }
}

Frame MuxClient::call(const Frame& frame, Nanos timeout) {
    auto result = std::make_shared<std::promise<Frame>>();
    auto fut = result->get_future();
    send(frame, [result](std::optional<Frame> f, const std::string& err) {
        if (f) {
            result->set_value(std::move(*f));
        } else {
            result->set_exception(std::make_exception_ptr(Error(ErrorCode::DownstreamUnreachable, err)));
        }
    });
    if (fut.wait_for(timeout) != std::future_status::ready) {
        cancel(frame.request_id);
        throw Error(ErrorCode::Timeout, "request " + std::to_string(frame.request_id) + " to " + to_string(peer_));
    }
    return fut.get();
}

void MuxClient::cancel(std::uint64_t request_id) {
    std::lock_guard lk(mu_);
    pending_.erase(request_id);
}

void MuxClient::reader_loop(int fd) {
    std::string reason = "connection to " + to_string(peer_) + " closed";
    for (;;) {
        std::optional<Frame> f;
        try {
            f = read_frame(fd);
        } catch (const Error& e) {
            reason = e.what();
            spdlog::debug("client {}: {}", to_string(peer_), e.what());
        }
        if (!f) break;
        Callback cb;
        {
            std::lock_guard lk(mu_);
            auto it = pending_.find(f->request_id);
            if (it == pending_.end()) continue;
            cb = std::move(it->second);
            pending_.erase(it);
        }
        cb(std::move(f), {});
    }
    std::unordered_map<std::uint64_t, Callback> failed;
    {
        std::lock_guard lk(mu_);
        if (sock_.fd() == fd) alive_ = false;
        failed.swap(pending_);
    }
    for (auto& [id, cb] : failed) cb(std::nullopt, reason);
}

}  // namespace ebf::net
