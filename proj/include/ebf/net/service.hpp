// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "ebf/core/topology.hpp"
#include "ebf/net/client.hpp"
#include "ebf/net/frame.hpp"
#include "ebf/net/socket.hpp"
#include "ebf/rng.hpp"

namespace ebf::net {

struct ServiceOptions {
    Address listen;
    /// Component id -> address; the entry service needs every other component.
    std::map<std::string, Address> downstreams;
    Nanos call_timeout = std::chrono::seconds(10);
    std::uint64_t seed = 1;
};

/// One component running as a TCP service with `servers` worker threads
/// over a shared FIFO. Every service answers forward frames by running its
/// own work; the entry service additionally accepts request frames and
/// walks the whole plan, forwarding each remote leaf.
class Service {
  public:
    Service(std::shared_ptr<const Pipeline> pipeline, std::string component, ServiceOptions options);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds and starts accepting. Throws Io.
    void start();
    /// Stops accepting, closes connections, waits for in-flight work.
    void stop();

    std::uint16_t port() const noexcept { return port_; }
    bool is_entry() const noexcept { return entry_; }
    const std::string& component() const noexcept { return spec_.id; }

  private:
    struct Conn;
    struct Job {
        Nanos enqueue;
        std::function<void(const TimestampRecord&)> done;
    };

    void accept_loop();
    void connection_loop(std::shared_ptr<Conn> conn);
    void handle(const std::shared_ptr<Conn>& conn, Frame frame);
    void worker_loop();
    void submit(std::function<void(const TimestampRecord&)> done);
    void do_work(Nanos duration);
    void orchestrate(std::shared_ptr<Conn> conn, Frame request);
    void health(const std::shared_ptr<Conn>& conn, const Frame& frame);
    MuxClient& downstream(const std::string& id);

    struct Walk;
    void run_node(const PlanNode& node, Walk& w);
    void run_leaf(std::size_t station, Walk& w);

    std::shared_ptr<const Pipeline> pipeline_;
    ComponentSpec spec_;
    std::size_t station_ = 0;
    bool entry_ = false;
    ServiceOptions options_;
    std::uint16_t port_ = 0;

    Socket listener_;
    std::thread acceptor_;
    std::atomic<bool> stopping_{false};

    std::mutex conn_mu_;
    std::vector<std::shared_ptr<Conn>> conns_;
    std::vector<std::thread> conn_threads_;

    std::mutex q_mu_;
    std::condition_variable q_cv_;
    std::deque<Job> queue_;
    bool workers_stop_ = false;
    std::vector<std::thread> workers_;

    std::mutex rng_mu_;
    Rng service_rng_{0};
    Rng branch_rng_{0};
    Rng yield_rng_{0};

    std::mutex ds_mu_;
    std::map<std::string, std::unique_ptr<MuxClient>> clients_;
    std::atomic<std::uint64_t> next_call_{1};

    std::mutex active_mu_;
    std::condition_variable active_cv_;
    std::size_t active_ = 0;

    struct KernelState;
    std::unique_ptr<KernelState> kernel_;
};

/// Every component of a pipeline served from this process on loopback
/// ephemeral ports, except those listed in `external`. When the entry itself
/// is external nothing is started. Services stop on destruction.
class LocalCluster {
  public:
    LocalCluster(std::shared_ptr<const Pipeline> pipeline, std::map<std::string, Address> external, Nanos call_timeout,
                 std::uint64_t seed);
    ~LocalCluster();
    LocalCluster(const LocalCluster&) = delete;
    LocalCluster& operator=(const LocalCluster&) = delete;

    const Address& address(const std::string& id) const { return addresses_.at(id); }
    const Address& entry() const { return address(entry_); }

  private:
    std::string entry_;
    std::map<std::string, Address> addresses_;
    std::vector<std::unique_ptr<Service>> services_;
};

/// Runs a service until SIGINT/SIGTERM. Blocking.
void serve_component(std::shared_ptr<const Pipeline> pipeline, const std::string& component, const ServiceOptions& options);

}  // namespace ebf::net
