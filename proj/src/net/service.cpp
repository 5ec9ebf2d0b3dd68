// SPDX-License-Identifier: Apache-2.0
#include "ebf/net/service.hpp"

#include <csignal>
#include <future>

#include <poll.h>
#include <sys/socket.h>

#include <spdlog/spdlog.h>

#include "ebf/error.hpp"
#include "ebf/kernels.hpp"
#include "ebf/sim/execution.hpp"

namespace ebf::net {

struct Service::Conn {
    Socket sock;
    std::mutex write_mu;

    void send(const Frame& f) {
        std::lock_guard lk(write_mu);
        try {
            write_frame(sock.fd(), f);
        } catch (const Error& e) {
            spdlog::debug("dropping response {}: {}", f.request_id, e.what());
        }
    }
};

struct Service::KernelState {
    kernels::Inputs<float> inputs;
};

struct Service::Walk {
    RequestClass cls = RequestClass::text;
    std::mutex mu;
    std::vector<TimestampRecord> records;
    std::optional<double> quality;
    bool quota_unreachable = false;
};

Service::Service(std::shared_ptr<const Pipeline> pipeline, std::string component, ServiceOptions options)
    : pipeline_(std::move(pipeline)), options_(std::move(options)) {
    station_ = pipeline_->station_index(component);
    spec_ = pipeline_->stations()[station_];
    entry_ = station_ == pipeline_->entry_station();
    const Rng master(options_.seed);
    service_rng_ = master.substream("service/" + spec_.id);
    branch_rng_ = master.substream("branch");
    yield_rng_ = master.substream("yield");
    if (spec_.work == WorkMode::kernel && spec_.kernel) {
        const auto k = kernels::parse_kernel(spec_.kernel->name);
        const auto shape = spec_.kernel->shape.empty() ? kernels::default_shape(k) : spec_.kernel->shape;
        kernel_ = std::make_unique<KernelState>(KernelState{kernels::make_inputs<float>(k, shape, {}, options_.seed)});
        kernels::compute(kernel_->inputs);  // surfaces ShapeMismatch before serving
    }
}

Service::~Service() { stop(); }

void Service::start() {
    listener_ = listen_tcp(options_.listen);
    port_ = local_port(listener_);
    for (std::uint32_t i = 0; i < spec_.servers; ++i) workers_.emplace_back([this] { worker_loop(); });
    acceptor_ = std::thread([this] { accept_loop(); });
    spdlog::info("{} listening on {}:{} ({} workers{})", spec_.id, options_.listen.host, port_, spec_.servers,
                 entry_ ? ", entry" : "");
}

void Service::stop() {
    if (stopping_.exchange(true)) return;
    if (acceptor_.joinable()) acceptor_.join();
    listener_.close();
    {
        std::lock_guard lk(conn_mu_);
        for (auto& c : conns_) c->sock.shutdown();
    }
    {
        std::unique_lock lk(active_mu_);
        active_cv_.wait(lk, [this] { return active_ == 0; });
    }
    for (auto& t : conn_threads_)
        if (t.joinable()) t.join();
    {
        std::lock_guard lk(q_mu_);
        workers_stop_ = true;
    }
    q_cv_.notify_all();
    for (auto& t : workers_)
        if (t.joinable()) t.join();
    std::lock_guard lk(ds_mu_);
    clients_.clear();
}

void Service::accept_loop() {
    while (!stopping_) {
        pollfd p{listener_.fd(), POLLIN, 0};
        if (::poll(&p, 1, 50) <= 0) continue;
        const int fd = ::accept4(listener_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
        if (fd < 0) continue;
        set_nodelay(fd);
        auto conn = std::make_shared<Conn>();
        conn->sock = Socket(fd);
        std::lock_guard lk(conn_mu_);
        conns_.push_back(conn);
        conn_threads_.emplace_back([this, conn] { connection_loop(conn); });
    }
}

void Service::connection_loop(std::shared_ptr<Conn> conn) {
    for (;;) {
        std::optional<Frame> f;
        try {
            f = read_frame(conn->sock.fd());
        } catch (const Error& e) {
            if (e.code() == ErrorCode::FrameCorrupt) spdlog::warn("{}: closing connection: {}", spec_.id, e.what());
            conn->sock.shutdown();
            return;
        }
        if (!f) return;
        handle(conn, std::move(*f));
    }
}

void Service::handle(const std::shared_ptr<Conn>& conn, Frame frame) {
    switch (frame.type) {
        case MsgType::health: health(conn, frame); break;
        case MsgType::forward:
            submit([conn, id = frame.request_id, cls = frame.cls](const TimestampRecord& rec) {
                conn->send(Frame{MsgType::response, id, cls, encode_response({}), {rec}});
            });
            break;
        case MsgType::request: {
            if (stopping_) break;
            if (!entry_) {
                ResponseBody err{false, "InvalidComponent: " + spec_.id + " is not the entry service", false, {}};
                conn->send(Frame{MsgType::response, frame.request_id, frame.cls, encode_response(err), {}});
                break;
            }
            {
                std::lock_guard lk(active_mu_);
                ++active_;
            }
            std::thread([this, conn, f = std::move(frame)]() mutable { orchestrate(conn, std::move(f)); }).detach();
            break;
        }
        case MsgType::response: spdlog::warn("{}: unexpected response frame {}", spec_.id, frame.request_id); break;
    }
}

void Service::health(const std::shared_ptr<Conn>& conn, const Frame& frame) {
    ResponseBody body;
    if (entry_) {
        for (const auto& c : pipeline_->stations()) {
            if (c.id == spec_.id) continue;
            try {
                const Frame r = downstream(c.id).call(Frame{MsgType::health, next_call_++, 0, {}, {}}, options_.call_timeout);
                const ResponseBody rb = decode_response(r.payload);
                if (!rb.ok) throw Error(ErrorCode::DownstreamUnreachable, rb.error);
            } catch (const Error& e) {
                body = ResponseBody{false, "DownstreamUnreachable: " + c.id + ": " + e.what(), false, {}};
                break;
            }
        }
    }
    conn->send(Frame{MsgType::response, frame.request_id, frame.cls, encode_response(body), {}});
}

void Service::submit(std::function<void(const TimestampRecord&)> done) {
    {
        std::lock_guard lk(q_mu_);
        queue_.push_back(Job{monotonic_now(), std::move(done)});
    }
    q_cv_.notify_one();
}

void Service::worker_loop() {
    const std::uint64_t hash = fnv1a64(spec_.id);
    for (;;) {
        Job job;
        {
            std::unique_lock lk(q_mu_);
            q_cv_.wait(lk, [this] { return !queue_.empty() || workers_stop_; });
            if (queue_.empty()) return;
            job = std::move(queue_.front());
            queue_.pop_front();
        }
        const Nanos start = monotonic_now();
        Nanos d;
        {
            std::lock_guard lk(rng_mu_);
            d = sample_service_time(spec_.service, service_rng_);
        }
        do_work(d);
        const Nanos end = monotonic_now();
        job.done(TimestampRecord{hash, job.enqueue.count(), start.count(), end.count()});
    }
}

void Service::do_work(Nanos d) {
    const Nanos deadline = monotonic_now() + d;
    switch (spec_.work) {
        case WorkMode::sleep: std::this_thread::sleep_for(d); break;
        case WorkMode::kernel:
            if (kernel_) {
                do {
                    auto out = kernels::compute(kernel_->inputs);
                    (void)out;
                } while (monotonic_now() < deadline);
                break;
            }
            [[fallthrough]];
        case WorkMode::spin:
            while (monotonic_now() < deadline) {
            }
            break;
    }
}

MuxClient& Service::downstream(const std::string& id) {
    std::lock_guard lk(ds_mu_);
    auto it = clients_.find(id);
    if (it != clients_.end()) return *it->second;
    auto addr = options_.downstreams.find(id);
    if (addr == options_.downstreams.end())
        throw Error(ErrorCode::DownstreamUnreachable, "no address configured for component '" + id + "'");
    auto& slot = clients_[id];
    slot = std::make_unique<MuxClient>(addr->second, options_.call_timeout);
    return *slot;
}

void Service::run_leaf(std::size_t station, Walk& w) {
    const ComponentSpec& c = pipeline_->stations()[station];
    std::vector<TimestampRecord> recs;
    if (station == station_) {
        auto p = std::make_shared<std::promise<TimestampRecord>>();
        auto fut = p->get_future();
        submit([p](const TimestampRecord& r) { p->set_value(r); });
        recs.push_back(fut.get());
    } else {
        const Frame resp = downstream(c.id).call(
            Frame{MsgType::forward, next_call_++, static_cast<std::uint8_t>(w.cls), {}, {}}, options_.call_timeout);
        const ResponseBody body = decode_response(resp.payload);
        if (!body.ok) throw Error(ErrorCode::DownstreamUnreachable, c.id + ": " + body.error);
        recs = resp.timestamps;
    }
    std::lock_guard lk(w.mu);
    w.records.insert(w.records.end(), recs.begin(), recs.end());
    if (c.quality) {
        const double q = c.quality->achieved_or_target();
        w.quality = w.quality ? std::min(*w.quality, q) : q;
    }
}

void Service::run_node(const PlanNode& node, Walk& w) {
    switch (node.kind) {
        case SpanKind::leaf: run_leaf(node.station, w); break;
        case SpanKind::seq:
            for (const auto& c : node.children) run_node(c, w);
            break;
        case SpanKind::par: {
            std::vector<std::future<void>> arms;
            for (const auto& c : node.children)
                arms.push_back(std::async(std::launch::async, [this, &c, &w] { run_node(c, w); }));
            std::exception_ptr first;
            for (auto& a : arms) {
                try {
                    a.get();
                } catch (...) {
                    if (!first) first = std::current_exception();
                }
            }
            if (first) std::rethrow_exception(first);
            break;
        }
        case SpanKind::branch: {
            std::size_t arm;
            {
                std::lock_guard lk(rng_mu_);
                arm = resolve_branch(node, w.cls, branch_rng_);
            }
            run_node(node.children[arm], w);
            break;
        }
        case SpanKind::tiered: {
            TieredSearch search(node.tiers.size(), node.quota);
            while (!search.done()) {
                const auto& tier = node.tiers[search.next_tier()];
                run_leaf(tier.station, w);
                std::uint64_t y;
                {
                    std::lock_guard lk(rng_mu_);
                    y = sample_yield(tier.yield, yield_rng_);
                }
                search.record_probe(y);
            }
            if (search.quota_unreachable()) {
                std::lock_guard lk(w.mu);
                w.quota_unreachable = true;
            }
            break;
        }
    }
}

void Service::orchestrate(std::shared_ptr<Conn> conn, Frame request) {
    Walk w;
    w.cls = request.cls == 1 ? RequestClass::image : RequestClass::text;
    ResponseBody body;
    try {
        run_node(pipeline_->root(), w);
        body.quota_unreachable = w.quota_unreachable;
        body.quality = w.quality;
    } catch (const Error& e) {
        body = ResponseBody{false, e.what(), false, {}};
    } catch (const std::exception& e) {
        body = ResponseBody{false, e.what(), false, {}};
    }
    conn->send(Frame{MsgType::response, request.request_id, request.cls, encode_response(body), std::move(w.records)});
    std::lock_guard lk(active_mu_);
    if (--active_ == 0) active_cv_.notify_all();
}

namespace {
std::atomic<bool> g_signalled{false};
extern "C" void on_signal(int) { g_signalled = true; }
}  // namespace

void serve_component(std::shared_ptr<const Pipeline> pipeline, const std::string& component, const ServiceOptions& options) {
    Service svc(std::move(pipeline), component, options);
    svc.start();
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_signalled) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    spdlog::info("{} shutting down", component);
    svc.stop();
}

LocalCluster::LocalCluster(std::shared_ptr<const Pipeline> pipeline, std::map<std::string, Address> external,
                           Nanos call_timeout, std::uint64_t seed)
    : entry_(pipeline->stations()[pipeline->entry_station()].id), addresses_(std::move(external)) {
    if (addresses_.count(entry_)) return;
    auto options = [&](std::map<std::string, Address> downstreams) {
        ServiceOptions o;
        o.listen = Address{"127.0.0.1", 0};
        o.downstreams = std::move(downstreams);
        o.call_timeout = call_timeout;
        o.seed = seed;
        return o;
    };
    try {
        for (const auto& comp : pipeline->stations()) {
            if (comp.id == entry_ || addresses_.count(comp.id)) continue;
            auto svc = std::make_unique<Service>(pipeline, comp.id, options({}));
            svc->start();
            addresses_[comp.id] = Address{"127.0.0.1", svc->port()};
            services_.push_back(std::move(svc));
        }
        auto svc = std::make_unique<Service>(pipeline, entry_, options(addresses_));
        svc->start();
        addresses_[entry_] = Address{"127.0.0.1", svc->port()};
        services_.push_back(std::move(svc));
    } catch (...) {
        for (auto it = services_.rbegin(); it != services_.rend(); ++it) (*it)->stop();
        throw;
    }
}

LocalCluster::~LocalCluster() {
    for (auto it = services_.rbegin(); it != services_.rend(); ++it) (*it)->stop();
}

}  // namespace ebf::net
