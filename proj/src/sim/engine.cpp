// SPDX-License-Identifier: Apache-2.0
#include "ebf/sim/engine.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <queue>
#include <unordered_map>

#include "ebf/error.hpp"
#include "ebf/sim/execution.hpp"

namespace ebf {

namespace {

constexpr std::int32_t kNone = -1;
constexpr std::int64_t kTrainerJob = -1;
constexpr Nanos kForever{std::numeric_limits<std::int64_t>::max()};

enum class EventType : std::uint8_t { arrival, service_end, trainer_update };

struct Event {
    Nanos time;
    std::uint64_t seq;
    EventType type;
    std::uint32_t station;
    std::int64_t payload;  // job frame, or user index for closed-loop arrivals

    bool operator>(const Event& o) const noexcept { return time != o.time ? time > o.time : seq > o.seq; }
};

struct Job {
    std::int64_t frame;
    Nanos fixed_service;
};

struct Station {
    const ComponentSpec* spec;
    Rng rng;
    std::deque<Job> queue;
    std::uint32_t busy = 0;
    std::uint64_t served = 0;
    Nanos last_change{};
    double busy_integral = 0.0;  // server-nanoseconds within the measured window
};

struct FlatSpan {
    const std::string* id;
    SpanKind kind;
    Nanos enqueue, start, end;
    std::int32_t parent;
};

struct Request {
    std::uint64_t id = 0;
    RequestClass cls = RequestClass::text;
    Nanos arrival{};
    std::int64_t user = -1;
    std::vector<FlatSpan> spans;
    std::optional<double> quality;
    bool quota_unreachable = false;
};

/// Execution context of one plan node for one request.
struct Frame {
    std::uint32_t request = 0;
    const PlanNode* node = nullptr;  // null for a tier probe
    std::uint32_t station = 0;       // leaves and tier probes
    std::int32_t parent = kNone;
    std::int32_t span = kNone;
    std::uint32_t cursor = 0;
    std::uint32_t pending = 0;
    std::optional<TieredSearch> search;
};

template <class T>
class Pool {
  public:
    std::uint32_t acquire() {
        if (!free_.empty()) {
            auto i = free_.back();
            free_.pop_back();
            items_[i] = T{};
            return i;
        }
        items_.emplace_back();
        return static_cast<std::uint32_t>(items_.size() - 1);
    }
    void release(std::uint32_t i) {
        items_[i] = T{};
        free_.push_back(i);
    }
    T& operator[](std::uint32_t i) { return items_[i]; }
    const T& operator[](std::uint32_t i) const { return items_[i]; }
    std::size_t live() const { return items_.size() - free_.size(); }

  private:
    std::vector<T> items_;
    std::vector<std::uint32_t> free_;
};

Span build_span_tree(const std::vector<FlatSpan>& flat) {
    std::vector<Span> nodes(flat.size());
    for (std::size_t i = 0; i < flat.size(); ++i) {
        nodes[i].id = *flat[i].id;
        nodes[i].kind = flat[i].kind;
        nodes[i].enqueue = flat[i].enqueue;
        nodes[i].start = flat[i].start;
        nodes[i].end = flat[i].end;
    }
    // Children are always created after their parent, so folding from the
    // back moves every subtree into place before its parent is moved.
    std::vector<std::vector<std::size_t>> kids(flat.size());
    for (std::size_t i = 1; i < flat.size(); ++i) kids[static_cast<std::size_t>(flat[i].parent)].push_back(i);
    for (std::size_t i = flat.size(); i-- > 0;) {
        nodes[i].children.reserve(kids[i].size());
        for (std::size_t k : kids[i]) nodes[i].children.push_back(std::move(nodes[k]));
    }
    return std::move(nodes[0]);
}

class Simulator {
  public:
    Simulator(const Pipeline& pipeline, const WorkloadSpec& workload, const SimOptions& options)
        : pipeline_(pipeline), workload_(workload), options_(options), master_(workload.seed),
          branch_rng_(master_.substream("branch")), yield_rng_(master_.substream("yield")) {
        validate_workload(workload);
        for (const auto& spec : pipeline.stations())
            stations_.push_back(Station{&spec, master_.substream("service/" + spec.id), {}, 0, 0, {}, 0.0});
        measure_start_ = workload.warmup;
        if (workload.stop.kind == StopCondition::Kind::duration) horizon_ = workload.warmup + workload.stop.duration;
        if (options.trainer) {
            trainer_station_ = static_cast<std::uint32_t>(pipeline.station_index(options.trainer->station));
            if (options.trainer->interval <= Nanos::zero() || options.trainer->cost <= Nanos::zero())
                throw Error(ErrorCode::InvalidPolicy, "trainer interval and cost must be > 0");
        }
    }

    SimResult run() {
        seed_arrivals();
        if (options_.trainer) push(options_.trainer->interval, EventType::trainer_update, trainer_station_, 0);

        while (!events_.empty() && !stopped_) {
            const Event ev = events_.top();
            if (ev.time > horizon_) break;
            events_.pop();
            advance(ev.time);
            switch (ev.type) {
                case EventType::arrival: on_arrival(ev); break;
                case EventType::service_end: on_service_end(ev); break;
                case EventType::trainer_update: on_trainer(ev); break;
            }
        }
        if (horizon_ != kForever && !stopped_) advance(horizon_);
        return finish();
    }

  private:
    // --- bookkeeping ---------------------------------------------------

    void push(Nanos t, EventType type, std::uint32_t station, std::int64_t payload) {
        events_.push(Event{t, seq_++, type, station, payload});
    }

    /// Integrates busy servers and requests-in-system up to `t`.
    void advance(Nanos t) {
        if (t > now_) {
            const Nanos from = std::max(now_, measure_start_);
            if (t > from) in_system_integral_ += static_cast<double>(requests_.live()) * static_cast<double>((t - from).count());
        }
        now_ = t;
    }

    void account(Station& st) {
        const Nanos from = std::max(st.last_change, measure_start_);
        if (now_ > from) st.busy_integral += static_cast<double>(st.busy) * static_cast<double>((now_ - from).count());
        st.last_change = now_;
    }

    // --- arrivals ------------------------------------------------------

    void seed_arrivals() {
        if (workload_.mode == LoopMode::open_loop) {
            generator_.emplace(workload_);
            pull_open_loop();
        } else {
            users_ = make_users(workload_);
            if (workload_.stop.kind == StopCondition::Kind::request_count && workload_.stop.count == 0) {
                generator_exhausted_ = true;
                return;
            }
            for (auto& u : users_) schedule_user(u, Nanos::zero());
        }
    }

    void pull_open_loop() {
        if (auto ev = generator_->next()) {
            pending_arrivals_.push_back(*ev);
            push(ev->scheduled, EventType::arrival, 0, -1);
        } else {
            generator_exhausted_ = true;
        }
    }

    void schedule_user(UserState& u, Nanos after) {
        ArrivalEvent ev = next_closed_loop_arrival(u, after, workload_, next_request_id_++);
        if (ev.scheduled > horizon_) return;
        user_arrivals_.emplace(u.user, ev);
        push(ev.scheduled, EventType::arrival, 0, u.user);
    }

    void on_arrival(const Event& ev) {
        ArrivalEvent a;
        if (ev.payload < 0) {
            a = pending_arrivals_.front();
            pending_arrivals_.pop_front();
            pull_open_loop();
        } else {
            auto it = user_arrivals_.find(static_cast<std::uint32_t>(ev.payload));
            a = it->second;
            user_arrivals_.erase(it);
        }
        ++injected_;
        if (a.scheduled >= measure_start_) ++measured_arrivals_;
        const std::uint32_t r = requests_.acquire();
        Request& req = requests_[r];
        req.id = a.request_id;
        req.cls = a.cls;
        req.arrival = a.scheduled;
        req.user = ev.payload;
        start_node(r, pipeline_.root(), kNone);
    }

    // --- plan execution ------------------------------------------------

    std::int32_t open_span(std::uint32_t r, const std::string* id, SpanKind kind, std::int32_t parent_span) {
        auto& spans = requests_[r].spans;
        spans.push_back(FlatSpan{id, kind, now_, now_, now_, parent_span});
        return static_cast<std::int32_t>(spans.size() - 1);
    }

    std::int32_t parent_span_of(std::int32_t parent_frame) const {
        return parent_frame == kNone ? kNone : frames_[static_cast<std::uint32_t>(parent_frame)].span;
    }

    void start_node(std::uint32_t r, const PlanNode& node, std::int32_t parent) {
        const std::uint32_t f = frames_.acquire();
        frames_[f].request = r;
        frames_[f].node = &node;
        frames_[f].parent = parent;
        frames_[f].span = open_span(r, &node.label, node.kind, parent_span_of(parent));

        switch (node.kind) {
            case SpanKind::leaf:
                frames_[f].station = static_cast<std::uint32_t>(node.station);
                enqueue(frames_[f].station, Job{f, Nanos::zero()});
                break;
            case SpanKind::seq:
                start_node(r, node.children.front(), static_cast<std::int32_t>(f));
                break;
            case SpanKind::par:
                frames_[f].pending = static_cast<std::uint32_t>(node.children.size());
                for (const auto& c : node.children) start_node(r, c, static_cast<std::int32_t>(f));
                break;
            case SpanKind::branch: {
                const std::size_t arm = resolve_branch(node, requests_[r].cls, branch_rng_);
                start_node(r, node.children[arm], static_cast<std::int32_t>(f));
                break;
            }
            case SpanKind::tiered:
                frames_[f].search.emplace(node.tiers.size(), node.quota);
                if (frames_[f].search->done()) {
                    complete(f);
                } else {
                    start_probe(f);
                }
                break;
        }
    }

    void start_probe(std::uint32_t tiered_frame) {
        const Frame& parent = frames_[tiered_frame];
        const auto& tier = parent.node->tiers[parent.search->next_tier()];
        const std::uint32_t r = parent.request;
        const std::int32_t pspan = parent.span;
        const std::uint32_t f = frames_.acquire();
        frames_[f].request = r;
        frames_[f].node = nullptr;
        frames_[f].station = static_cast<std::uint32_t>(tier.station);
        frames_[f].parent = static_cast<std::int32_t>(tiered_frame);
        frames_[f].span = open_span(r, &pipeline_.stations()[tier.station].id, SpanKind::leaf, pspan);
        enqueue(frames_[f].station, Job{f, Nanos::zero()});
    }

    void enqueue(std::uint32_t s, Job job) {
        Station& st = stations_[s];
        if (st.busy < st.spec->servers) {
            begin_service(s, job);
        } else {
            st.queue.push_back(job);
        }
    }

    void begin_service(std::uint32_t s, Job job) {
        Station& st = stations_[s];
        account(st);
        ++st.busy;
        Nanos service = job.fixed_service;
        if (job.frame != kTrainerJob) {
            const Frame& fr = frames_[static_cast<std::uint32_t>(job.frame)];
            requests_[fr.request].spans[static_cast<std::size_t>(fr.span)].start = now_;
            service = sample_service_time(st.spec->service, st.rng);
        }
        push(now_ + service, EventType::service_end, s, job.frame);
    }

    void on_service_end(const Event& ev) {
        Station& st = stations_[ev.station];
        account(st);
        --st.busy;
        if (!st.queue.empty()) {
            const Job next = st.queue.front();
            st.queue.pop_front();
            begin_service(ev.station, next);
        }
        if (ev.payload == kTrainerJob) return;
        ++st.served;
        const auto f = static_cast<std::uint32_t>(ev.payload);
        Request& req = requests_[frames_[f].request];
        if (st.spec->quality) {
            const double q = st.spec->quality->achieved_or_target();
            req.quality = req.quality ? std::min(*req.quality, q) : q;
        }
        complete(f);
    }

    void complete(std::uint32_t f) {
        const std::uint32_t r = frames_[f].request;
        requests_[r].spans[static_cast<std::size_t>(frames_[f].span)].end = now_;
        const std::int32_t parent = frames_[f].parent;
        frames_.release(f);
        if (parent == kNone) {
            finish_request(r);
        } else {
            child_done(static_cast<std::uint32_t>(parent));
        }
    }

    void child_done(std::uint32_t f) {
        Frame& fr = frames_[f];
        const PlanNode& node = *fr.node;
        switch (node.kind) {
            case SpanKind::seq:
                if (++fr.cursor < node.children.size()) {
                    start_node(fr.request, node.children[fr.cursor], static_cast<std::int32_t>(f));
                } else {
                    complete(f);
                }
                break;
            case SpanKind::par:
                if (--fr.pending == 0) complete(f);
                break;
            case SpanKind::branch: complete(f); break;
            case SpanKind::tiered: {
                const auto& tier = node.tiers[fr.search->next_tier()];
                fr.search->record_probe(sample_yield(tier.yield, yield_rng_));
                if (!fr.search->done()) {
                    start_probe(f);
                } else {
                    if (fr.search->quota_unreachable()) requests_[fr.request].quota_unreachable = true;
                    complete(f);
                }
                break;
            }
            case SpanKind::leaf: break;
        }
    }

    void finish_request(std::uint32_t r) {
        Request& req = requests_[r];
        const bool measured = req.arrival >= measure_start_;
        if (measured) {
            RequestTrace t;
            t.request_id = req.id;
            t.cls = req.cls;
            t.arrival = req.arrival;
            t.sent = req.arrival;
            t.completion = now_;
            t.root = build_span_tree(req.spans);
            t.quality_achieved = req.quality;
            t.quota_unreachable = req.quota_unreachable;
            if (t.quota_unreachable) ++quota_unreachable_;
            traces_.push_back(std::move(t));
        } else {
            ++discarded_warmup_;
        }
        const std::int64_t user = req.user;
        requests_.release(r);

        if (workload_.mode == LoopMode::closed_loop) {
            if (workload_.stop.kind == StopCondition::Kind::request_count && traces_.size() >= workload_.stop.count) {
                stopped_ = true;
                generator_exhausted_ = true;
                return;
            }
            schedule_user(users_[static_cast<std::size_t>(user)], now_);
        }
    }

    void on_trainer(const Event& ev) {
        Station& st = stations_[ev.station];
        for (std::uint32_t i = 0; i < st.spec->servers; ++i) enqueue(ev.station, Job{kTrainerJob, options_.trainer->cost});
        ++trainer_updates_;
        const bool active = requests_.live() > 0 || !generator_exhausted_ || workload_.mode == LoopMode::closed_loop;
        if (active) push(now_ + options_.trainer->interval, EventType::trainer_update, ev.station, 0);
    }

    SimResult finish() {
        SimResult out;
        RunStats& s = out.stats;
        s.injected = injected_;
        s.completed = traces_.size();
        s.in_flight = requests_.live();
        s.discarded_warmup = discarded_warmup_;
        s.quota_unreachable = quota_unreachable_;
        s.trainer_updates = trainer_updates_;
        s.measure_start = measure_start_;
        s.end_time = now_;
        const double window = static_cast<double>((now_ - measure_start_).count());
        if (window > 0.0) {
            s.mean_in_system = in_system_integral_ / window;
            s.arrival_rate = static_cast<double>(measured_arrivals_) / (window / 1e9);
            s.throughput = static_cast<double>(s.completed) / (window / 1e9);
        }
        for (auto& st : stations_) {
            account(st);
            StationStats ss;
            ss.id = st.spec->id;
            ss.served = st.served;
            ss.utilization = window > 0.0 ? st.busy_integral / (window * st.spec->servers) : 0.0;
            if (ss.utilization > options_.unstable_utilization)
                s.warnings.push_back("UnstableSystemWarning: station '" + ss.id + "' utilization " +
                                     std::to_string(ss.utilization));
            s.stations.push_back(std::move(ss));
        }
        out.traces = std::move(traces_);
        return out;
    }

    const Pipeline& pipeline_;
    WorkloadSpec workload_;
    SimOptions options_;
    Rng master_;
    Rng branch_rng_;
    Rng yield_rng_;
    std::vector<Station> stations_;
    Pool<Request> requests_;
    Pool<Frame> frames_;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
    std::uint64_t seq_ = 0;
    Nanos now_{};
    Nanos measure_start_{};
    Nanos horizon_ = kForever;
    bool stopped_ = false;

    std::optional<OpenLoopGenerator> generator_;
    std::deque<ArrivalEvent> pending_arrivals_;
    bool generator_exhausted_ = false;
    std::vector<UserState> users_;
    std::unordered_map<std::uint32_t, ArrivalEvent> user_arrivals_;
    std::uint64_t next_request_id_ = 0;
    std::uint32_t trainer_station_ = 0;

    std::vector<RequestTrace> traces_;
    std::uint64_t injected_ = 0;
    std::uint64_t measured_arrivals_ = 0;
    std::uint64_t discarded_warmup_ = 0;
    std::uint64_t quota_unreachable_ = 0;
    std::uint64_t trainer_updates_ = 0;
    double in_system_integral_ = 0.0;
};

}  // namespace

SimResult simulate(const Pipeline& pipeline, const WorkloadSpec& workload, const SimOptions& options) {
    return Simulator(pipeline, workload, options).run();
}

double estimate_service_rate(const Pipeline& pipeline, const WorkloadSpec& like, std::uint64_t requests) {
    std::uint32_t servers = 0;
    for (const auto& s : pipeline.stations()) servers += s.servers;
    WorkloadSpec w;
    w.mode = LoopMode::closed_loop;
    w.users = std::max<std::uint32_t>(16, 4 * servers);
    w.think_time_mean = Nanos{1000};
    w.fraction_text = like.fraction_text;
    w.warmup = Nanos::zero();
    w.stop = StopCondition::requests(requests);
    w.seed = like.seed;
    const SimResult r = simulate(pipeline, w);
    if (r.traces.size() < 4) return 0.0;
    // Skip the initial ramp: rate over the second half of the completions.
    const std::size_t half = r.traces.size() / 2;
    const Nanos first = r.traces[half].completion;
    const Nanos last = r.traces.back().completion;
    const double span_s = to_seconds(last - first);
    return span_s > 0.0 ? static_cast<double>(r.traces.size() - 1 - half) / span_s : 0.0;
}

}  // namespace ebf
