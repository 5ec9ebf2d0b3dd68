// SPDX-License-Identifier: Apache-2.0
#include "ebf/net/driver.hpp"

#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <queue>
#include <set>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "ebf/error.hpp"
#include "ebf/net/client.hpp"
#include "ebf/rng.hpp"

namespace ebf::net {

namespace {

class SpanBuilder {
  public:
    SpanBuilder(const Pipeline& p, RequestClass cls, std::span<const TimestampRecord> records, Nanos origin)
        : pipeline_(p), cls_(cls), origin_(origin) {
        std::vector<TimestampRecord> sorted(records.begin(), records.end());
        std::stable_sort(sorted.begin(), sorted.end(),
                         [](const auto& a, const auto& b) { return a.enqueue < b.enqueue; });
        for (const auto& r : sorted) by_component_[r.component].push_back(r);
        cursor_ = sorted.empty() ? Nanos::zero() : Nanos{sorted.front().enqueue} - origin;
    }

    Span build() {
        Span root = node(pipeline_.root());
        for (const auto& [hash, q] : by_component_)
            if (!q.empty()) throw Error(ErrorCode::MalformedSpanTree, "timestamp records left over after plan walk");
        return root;
    }

  private:
    bool has(const std::string& id) const {
        auto it = by_component_.find(fnv1a64(id));
        return it != by_component_.end() && !it->second.empty();
    }

    Span leaf(const std::string& id) {
        auto it = by_component_.find(fnv1a64(id));
        if (it == by_component_.end() || it->second.empty())
            throw Error(ErrorCode::MalformedSpanTree, "no timestamps for component '" + id + "'");
        const TimestampRecord r = it->second.front();
        it->second.pop_front();
        Span s{id, SpanKind::leaf, Nanos{r.enqueue} - origin_, Nanos{r.start} - origin_, Nanos{r.end} - origin_, {}};
        cursor_ = std::max(cursor_, s.end);
        return s;
    }

    Span composite(const PlanNode& n, std::vector<Span> kids) {
        Span s;
        s.id = n.label;
        s.kind = n.kind;
        if (kids.empty()) {
            s.enqueue = s.start = s.end = cursor_;
            return s;
        }
        s.enqueue = s.start = kids.front().enqueue;
        s.end = kids.front().end;
        for (const auto& k : kids) {
            s.start = s.enqueue = std::min(s.enqueue, k.enqueue);
            s.end = std::max(s.end, k.end);
        }
        s.children = std::move(kids);
        return s;
    }

    Span node(const PlanNode& n) {
        const auto& stations = pipeline_.stations();
        switch (n.kind) {
            case SpanKind::leaf: return leaf(stations[n.station].id);
            case SpanKind::seq:
            case SpanKind::par: {
                std::vector<Span> kids;
                for (const auto& c : n.children) kids.push_back(node(c));
                return composite(n, std::move(kids));
            }
            case SpanKind::branch: {
                std::size_t arm = 0;
                if (n.branch_mode == BranchMode::by_class) {
                    arm = cls_ == RequestClass::text ? 0 : 1;
                } else {
                    while (arm + 1 < n.children.size() && !has(stations[first_leaf(n.children[arm]).station].id)) ++arm;
                }
                std::vector<Span> kids;
                kids.push_back(node(n.children[arm]));
                return composite(n, std::move(kids));
            }
            case SpanKind::tiered: {
                std::vector<Span> kids;
                for (const auto& t : n.tiers) {
                    if (!has(stations[t.station].id)) break;
                    kids.push_back(leaf(stations[t.station].id));
                }
                return composite(n, std::move(kids));
            }
        }
        throw Error(ErrorCode::MalformedSpanTree, "unknown plan node");
    }

    const Pipeline& pipeline_;
    RequestClass cls_;
    Nanos origin_;
    Nanos cursor_{};
    std::unordered_map<std::uint64_t, std::deque<TimestampRecord>> by_component_;
};

std::chrono::steady_clock::time_point at(Nanos monotonic) {
    return std::chrono::steady_clock::time_point(std::chrono::duration_cast<std::chrono::steady_clock::duration>(monotonic));
}

struct Later {
    bool operator()(const ArrivalEvent& a, const ArrivalEvent& b) const {
        return a.scheduled != b.scheduled ? a.scheduled > b.scheduled : a.request_id > b.request_id;
    }
};

constexpr std::size_t kMaxErrorSamples = 16;

/// Shared state between the issuing loop and the response callbacks.
class Run {
  public:
    Run(const Pipeline& p, const WorkloadSpec& w, const DriveOptions& o, MuxClient& client)
        : pipeline_(p), w_(w), o_(o), client_(client) {
        if (w.stop.kind == StopCondition::Kind::duration) horizon_ = w.warmup + w.stop.duration;
    }

    DriveResult run() {
        t0_ = monotonic_now();
        std::unique_lock lk(mu_);
        if (w_.mode == LoopMode::open_loop) {
            gen_.emplace(w_);
            pull();
        } else {
            users_ = make_users(w_);
            if (w_.stop.kind == StopCondition::Kind::request_count && w_.stop.count == 0) issuing_ = false;
            for (auto& u : users_) schedule(u.user, Nanos::zero());
        }
        for (;;) {
            const Nanos now = monotonic_now() - t0_;
            std::vector<ArrivalEvent> due;
            while (issuing_ && !future_.empty() && future_.top().scheduled <= now) {
                due.push_back(future_.top());
                future_.pop();
                if (gen_) pull();
            }
            expire(now);
            if (!due.empty()) {
                lk.unlock();
                for (const auto& a : due) fire(a);
                lk.lock();
                continue;
            }
            const bool more = issuing_ && !future_.empty();
            if (!more && pending_.empty()) break;
            Nanos wake = Nanos::max();
            if (more) wake = future_.top().scheduled;
            if (!deadlines_.empty()) wake = std::min(wake, deadlines_.begin()->first);
            cv_.wait_until(lk, at(t0_ + wake));
        }
        result_.elapsed = monotonic_now() - t0_;
        return std::move(result_);
    }

    void on_response(std::uint64_t id, std::optional<Frame> frame, const std::string& err) {
        const Nanos done = monotonic_now() - t0_;
        std::lock_guard lk(mu_);
        auto it = pending_.find(id);
        if (it == pending_.end()) return;  // already timed out
        const Pending p = it->second;
        deadlines_.erase({p.deadline, id});
        pending_.erase(it);

        std::string failure = err;
        if (frame) {
            try {
                const ResponseBody body = decode_response(frame->payload);
                if (!body.ok) {
                    failure = body.error.empty() ? "error response" : body.error;
                } else {
                    RequestTrace t;
                    t.request_id = p.arrival.request_id;
                    t.cls = p.arrival.cls;
                    t.arrival = p.arrival.scheduled;
                    t.sent = p.sent;
                    t.completion = done;
                    t.root = reconstruct_spans(pipeline_, p.arrival.cls, frame->timestamps, t0_);
                    t.quality_achieved = body.quality;
                    t.quota_unreachable = body.quota_unreachable;
                    if (t.arrival < w_.warmup) {
                        ++result_.discarded_warmup;
                    } else {
                        result_.traces.push_back(std::move(t));
                    }
                }
            } catch (const Error& e) {
                failure = e.what();
            }
        }
        if (!failure.empty()) record_error(failure);
        after_completion(p, done);
        cv_.notify_all();
    }

  private:
    struct Pending {
        ArrivalEvent arrival;
        Nanos sent;
        Nanos deadline;
        std::int64_t user;
    };

    void pull() {
        if (auto ev = gen_->next()) {
            future_.push(*ev);
        }
    }

    void schedule(std::uint32_t user, Nanos after) {
        const ArrivalEvent a = next_closed_loop_arrival(users_[user], after, w_, next_id_++);
        if (a.scheduled > horizon_) return;
        user_of_[a.request_id] = user;
        future_.push(a);
    }

    void fire(const ArrivalEvent& a) {
        const Nanos sent = monotonic_now() - t0_;
        {
            std::lock_guard lk(mu_);
            std::int64_t user = -1;
            if (auto u = user_of_.find(a.request_id); u != user_of_.end()) {
                user = u->second;
                user_of_.erase(u);
            }
            const Nanos deadline = sent + o_.timeout;
            pending_.emplace(a.request_id, Pending{a, sent, deadline, user});
            deadlines_.emplace(deadline, a.request_id);
            ++result_.issued;
        }
        try {
            client_.send(Frame{MsgType::request, a.request_id, static_cast<std::uint8_t>(a.cls), {}, {}},
                         [this, id = a.request_id](std::optional<Frame> f, const std::string& err) {
                             on_response(id, std::move(f), err);
                         });
        } catch (const Error& e) {
            on_response(a.request_id, std::nullopt, e.what());
        }
    }

    void expire(Nanos now) {
        while (!deadlines_.empty() && deadlines_.begin()->first <= now) {
            const auto [deadline, id] = *deadlines_.begin();
            deadlines_.erase(deadlines_.begin());
            auto it = pending_.find(id);
            if (it == pending_.end()) continue;
            const Pending p = it->second;
            pending_.erase(it);
            client_.cancel(id);
            ++result_.timeouts;
            if (result_.error_samples.size() < kMaxErrorSamples)
                result_.error_samples.push_back("Timeout: request " + std::to_string(id));
            after_completion(p, now);
        }
    }

    void record_error(const std::string& msg) {
        ++result_.errors;
        if (result_.error_samples.size() < kMaxErrorSamples) result_.error_samples.push_back(msg);
        spdlog::debug("request failed: {}", msg);
    }

    void after_completion(const Pending& p, Nanos done) {
        if (w_.mode != LoopMode::closed_loop) return;
        if (w_.stop.kind == StopCondition::Kind::request_count && result_.traces.size() >= w_.stop.count) issuing_ = false;
        if (issuing_ && p.user >= 0) schedule(static_cast<std::uint32_t>(p.user), done);
    }

    const Pipeline& pipeline_;
    WorkloadSpec w_;
    DriveOptions o_;
    MuxClient& client_;
    Nanos t0_{};
    Nanos horizon_ = Nanos::max();

    std::mutex mu_;
    std::condition_variable cv_;
    bool issuing_ = true;
    std::optional<OpenLoopGenerator> gen_;
    std::vector<UserState> users_;
    std::unordered_map<std::uint64_t, std::uint32_t> user_of_;
    std::uint64_t next_id_ = 0;
    std::priority_queue<ArrivalEvent, std::vector<ArrivalEvent>, Later> future_;
    std::unordered_map<std::uint64_t, Pending> pending_;
    std::set<std::pair<Nanos, std::uint64_t>> deadlines_;
    DriveResult result_;
};

}  // namespace

Span reconstruct_spans(const Pipeline& pipeline, RequestClass cls, std::span<const TimestampRecord> records, Nanos origin) {
    return SpanBuilder(pipeline, cls, records, origin).build();
}

void check_health(const Address& entry, Nanos timeout) {
    MuxClient client(entry, timeout);
    const Frame r = client.call(Frame{MsgType::health, 0, 0, {}, {}}, timeout);
    const ResponseBody body = decode_response(r.payload);
    if (!body.ok) throw Error(ErrorCode::DownstreamUnreachable, body.error);
}

DriveResult drive_load(const Address& entry, const Pipeline& pipeline, const WorkloadSpec& workload,
                       const DriveOptions& options) {
    validate_workload(workload);
    if (options.health_check) check_health(entry, options.connect_timeout + options.timeout);
    MuxClient client(entry, options.connect_timeout);
    Run run(pipeline, workload, options, client);
    DriveResult r = run.run();
    spdlog::info("drive finished: {} issued, {} measured, {} errors, {} timeouts", r.issued, r.traces.size(), r.errors,
                 r.timeouts);
    return r;
}

}  // namespace ebf::net
