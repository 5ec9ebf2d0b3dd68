// SPDX-License-Identifier: Apache-2.0
#include "ebf/workload.hpp"

#include <cmath>
#include <ostream>

#include "ebf/error.hpp"

namespace ebf {

void validate_workload(const WorkloadSpec& spec) {
    if (spec.mode == LoopMode::open_loop) {
        if (!(spec.rate > 0.0) || !std::isfinite(spec.rate))
            throw Error(ErrorCode::InvalidRate, "open-loop rate must be > 0, got " + std::to_string(spec.rate));
    } else {
        if (spec.users < 1) throw Error(ErrorCode::InvalidWorkload, "closed loop needs at least one user");
        if (spec.think_time_mean <= Nanos::zero())
            throw Error(ErrorCode::InvalidWorkload, "closed-loop think time mean must be > 0");
    }
    if (!(spec.fraction_text >= 0.0 && spec.fraction_text <= 1.0))
        throw Error(ErrorCode::InvalidWorkload, "fraction_text must lie in [0, 1]");
    if (spec.warmup < Nanos::zero()) throw Error(ErrorCode::InvalidWorkload, "warmup must be >= 0");
    if (spec.stop.kind == StopCondition::Kind::duration && spec.stop.duration <= Nanos::zero())
        throw Error(ErrorCode::InvalidWorkload, "stop duration must be > 0");
}

RequestClass draw_class(double fraction_text, Rng& rng) {
    return rng.bernoulli(fraction_text) ? RequestClass::text : RequestClass::image;
}

OpenLoopGenerator::OpenLoopGenerator(const WorkloadSpec& spec)
    : spec_(spec), gaps_(Rng(spec.seed).substream("arrivals")), mix_(Rng(spec.seed).substream("mix")) {
    if (spec.mode != LoopMode::open_loop) throw Error(ErrorCode::InvalidWorkload, "workload is not open loop");
    validate_workload(spec);
}

std::optional<ArrivalEvent> OpenLoopGenerator::next() {
    const bool by_count = spec_.stop.kind == StopCondition::Kind::request_count;
    if (by_count && measured_ >= spec_.stop.count) return std::nullopt;

    clock_ += from_seconds(gaps_.exponential(spec_.rate));
    if (!by_count && clock_ >= spec_.warmup + spec_.stop.duration) return std::nullopt;
    if (clock_ >= spec_.warmup) ++measured_;
    return ArrivalEvent{next_id_++, clock_, draw_class(spec_.fraction_text, mix_)};
}

std::vector<ArrivalEvent> gen_open_loop(const WorkloadSpec& spec) {
    OpenLoopGenerator gen(spec);
    std::vector<ArrivalEvent> out;
    if (spec.stop.kind == StopCondition::Kind::request_count) out.reserve(spec.stop.count);
    while (auto ev = gen.next()) out.push_back(*ev);
    return out;
}

std::vector<UserState> make_users(const WorkloadSpec& spec) {
    const Rng master = Rng(spec.seed).substream("users");
    std::vector<UserState> users;
    users.reserve(spec.users);
    for (std::uint32_t u = 0; u < spec.users; ++u) users.emplace_back(u, master);
    return users;
}

ArrivalEvent next_closed_loop_arrival(UserState& user, Nanos completion_time, const WorkloadSpec& spec,
                                      std::uint64_t request_id) {
    const double mean_s = to_seconds(spec.think_time_mean);
    Nanos think = from_seconds(user.rng.exponential(1.0 / mean_s));
    if (think <= Nanos::zero()) think = Nanos{1};
    const RequestClass cls = draw_class(spec.fraction_text, user.rng);
    ++user.issued;
    return ArrivalEvent{request_id, completion_time + think, cls};
}

WarmupSplit split_warmup(std::vector<RequestTrace> traces, Nanos warmup) {
    WarmupSplit out;
    for (auto& t : traces) (t.arrival < warmup ? out.discarded : out.measured).push_back(std::move(t));
    return out;
}

void write_arrivals(std::ostream& out, std::span<const ArrivalEvent> events) {
    for (const auto& e : events) out << e.request_id << ',' << e.scheduled.count() << ',' << to_string(e.cls) << '\n';
}

}  // namespace ebf
