// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ebf/core/types.hpp"
#include "ebf/rng.hpp"

namespace ebf {

enum class LoopMode : std::uint8_t { open_loop, closed_loop };

/// request_count counts measured (post warm-up) requests: arrivals for an
/// open loop, completions for a closed loop. duration is the measured window
/// that follows the warm-up.
struct StopCondition {
    enum class Kind : std::uint8_t { request_count, duration };
    Kind kind = Kind::request_count;
    std::uint64_t count = 0;
    Nanos duration{};
    bool operator==(const StopCondition&) const = default;

    static StopCondition requests(std::uint64_t n) { return {Kind::request_count, n, {}}; }
    static StopCondition for_duration(Nanos d) { return {Kind::duration, 0, d}; }
};

struct WorkloadSpec {
    LoopMode mode = LoopMode::open_loop;
    double rate = 1.0;               // open loop, requests per second
    std::uint32_t users = 1;         // closed loop
    Nanos think_time_mean{};         // closed loop
    double fraction_text = 1.0;
    Nanos warmup{};
    StopCondition stop;
    std::uint64_t seed = 1;
    bool operator==(const WorkloadSpec&) const = default;
};

/// Throws InvalidRate / InvalidWorkload.
void validate_workload(const WorkloadSpec& spec);

struct ArrivalEvent {
    std::uint64_t request_id = 0;
    Nanos scheduled{};
    RequestClass cls = RequestClass::text;
    bool operator==(const ArrivalEvent&) const = default;
};

/// Lazily generated Poisson arrival stream; the simulator pulls from this so
/// million-request runs need no materialized event list.
class OpenLoopGenerator {
  public:
    explicit OpenLoopGenerator(const WorkloadSpec& spec);

    std::optional<ArrivalEvent> next();

  private:
    WorkloadSpec spec_;
    Rng gaps_;
    Rng mix_;
    Nanos clock_{};
    std::uint64_t next_id_ = 0;
    std::uint64_t measured_ = 0;
};

std::vector<ArrivalEvent> gen_open_loop(const WorkloadSpec& spec);

struct UserState {
    std::uint32_t user = 0;
    Rng rng;
    std::uint64_t issued = 0;

    UserState(std::uint32_t id, const Rng& master) : user(id), rng(master.substream(0x5553455200000000ULL + id)) {}
};

/// One independent substream per user, derived from the workload seed.
std::vector<UserState> make_users(const WorkloadSpec& spec);

RequestClass draw_class(double fraction_text, Rng& rng);

/// Next request of a closed-loop user: completion_time plus an exponential
/// think time, class re-drawn from the mix.
ArrivalEvent next_closed_loop_arrival(UserState& user, Nanos completion_time, const WorkloadSpec& spec,
                                      std::uint64_t request_id);

struct WarmupSplit {
    std::vector<RequestTrace> discarded;
    std::vector<RequestTrace> measured;
};

/// Traces arriving strictly before `warmup` are discarded.
WarmupSplit split_warmup(std::vector<RequestTrace> traces, Nanos warmup);

/// One event per line: request_id,scheduled_time_ns,class
void write_arrivals(std::ostream& out, std::span<const ArrivalEvent> events);

}  // namespace ebf
