// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "ebf/core/topology.hpp"
#include "ebf/error.hpp"

namespace ebf::test {

inline const nlohmann::json& oracles() {
    static const nlohmann::json j = [] {
        std::ifstream in(std::string(EBF_FIXTURE_DIR) + "/oracles.json");
        return nlohmann::json::parse(in);
    }();
    return j;
}

inline ComponentSpec station(std::string id, ServiceTimeModel service, std::uint32_t servers = 1) {
    ComponentSpec c;
    c.id = std::move(id);
    c.service = std::move(service);
    c.servers = servers;
    return c;
}

inline Deterministic fixed_ms(double ms) { return Deterministic{from_ms(ms)}; }

/// One exponential server.
inline Topology mm1_topology(double mu) {
    Topology t;
    t.components = {station("server", Exponential{mu})};
    t.pipeline = Expr::reference("server");
    t.entry = "server";
    return validate_topology(t);
}

inline Topology chain(std::initializer_list<std::pair<const char*, double>> stages) {
    Topology t;
    std::vector<Expr> refs;
    for (const auto& [id, ms] : stages) {
        t.components.push_back(station(id, fixed_ms(ms), 4));
        refs.push_back(Expr::reference(id));
    }
    t.pipeline = Expr::seq(std::move(refs));
    t.entry = stages.begin()->first;
    return validate_topology(t);
}

template <class F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no ebf::Error thrown";
    return ErrorCode::Io;
}

}  // namespace ebf::test
