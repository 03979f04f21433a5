#pragma once

// Green scheduler: consolidates jobs onto as few servers as possible so the
// rest can sleep, skips congested routes for data-intensive jobs, picks DVFS
// setpoints and decides which idle components to put to sleep.

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "greendc/state.hpp"

namespace greendc {

struct PlacementDecision {
    bool admit = false;
    std::size_t server = 0;  // server index
    double start = 0;        // when the job can begin (after any wake-up)
    double reserved = 0;     // reserved compute rate at f = 1
    bool wake = false;
    Path path_internal;      // empty when no peer server is available
    Path path_external;
    std::string reason;
};

inline constexpr double kDefaultFMin = 0.1;

/// f = min(1, max(f_min, load * (1 + headroom))).
inline double dvfs_setpoint(double server_load, double headroom, double f_min = kDefaultFMin) {
    return std::min(1.0, std::max(f_min, server_load * (1 + headroom)));
}

namespace detail {

inline std::uint64_t flow_key(const Job& j, bool external) { return j.id * 2 + (external ? 1 : 0); }

/// Time budget available to the compute phase starting at `start`.
inline double compute_budget(const Job& job, double start, bool sequential, double nic_rate) {
    double budget = job.deadline - start;
    if (sequential) budget -= ideal_transfer_time(job.comm_total(), nic_rate);
    return budget;
}

}  // namespace detail

/// Deterministic peer for a job's internal traffic: the first available
/// server at or after a hashed start position, excluding `src`.
inline std::optional<NodeId> pick_destination(const SimState& st, NodeId src, std::uint64_t job_id, double now) {
    const std::size_t n = st.topo.server_count();
    const std::size_t start = detail::mix64(job_id ^ 0xd1b54a32d192ed03ULL) % n;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t idx = (start + k) % n;
        const NodeId node = st.topo.server(idx);
        if (node != src && st.servers[idx].power.available(now) &&
            st.switches[st.topo.access_of(node)].power.available(now))
            return node;
    }
    return std::nullopt;
}

inline PlacementDecision place(const Job& job, SimState& st, const SchedulerPolicy& policy, double now,
                               bool sequential = false) {
    const Topology& t = st.topo;
    const double nic = t.spec().link_rate_access_server;
    const bool check_congestion = job.cls == JobClass::DIW;

    struct Candidate {
        std::size_t idx;
        double start;
        double reserved;
    };
    const auto fits = [&](std::size_t idx) -> std::optional<Candidate> {
        const NodeId node = t.server(idx);
        const double start = std::max(st.ready_time(node, now), st.ready_time(t.access_of(node), now));
        const double budget = detail::compute_budget(job, start, sequential, nic);
        if (!(budget > 0)) return std::nullopt;
        const double r = job.compute_demand / budget;
        if (st.servers[idx].load + r > 1 + 1e-12) return std::nullopt;
        return Candidate{idx, start, r};
    };

    PlacementDecision d;
    d.reason = "infeasible";
    // Route check; fills the decision on success.
    const auto accept = [&](const Candidate& c) -> bool {
        Path ext;
        if (job.comm_external > 0 || check_congestion)
            ext = st.router.route(t.server(c.idx), t.gateway(), detail::flow_key(job, true));
        if (check_congestion && st.congested(ext, policy.congestion_threshold)) {
            d.reason = "congested";
            return false;
        }
        d.admit = true;
        d.server = c.idx;
        d.start = c.start;
        d.reserved = c.reserved;
        d.path_external = std::move(ext);
        return true;
    };

    // Awake (or waking) servers: most-loaded first, ties by lowest id.
    const auto before = [&](const Candidate& a, const Candidate& b) {
        if (policy.order == PlacementOrder::MostLoadedFirst && st.servers[a.idx].load != st.servers[b.idx].load)
            return st.servers[a.idx].load > st.servers[b.idx].load;
        return a.idx < b.idx;
    };
    std::vector<Candidate> feasible;
    std::optional<Candidate> best;
    for (std::size_t i = 0; i < st.servers.size(); ++i) {
        if (st.servers[i].power.target_mode() != PowerMode::Active) continue;
        auto c = fits(i);
        if (!c) continue;
        if (check_congestion)
            feasible.push_back(*c);
        else if (!best || before(*c, *best))
            best = c;
    }
    bool placed = false;
    if (check_congestion) {
        std::sort(feasible.begin(), feasible.end(), before);
        for (const auto& c : feasible)
            if ((placed = accept(c))) break;
    } else if (best) {
        placed = accept(*best);
    }
    // Otherwise wake the lowest-id sleeping server that can still make it.
    if (!placed) {
        for (std::size_t idx = 0; idx < st.servers.size(); ++idx) {
            if (st.servers[idx].power.target_mode() != PowerMode::Sleep) continue;
            auto c = fits(idx);
            if (c && accept(*c)) {
                d.wake = true;
                placed = true;
                break;
            }
        }
    }
    if (!placed) return d;
    d.reason = d.wake ? "wake" : "ok";
    if (job.comm_internal > 0) {
        const NodeId src = t.server(d.server);
        if (auto dst = pick_destination(st, src, job.id, now))
            d.path_internal = st.router.route(src, *dst, detail::flow_key(job, false));
    }
    return d;
}

struct TransitionRequest {
    NodeId node;
    PowerMode target;
    bool operator==(const TransitionRequest&) const = default;
};

/// A settled, awake server with no work, no wake pending and idle for at
/// least the timeout.
inline bool server_may_sleep(const SimState& st, const SchedulerPolicy& policy, std::size_t idx, double now) {
    const ServerState& s = st.servers[idx];
    if (s.power.mode != PowerMode::Active || s.power.pending || !s.idle() || s.wake_requested) return false;
    return now - s.idle_since + 1e-9 >= policy.idle_timeout;
}

/// An awake access switch whose whole rack sleeps and which carries no flow.
inline bool access_may_sleep(const SimState& st, NodeId acc) {
    const SwitchState& sw = st.switches[acc];
    if (sw.power.mode != PowerMode::Active || sw.power.pending || sw.wake_requested) return false;
    for (NodeId s : st.topo.servers_of(acc)) {
        const ServerState& ss = st.server_at(s);
        if (ss.power.mode != PowerMode::Sleep || ss.power.pending || ss.wake_requested || !ss.idle()) return false;
    }
    for (const auto& adj : st.topo.neighbors(acc)) {
        if (!st.network.flows_on(resource_of(adj.link, true)).empty() ||
            !st.network.flows_on(resource_of(adj.link, false)).empty())
            return false;
    }
    return true;
}

/// Sleep requests for idle servers and for access switches whose whole rack
/// sleeps with no traffic crossing them. Core and aggregation switches stay
/// on.
inline std::vector<TransitionRequest> dns_tick(const SimState& st, const SchedulerPolicy& policy, double now) {
    std::vector<TransitionRequest> out;
    if (!policy.dns()) return out;
    const Topology& t = st.topo;
    for (std::size_t i = 0; i < st.servers.size(); ++i)
        if (server_may_sleep(st, policy, i, now)) out.push_back({t.server(i), PowerMode::Sleep});
    for (std::size_t a = 0; a < t.access_count(); ++a)
        if (access_may_sleep(st, t.access(a))) out.push_back({t.access(a), PowerMode::Sleep});
    return out;
}

}  // namespace greendc
