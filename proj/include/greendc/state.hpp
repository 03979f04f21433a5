#pragma once

// The mutable world of one simulation run: per-server load and power
// state, per-switch port counts, link operating rates, active flows and
// jobs. Power draw per component class is cached and refreshed whenever a
// component changes, so energy integration between events is O(1).

#include <array>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "greendc/error.hpp"
#include "greendc/ledger.hpp"
#include "greendc/network.hpp"
#include "greendc/power.hpp"
#include "greendc/topology.hpp"
#include "greendc/workload.hpp"

namespace greendc {

enum class Scheme { None, DVFS, DNS, DVFS_DNS };

inline std::string_view to_string(Scheme s) {
    switch (s) {
        case Scheme::None: return "none";
        case Scheme::DVFS: return "dvfs";
        case Scheme::DNS: return "dns";
        case Scheme::DVFS_DNS: return "dvfs+dns";
    }
    return "?";
}

inline Scheme parse_scheme(std::string_view s) {
    if (s == "none") return Scheme::None;
    if (s == "dvfs") return Scheme::DVFS;
    if (s == "dns") return Scheme::DNS;
    if (s == "dvfs+dns" || s == "dvfs_dns") return Scheme::DVFS_DNS;
    throw ConfigError("unknown scheme '" + std::string(s) + "'");
}

enum class PlacementOrder { MostLoadedFirst, FirstFit };

struct SchedulerPolicy {
    Scheme scheme = Scheme::None;
    double congestion_threshold = 0.9;
    double idle_timeout = 1.0;
    double dvfs_headroom = 0.25;
    double f_min = 0.1;
    double link_headroom = kDefaultLinkHeadroom;
    double transition_time = kDefaultTransitionTime;
    PlacementOrder order = PlacementOrder::MostLoadedFirst;

    bool dvfs() const { return scheme == Scheme::DVFS || scheme == Scheme::DVFS_DNS; }
    bool dns() const { return scheme == Scheme::DNS || scheme == Scheme::DVFS_DNS; }

    void validate() const {
        if (!(congestion_threshold > 0 && congestion_threshold <= 1))
            throw InvalidSpec("policy.congestion_threshold", "must be in (0, 1]");
        if (!(idle_timeout >= 0)) throw InvalidSpec("policy.idle_timeout", "must be >= 0");
        if (!(dvfs_headroom >= 0)) throw InvalidSpec("policy.dvfs_headroom", "must be >= 0");
        if (!(f_min > 0 && f_min <= 1)) throw InvalidSpec("policy.f_min", "must be in (0, 1]");
        if (!(link_headroom >= 1)) throw InvalidSpec("policy.link_headroom", "must be >= 1");
        if (!(transition_time >= 0)) throw InvalidSpec("policy.transition_time", "must be >= 0");
    }
};

struct PowerConfig {
    ServerPowerParams server;
    SwitchPowerParams core = SwitchPowerParams::core_default();
    SwitchPowerParams aggregation = SwitchPowerParams::aggregation_default();
    SwitchPowerParams access = SwitchPowerParams::access_default();

    static PowerConfig defaults_for(Architecture a) {
        PowerConfig c;
        if (a == Architecture::ThreeTierHS) c.core = SwitchPowerParams::core_high_speed_default();
        return c;
    }

    const SwitchPowerParams& for_role(NodeRole r) const {
        switch (r) {
            case NodeRole::Core: return core;
            case NodeRole::Aggregation: return aggregation;
            default: return access;
        }
    }

    void validate() const {
        server.validate();
        core.validate("power.core");
        aggregation.validate("power.aggregation");
        access.validate("power.access");
    }
};

struct ServerState {
    PowerState power;
    double load = 0;                     // committed reserved rate, at f = 1
    std::vector<std::size_t> jobs;       // assigned, compute not finished
    std::size_t running = 0;             // of which started
    int flow_endpoints = 0;
    double idle_since = 0;
    double last_advance = 0;
    std::uint32_t epoch = 0;
    double served_work = 0;
    double power_w = 0;
    bool wake_requested = false;

    bool idle() const { return jobs.empty() && flow_endpoints == 0; }
};

struct SwitchState {
    PowerState power;
    PortCounts ports;
    double power_w = 0;
    bool wake_requested = false;
};

struct JobRun {
    Job job;
    std::size_t server = 0;  // server index
    double reserved = 0;
    double remaining = 0;
    double start = 0;
    bool started = false;
    bool compute_done = false;
    int flows_left = 0;
    bool finished = false;
    double finish = 0;
};

inline ComponentClass class_of(NodeRole r) {
    switch (r) {
        case NodeRole::Core: return ComponentClass::Core;
        case NodeRole::Aggregation: return ComponentClass::Aggregation;
        case NodeRole::Access: return ComponentClass::Access;
        case NodeRole::Server: return ComponentClass::Servers;
    }
    return ComponentClass::Servers;
}

/// Directed resource of a link: 0 is a->b (toward the servers), 1 is b->a.
inline ResourceId resource_of(LinkId l, bool downward) { return l * 2 + (downward ? 0 : 1); }

class SimState {
public:
    SimState(Topology topology, PowerConfig power_cfg, SchedulerPolicy pol)
        : topo_ptr_(std::make_shared<const Topology>(std::move(topology))),
          topo(*topo_ptr_),
          router(*topo_ptr_),
          power(std::move(power_cfg)),
          policy(pol),
          network(initial_capacities(*topo_ptr_)) {
        power.validate();
        policy.validate();
        servers.resize(topo.server_count());
        switches.resize(topo.switch_count());
        link_rate.resize(topo.link_count());
        for (LinkId l = 0; l < topo.link_count(); ++l) link_rate[l] = topo.link(l).rate;
        for (auto& s : servers) s.power.setpoint = policy.dvfs() ? dvfs_floor() : 1.0;
        for (LinkId l = 0; l < topo.link_count(); ++l) {
            if (policy.dvfs()) {
                const double r = dvs_link_rate(0.0, dvs_tiers(topo.link(l).rate), policy.link_headroom);
                link_rate[l] = r;
                network.set_capacity(resource_of(l, true), r);
                network.set_capacity(resource_of(l, false), r);
            }
            add_port(l, +1);
        }
        recompute_power_totals();
        awake_servers = topo.server_count();
    }

    SimState(const SimState&) = delete;
    SimState& operator=(const SimState&) = delete;

private:
    std::shared_ptr<const Topology> topo_ptr_;

public:
    const Topology& topo;
    Router router;
    PowerConfig power;
    SchedulerPolicy policy;
    FlowNetwork network;
    std::vector<ServerState> servers;    // by server index
    std::vector<SwitchState> switches;   // by node id
    std::vector<double> link_rate;       // current operating rate
    std::vector<JobRun> jobs;
    double clock = 0;
    std::array<double, kComponentClasses> class_power{};
    std::size_t awake_servers = 0;

    ServerState& server_at(NodeId n) { return servers.at(topo.server_index(n)); }
    const ServerState& server_at(NodeId n) const { return servers.at(topo.server_index(n)); }

    const PowerState& power_of(NodeId n) const {
        return topo.is_server(n) ? server_at(n).power : switches.at(n).power;
    }

    double dvfs_floor() const { return policy.f_min; }

    /// Offered load on the busier direction relative to the link's top rate.
    double utilization(LinkId l) const {
        const double off = std::max(network.offered(resource_of(l, true)), network.offered(resource_of(l, false)));
        return off / topo.link(l).rate;
    }

    bool congested(const Path& p, double threshold) const {
        for (auto l : p.links)
            if (utilization(l) > threshold) return true;
        return false;
    }

    std::vector<ResourceId> resources_of(const Path& p) const {
        std::vector<ResourceId> out;
        out.reserve(p.links.size());
        for (std::size_t i = 0; i < p.links.size(); ++i)
            out.push_back(resource_of(p.links[i], topo.link(p.links[i]).a == p.nodes[i]));
        return out;
    }

    /// Earliest time the node can serve work if it is (or is about to be)
    /// woken now.
    double ready_time(NodeId n, double now) const {
        const PowerState& ps = power_of(n);
        if (ps.target_mode() == PowerMode::Active) return ps.pending ? std::max(now, ps.transition_until) : now;
        // Sleeping or going to sleep: a wake can only follow a settled sleep.
        const double settled = ps.pending ? std::max(now, ps.transition_until) : now;
        return settled + policy.transition_time;
    }

    double server_power_now(const ServerState& s) const {
        return server_power(power.server, s.power, s.running > 0 ? s.power.setpoint : 0.0);
    }

    void refresh_server(std::size_t idx) {
        ServerState& s = servers[idx];
        const double w = server_power_now(s);
        class_power[0] += w - s.power_w;
        s.power_w = w;
    }

    void refresh_switch(NodeId n) {
        SwitchState& sw = switches[n];
        const NodeRole role = topo.node(n).role;
        const double w = switch_power(power.for_role(role), sw.ports, sw.power);
        class_power[static_cast<std::size_t>(class_of(role))] += w - sw.power_w;
        sw.power_w = w;
    }

    /// Full recomputation of cached powers (drops accumulated rounding).
    void recompute_power_totals() {
        class_power = {};
        for (std::size_t i = 0; i < servers.size(); ++i) {
            servers[i].power_w = server_power_now(servers[i]);
            class_power[0] += servers[i].power_w;
        }
        for (NodeId n = 0; n < switches.size(); ++n) {
            const NodeRole role = topo.node(n).role;
            switches[n].power_w = switch_power(power.for_role(role), switches[n].ports, switches[n].power);
            class_power[static_cast<std::size_t>(class_of(role))] += switches[n].power_w;
        }
    }

    bool link_active(LinkId l) const {
        const Link& k = topo.link(l);
        return power_of(k.a).mode == PowerMode::Active && power_of(k.b).mode == PowerMode::Active;
    }

    /// Adds (+1) or removes (-1) the link's ports from its switch endpoints
    /// at the current operating rate, if the link is active.
    void add_port(LinkId l, int delta) {
        if (!link_active(l)) return;
        const Link& k = topo.link(l);
        for (NodeId end : {k.a, k.b}) {
            if (!topo.is_switch(end)) continue;
            auto& ports = switches[end].ports;
            auto it = detail::find_rate(ports, link_rate[l]);
            if (it == ports.end()) it = ports.emplace(link_rate[l], 0).first;
            it->second += delta;
            if (it->second == 0) ports.erase(it);
        }
    }

    void refresh_link_endpoints(LinkId l) {
        const Link& k = topo.link(l);
        for (NodeId end : {k.a, k.b})
            if (topo.is_switch(end)) refresh_switch(end);
    }

    /// Changes a link's DVS operating rate.
    void set_link_rate(LinkId l, double rate) {
        if (link_rate[l] == rate) return;
        add_port(l, -1);
        link_rate[l] = rate;
        add_port(l, +1);
        network.set_capacity(resource_of(l, true), rate);
        network.set_capacity(resource_of(l, false), rate);
        refresh_link_endpoints(l);
    }

    /// Applies a new current mode to a node, keeping port counts and cached
    /// power consistent.
    void set_mode(NodeId n, PowerMode m) {
        for (const auto& adj : topo.neighbors(n)) add_port(adj.link, -1);
        if (topo.is_server(n)) {
            auto& s = server_at(n);
            if (s.power.mode != m) {
                if (m == PowerMode::Active)
                    ++awake_servers;
                else
                    --awake_servers;
            }
            s.power.mode = m;
            s.power.pending.reset();
            refresh_server(topo.server_index(n));
        } else {
            switches[n].power.mode = m;
            switches[n].power.pending.reset();
        }
        for (const auto& adj : topo.neighbors(n)) {
            add_port(adj.link, +1);
            refresh_link_endpoints(adj.link);
        }
        if (topo.is_switch(n)) refresh_switch(n);
    }

private:
    static std::vector<double> initial_capacities(const Topology& t) {
        std::vector<double> caps(t.link_count() * 2);
        for (LinkId l = 0; l < t.link_count(); ++l) caps[2 * l] = caps[2 * l + 1] = t.link(l).rate;
        return caps;
    }
};

}  // namespace greendc
