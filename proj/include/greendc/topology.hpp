#pragma once

// Data-center fabric construction and equal-cost routing.
//
// Three architectures are supported:
//   TwoTier      core <-> access <-> server, cores full-meshed
//   ThreeTier    core <-> aggregation <-> access <-> server
//   ThreeTierHS  ThreeTier with fewer, faster core/aggregation switches
//
// Node ids are assigned layer-major (core, aggregation, access, server) and
// links in a fixed wiring order, so two builds of the same description are identical.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "greendc/error.hpp"

namespace greendc {

using NodeId = std::uint32_t;
using LinkId = std::uint32_t;

inline constexpr double kGigabit = 1e9;

enum class Architecture { TwoTier, ThreeTier, ThreeTierHS };

inline std::string_view to_string(Architecture a) {
    switch (a) {
        case Architecture::TwoTier: return "2t";
        case Architecture::ThreeTier: return "3t";
        case Architecture::ThreeTierHS: return "3ths";
    }
    return "?";
}

inline Architecture parse_architecture(std::string_view s) {
    if (s == "2t" || s == "two_tier") return Architecture::TwoTier;
    if (s == "3t" || s == "three_tier") return Architecture::ThreeTier;
    if (s == "3ths" || s == "three_tier_hs") return Architecture::ThreeTierHS;
    throw ConfigError("unknown architecture '" + std::string(s) + "'");
}

/// Declarative fabric description.
///
/// `link_rate_agg_access` is the access-switch uplink rate: to aggregation
/// switches in the three-tier fabrics, straight to the cores in TwoTier.
/// `link_rate_core_core` is only used by TwoTier (the core full mesh).
struct ArchitectureSpec {
    Architecture kind = Architecture::ThreeTier;
    int core_count = 8;
    int agg_count = 8;
    int access_count = 512;
    int servers_per_access = 3;
    int agg_uplinks_per_access = 2;
    double link_rate_core_agg = 10 * kGigabit;
    double link_rate_agg_access = 1 * kGigabit;
    double link_rate_access_server = 1 * kGigabit;
    double link_rate_core_core = 10 * kGigabit;
    double link_delay = 10e-9;

    int server_count() const { return access_count * servers_per_access; }

    static ArchitectureSpec two_tier() {
        ArchitectureSpec s;
        s.kind = Architecture::TwoTier;
        s.core_count = 16;
        s.agg_count = 0;
        return s;
    }
    static ArchitectureSpec three_tier() { return ArchitectureSpec{}; }
    static ArchitectureSpec three_tier_hs() {
        ArchitectureSpec s;
        s.kind = Architecture::ThreeTierHS;
        s.core_count = 2;
        s.agg_count = 4;
        s.link_rate_core_agg = 100 * kGigabit;
        s.link_rate_agg_access = 10 * kGigabit;
        return s;
    }
    static ArchitectureSpec preset(Architecture a) {
        switch (a) {
            case Architecture::TwoTier: return two_tier();
            case Architecture::ThreeTier: return three_tier();
            case Architecture::ThreeTierHS: return three_tier_hs();
        }
        return three_tier();
    }

    void validate() const {
        if (core_count < 1) throw InvalidSpec("core_count", "must be >= 1");
        if (access_count < 1) throw InvalidSpec("access_count", "must be >= 1");
        if (servers_per_access < 1) throw InvalidSpec("servers_per_access", "must be >= 1");
        if (kind == Architecture::TwoTier) {
            if (agg_count != 0) throw InvalidSpec("agg_count", "must be 0 for TwoTier");
        } else {
            if (agg_count < 1) throw InvalidSpec("agg_count", "must be >= 1 for three-tier fabrics");
            if (agg_uplinks_per_access < 1 || agg_uplinks_per_access > agg_count)
                throw InvalidSpec("agg_uplinks_per_access", "must be in [1, agg_count]");
            if (agg_count % agg_uplinks_per_access != 0)
                throw InvalidSpec("agg_uplinks_per_access", "must divide agg_count");
        }
        auto positive = [](double v, const char* name) {
            if (!(v > 0)) throw InvalidSpec(name, "must be > 0");
        };
        positive(link_rate_core_agg, "link_rate_core_agg");
        positive(link_rate_agg_access, "link_rate_agg_access");
        positive(link_rate_access_server, "link_rate_access_server");
        positive(link_rate_core_core, "link_rate_core_core");
        if (!(link_delay >= 0)) throw InvalidSpec("link_delay", "must be >= 0");
    }
};

enum class NodeRole : std::uint8_t { Core, Aggregation, Access, Server };

inline std::string_view to_string(NodeRole r) {
    switch (r) {
        case NodeRole::Core: return "core";
        case NodeRole::Aggregation: return "aggregation";
        case NodeRole::Access: return "access";
        case NodeRole::Server: return "server";
    }
    return "?";
}

struct Node {
    NodeRole role;
    int layer;           // 0 core, 1 aggregation, 2 access, 3 server
    std::uint32_t rank;  // index within its role
};

/// Undirected full-duplex link. `a` is the endpoint closer to the core.
struct Link {
    NodeId a;
    NodeId b;
    double rate;
    double delay;

    NodeId other(NodeId n) const { return n == a ? b : a; }
};

/// Ordered hop sequence. `nodes` has one more entry than `links`.
struct Path {
    std::vector<NodeId> nodes;
    std::vector<LinkId> links;

    std::size_t hops() const { return links.size(); }
    NodeId source() const { return nodes.front(); }
    NodeId target() const { return nodes.back(); }
    bool operator==(const Path&) const = default;
};

class Topology {
public:
    struct Adjacent {
        NodeId node;
        LinkId link;
    };

    const ArchitectureSpec& spec() const { return spec_; }
    std::span<const Node> nodes() const { return nodes_; }
    std::span<const Link> links() const { return links_; }
    const Node& node(NodeId n) const { return nodes_.at(n); }
    const Link& link(LinkId l) const { return links_.at(l); }
    std::span<const Adjacent> neighbors(NodeId n) const { return adjacency_.at(n); }

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t link_count() const { return links_.size(); }
    std::size_t core_count() const { return static_cast<std::size_t>(spec_.core_count); }
    std::size_t agg_count() const { return static_cast<std::size_t>(spec_.agg_count); }
    std::size_t access_count() const { return static_cast<std::size_t>(spec_.access_count); }
    std::size_t server_count() const { return static_cast<std::size_t>(spec_.server_count()); }
    std::size_t switch_count() const { return core_count() + agg_count() + access_count(); }

    NodeId core(std::size_t i) const { return static_cast<NodeId>(i); }
    NodeId agg(std::size_t i) const { return static_cast<NodeId>(core_count() + i); }
    NodeId access(std::size_t i) const { return static_cast<NodeId>(core_count() + agg_count() + i); }
    NodeId server(std::size_t i) const { return static_cast<NodeId>(switch_count() + i); }
    NodeId first_server() const { return server(0); }

    bool is_server(NodeId n) const { return n >= first_server() && n < node_count(); }
    bool is_switch(NodeId n) const { return n < first_server(); }

    /// External traffic leaves through core switch 0.
    NodeId gateway() const { return core(0); }

    std::size_t server_index(NodeId n) const { return n - first_server(); }
    NodeId access_of(NodeId server_node) const {
        return access(server_index(server_node) / static_cast<std::size_t>(spec_.servers_per_access));
    }
    LinkId server_link(NodeId server_node) const { return server_link_.at(server_index(server_node)); }

    /// Servers attached to the given access switch (contiguous ids).
    std::vector<NodeId> servers_of(NodeId access_node) const {
        const std::size_t rack = access_node - access(0);
        const auto spa = static_cast<std::size_t>(spec_.servers_per_access);
        std::vector<NodeId> out;
        out.reserve(spa);
        for (std::size_t k = 0; k < spa; ++k) out.push_back(server(rack * spa + k));
        return out;
    }

    /// GraphViz export for inspection.
    void write_dot(std::ostream& os) const {
        os << "graph datacenter {\n";
        for (NodeId n = 0; n < nodes_.size(); ++n) {
            os << "  n" << n << " [label=\"" << to_string(nodes_[n].role) << ' ' << nodes_[n].rank
               << "\", layer=" << nodes_[n].layer << "];\n";
        }
        for (const auto& l : links_) {
            os << "  n" << l.a << " -- n" << l.b << " [rate=" << l.rate << "];\n";
        }
        os << "}\n";
    }

private:
    friend Topology build_topology(const ArchitectureSpec& spec);

    LinkId connect(NodeId a, NodeId b, double rate) {
        const auto id = static_cast<LinkId>(links_.size());
        links_.push_back(Link{a, b, rate, spec_.link_delay});
        adjacency_[a].push_back({b, id});
        adjacency_[b].push_back({a, id});
        return id;
    }

    ArchitectureSpec spec_;
    std::vector<Node> nodes_;
    std::vector<Link> links_;
    std::vector<std::vector<Adjacent>> adjacency_;
    std::vector<LinkId> server_link_;
};

inline Topology build_topology(const ArchitectureSpec& spec) {
    spec.validate();
    Topology t;
    t.spec_ = spec;
    const auto add_nodes = [&](NodeRole role, int layer, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i)
            t.nodes_.push_back(Node{role, layer, static_cast<std::uint32_t>(i)});
    };
    add_nodes(NodeRole::Core, 0, t.core_count());
    add_nodes(NodeRole::Aggregation, 1, t.agg_count());
    add_nodes(NodeRole::Access, 2, t.access_count());
    add_nodes(NodeRole::Server, 3, t.server_count());
    t.adjacency_.resize(t.nodes_.size());

    if (spec.kind == Architecture::TwoTier) {
        for (std::size_t i = 0; i < t.core_count(); ++i)
            for (std::size_t j = i + 1; j < t.core_count(); ++j)
                t.connect(t.core(i), t.core(j), spec.link_rate_core_core);
        for (std::size_t a = 0; a < t.access_count(); ++a)
            for (std::size_t c = 0; c < t.core_count(); ++c)
                t.connect(t.core(c), t.access(a), spec.link_rate_agg_access);
    } else {
        for (std::size_t g = 0; g < t.agg_count(); ++g)
            for (std::size_t c = 0; c < t.core_count(); ++c)
                t.connect(t.core(c), t.agg(g), spec.link_rate_core_agg);
        // Aggregation switches form pods of `agg_uplinks_per_access`; access
        // switches are split into contiguous blocks, one block per pod.
        const auto uplinks = static_cast<std::size_t>(spec.agg_uplinks_per_access);
        const std::size_t pods = t.agg_count() / uplinks;
        for (std::size_t a = 0; a < t.access_count(); ++a) {
            const std::size_t pod = a * pods / t.access_count();
            for (std::size_t k = 0; k < uplinks; ++k)
                t.connect(t.agg(pod * uplinks + k), t.access(a), spec.link_rate_agg_access);
        }
    }
    t.server_link_.reserve(t.server_count());
    for (std::size_t s = 0; s < t.server_count(); ++s)
        t.server_link_.push_back(t.connect(t.access_of(t.server(s)), t.server(s), spec.link_rate_access_server));
    return t;
}

namespace detail {

inline std::vector<int> bfs_distances(const Topology& t, NodeId from) {
    std::vector<int> dist(t.node_count(), -1);
    std::vector<NodeId> frontier{from};
    dist[from] = 0;
    for (std::size_t head = 0; head < frontier.size(); ++head) {
        const NodeId n = frontier[head];
        // Servers are leaves; never route through one.
        if (n != from && t.is_server(n)) continue;
        for (const auto& adj : t.neighbors(n)) {
            if (dist[adj.node] < 0) {
                dist[adj.node] = dist[n] + 1;
                frontier.push_back(adj.node);
            }
        }
    }
    return dist;
}

inline void enumerate_paths(const Topology& t, const std::vector<int>& dist_to_dst, NodeId at, NodeId dst,
                            Path& current, std::vector<Path>& out) {
    if (at == dst) {
        out.push_back(current);
        return;
    }
    for (const auto& adj : t.neighbors(at)) {
        if (dist_to_dst[adj.node] != dist_to_dst[at] - 1) continue;
        if (adj.node != dst && t.is_server(adj.node)) continue;
        current.nodes.push_back(adj.node);
        current.links.push_back(adj.link);
        enumerate_paths(t, dist_to_dst, adj.node, dst, current, out);
        current.nodes.pop_back();
        current.links.pop_back();
    }
}

inline void check_endpoint(const Topology& t, NodeId n) {
    if (n >= t.node_count() || (!t.is_server(n) && n != t.gateway()))
        throw std::invalid_argument("path endpoints must be servers or the gateway");
}

// splitmix64 finalizer; spreads sequential keys uniformly.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Every minimum-hop path from `src` to `dst`, in adjacency (DFS) order.
inline std::vector<Path> equal_cost_paths(const Topology& t, NodeId src, NodeId dst) {
    detail::check_endpoint(t, src);
    detail::check_endpoint(t, dst);
    if (src == dst) throw std::invalid_argument("source and destination coincide");
    const auto dist = detail::bfs_distances(t, dst);
    if (dist[src] < 0) throw Unreachable("node " + std::to_string(dst) + " unreachable from " + std::to_string(src));
    std::vector<Path> out;
    Path current;
    current.nodes.push_back(src);
    detail::enumerate_paths(t, dist, src, dst, current, out);
    if (out.empty()) throw Unreachable("no path found");
    return out;
}

/// ECMP hash selection: a pure function of the flow key.
inline const Path& select_path(std::span<const Path> paths, std::uint64_t flow_key) {
    if (paths.empty()) throw std::invalid_argument("select_path: empty path set");
    return paths[detail::mix64(flow_key) % paths.size()];
}

/// Routes without materializing path sets: per destination switch it caches
/// hop distances and shortest-path counts, then walks to the k-th path in
/// the same order `equal_cost_paths` enumerates them. Selection matches
/// `select_path(equal_cost_paths(t, src, dst), key)` exactly.
class Router {
public:
    explicit Router(const Topology& t) : topo_(&t) {}

    Path route(NodeId src, NodeId dst, std::uint64_t flow_key) {
        const Topology& t = *topo_;
        detail::check_endpoint(t, src);
        detail::check_endpoint(t, dst);
        if (src == dst) throw std::invalid_argument("source and destination coincide");
        // Every endpoint is a server or the gateway; only servers have a
        // fixed first/last hop to strip.
        const NodeId s_sw = t.is_server(src) ? t.access_of(src) : src;
        const NodeId d_sw = t.is_server(dst) ? t.access_of(dst) : dst;
        Path p;
        p.nodes.push_back(src);
        if (t.is_server(src)) {
            p.nodes.push_back(s_sw);
            p.links.push_back(t.server_link(src));
        }
        if (s_sw != d_sw) {
            const Table& tab = table(d_sw);
            if (tab.count[s_sw] == 0) throw Unreachable("switch " + std::to_string(d_sw) + " unreachable");
            std::uint64_t k = detail::mix64(flow_key) % tab.count[s_sw];
            for (NodeId at = s_sw; at != d_sw;) {
                for (const auto& adj : t.neighbors(at)) {
                    if (!tab.next_hop(t, at, adj.node, d_sw)) continue;
                    if (k < tab.count[adj.node]) {
                        p.nodes.push_back(adj.node);
                        p.links.push_back(adj.link);
                        at = adj.node;
                        break;
                    }
                    k -= tab.count[adj.node];
                }
            }
        }
        if (t.is_server(dst)) {
            p.nodes.push_back(dst);
            p.links.push_back(t.server_link(dst));
        }
        return p;
    }

    std::size_t path_count(NodeId src, NodeId dst) {
        const Topology& t = *topo_;
        const NodeId s_sw = t.is_server(src) ? t.access_of(src) : src;
        const NodeId d_sw = t.is_server(dst) ? t.access_of(dst) : dst;
        return s_sw == d_sw ? 1 : static_cast<std::size_t>(table(d_sw).count[s_sw]);
    }

private:
    struct Table {
        std::vector<int> dist;
        std::vector<std::uint64_t> count;  // shortest paths to the destination

        bool next_hop(const Topology& t, NodeId at, NodeId to, NodeId dst) const {
            return dist[to] == dist[at] - 1 && (to == dst || !t.is_server(to));
        }
    };

    const Table& table(NodeId dst) {
        auto it = cache_.find(dst);
        if (it != cache_.end()) return it->second;
        const Topology& t = *topo_;
        Table tab;
        tab.dist = detail::bfs_distances(t, dst);
        tab.count.assign(t.node_count(), 0);
        std::vector<NodeId> order;
        for (NodeId n = 0; n < t.node_count(); ++n)
            if (tab.dist[n] >= 0) order.push_back(n);
        std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) { return tab.dist[a] < tab.dist[b]; });
        for (NodeId n : order) {
            if (n == dst) {
                tab.count[n] = 1;
                continue;
            }
            if (t.is_server(n)) continue;
            for (const auto& adj : t.neighbors(n))
                if (tab.next_hop(t, n, adj.node, dst)) tab.count[n] += tab.count[adj.node];
        }
        return cache_.emplace(dst, std::move(tab)).first->second;
    }

    const Topology* topo_;
    std::unordered_map<NodeId, Table> cache_;
};

}  // namespace greendc
