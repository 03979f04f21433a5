#pragma once

// Flow-level network model: max-min fair sharing of directed link capacity.
//
// Each full-duplex link contributes two resources (one per direction). Rates
// are found by progressive filling: every unfrozen flow rises at the same
// level until some resource saturates, whose flows are then frozen.
//
// FlowNetwork recomputes only the part of the flow/resource graph a change
// can reach. Starting from the changed resources, it crosses a resource (pulls
// in every flow on it) only if that resource is saturated, either under the
// previous allocation or under the candidate new one; the candidate is
// re-solved until no further resource saturates. Unsaturated resources bind
// nobody, so flows beyond them keep their rates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "greendc/error.hpp"

namespace greendc {

using ResourceId = std::uint32_t;
using FlowId = std::uint32_t;

namespace detail {

/// Water-filling on a sub-problem in CSR form: flow i uses local resources
/// `idx[off[i] .. off[i+1])`; `capacity[r]` is what remains for these flows.
///
/// All unfrozen flows share one rising level, so resource r saturates when
/// the level reaches remaining[r] / unfrozen[r]. A lazy min-heap yields the
/// next resource to saturate; its unfrozen flows freeze at that level.
inline std::vector<double> water_fill_csr(std::span<const double> capacity, std::span<const std::uint32_t> off,
                                          std::span<const std::uint32_t> idx) {
    const std::size_t nr = capacity.size();
    const std::size_t nf = off.empty() ? 0 : off.size() - 1;
    std::vector<double> remaining(capacity.begin(), capacity.end());
    std::vector<std::uint32_t> unfrozen(nr, 0);
    for (auto r : idx) ++unfrozen[r];
    // Flows per resource, CSR.
    std::vector<std::uint32_t> roff(nr + 1, 0);
    for (std::size_t r = 0; r < nr; ++r) roff[r + 1] = roff[r] + unfrozen[r];
    std::vector<std::uint32_t> rflows(idx.size());
    {
        std::vector<std::uint32_t> fill(roff.begin(), roff.end() - 1);
        for (std::uint32_t f = 0; f < nf; ++f)
            for (auto k = off[f]; k < off[f + 1]; ++k) rflows[fill[idx[k]]++] = f;
    }
    struct Item {
        double key;
        std::uint32_t r;
        std::uint32_t version;
        bool operator>(const Item& o) const { return key != o.key ? key > o.key : r > o.r; }
    };
    std::vector<std::uint32_t> version(nr, 0);
    std::vector<Item> heap;
    heap.reserve(nr);
    const auto key_of = [&](std::size_t r) { return std::max(0.0, remaining[r]) / unfrozen[r]; };
    for (std::size_t r = 0; r < nr; ++r)
        if (unfrozen[r] > 0) heap.push_back({key_of(r), static_cast<std::uint32_t>(r), 0});
    std::make_heap(heap.begin(), heap.end(), std::greater<Item>());

    std::vector<double> rate(nf, 0.0);
    std::vector<char> frozen(nf, 0);
    std::size_t left = nf;
    std::vector<std::uint32_t> touched;
    while (left > 0) {
        if (heap.empty()) throw InvariantViolation("water_fill: flow without a constraining resource");
        std::pop_heap(heap.begin(), heap.end(), std::greater<Item>());
        const Item it = heap.back();
        heap.pop_back();
        if (it.version != version[it.r] || unfrozen[it.r] == 0) continue;
        const double level = it.key;
        touched.clear();
        for (auto k = roff[it.r]; k < roff[it.r + 1]; ++k) {
            const auto f = rflows[k];
            if (frozen[f]) continue;
            frozen[f] = 1;
            rate[f] = level;
            --left;
            for (auto j = off[f]; j < off[f + 1]; ++j) {
                const auto q = idx[j];
                remaining[q] -= level;
                --unfrozen[q];
                touched.push_back(q);
            }
        }
        for (auto q : touched) {
            if (unfrozen[q] == 0) continue;
            ++version[q];
            heap.push_back({key_of(q), q, version[q]});
            std::push_heap(heap.begin(), heap.end(), std::greater<Item>());
        }
    }
    return rate;
}

/// Same, with one resource list per flow.
inline std::vector<double> water_fill(std::span<const double> capacity,
                                      std::span<const std::vector<std::uint32_t>> flow_resources) {
    std::vector<std::uint32_t> off{0}, idx;
    for (const auto& f : flow_resources) {
        for (auto r : f) {
            if (r >= capacity.size()) throw std::out_of_range("water_fill: resource index");
            idx.push_back(r);
        }
        off.push_back(static_cast<std::uint32_t>(idx.size()));
    }
    return water_fill_csr(capacity, off, idx);
}

}  // namespace detail

/// Max-min fair rates for `flows` (each a list of resource ids) over
/// resources with the given capacities. Full recomputation.
inline std::vector<double> max_min_rates(std::span<const double> capacities,
                                         std::span<const std::vector<ResourceId>> flows) {
    for (const auto& f : flows) {
        if (f.empty()) throw std::invalid_argument("max_min_rates: flow with empty path");
        for (auto r : f)
            if (r >= capacities.size()) throw std::out_of_range("max_min_rates: resource id");
    }
    return detail::water_fill(capacities, flows);
}

struct FlowRecord {
    std::vector<ResourceId> resources;
    double total_bits = 0;
    double remaining_bits = 0;
    double sent_bits = 0;
    double rate = 0;
    double demand = 0;  // offered load, bits/s
    double last_update = 0;
    std::uint64_t owner = 0;
    std::uint32_t epoch = 0;
    bool active = false;
};

class FlowNetwork {
public:
    explicit FlowNetwork(std::vector<double> capacities)
        : capacity_(std::move(capacities)),
          flows_on_(capacity_.size()),
          demand_(capacity_.size(), 0.0) {}

    std::size_t resource_count() const { return capacity_.size(); }
    double capacity(ResourceId r) const { return capacity_.at(r); }
    /// Sum of flow demands crossing the resource.
    double offered(ResourceId r) const { return demand_.at(r); }
    std::span<const FlowId> flows_on(ResourceId r) const { return flows_on_.at(r); }
    const FlowRecord& flow(FlowId f) const { return flows_.at(f); }
    std::size_t active_flows() const { return active_count_; }

    double load(ResourceId r) const {
        double s = 0;
        for (auto f : flows_on_[r]) s += flows_[f].rate;
        return s;
    }

    FlowId add_flow(std::vector<ResourceId> resources, double bits, double demand, std::uint64_t owner, double now) {
        if (resources.empty()) throw std::invalid_argument("add_flow: empty path");
        if (!(bits > 0)) throw std::invalid_argument("add_flow: bits must be > 0");
        FlowId id;
        if (!free_.empty()) {
            id = free_.back();
            free_.pop_back();
        } else {
            id = static_cast<FlowId>(flows_.size());
            flows_.emplace_back();
        }
        FlowRecord& f = flows_[id];
        const std::uint32_t epoch = f.epoch + 1;
        f = FlowRecord{};
        f.epoch = epoch;
        f.resources = std::move(resources);
        f.total_bits = f.remaining_bits = bits;
        f.demand = demand;
        f.last_update = now;
        f.owner = owner;
        f.active = true;
        for (auto r : f.resources) {
            flows_on_.at(r).push_back(id);
            demand_[r] += demand;
            dirty_.push_back(r);
        }
        ++active_count_;
        return id;
    }

    /// Removes a flow, settling its progress up to `now` first.
    void remove_flow(FlowId id, double now) {
        FlowRecord& f = flows_.at(id);
        if (!f.active) throw std::logic_error("remove_flow: inactive flow");
        advance(f, now);
        for (auto r : f.resources) {
            auto& v = flows_on_[r];
            v.erase(std::find(v.begin(), v.end(), id));
            demand_[r] -= f.demand;
            if (v.empty()) demand_[r] = 0;
            dirty_.push_back(r);
        }
        f.active = false;
        f.rate = 0;
        ++f.epoch;
        free_.push_back(id);
        --active_count_;
    }

    /// Remove a flow at its drain event. A residual no larger than what one
    /// clock ulp at `now` moves is rounding in the event time, so it is credited.
    void complete_flow(FlowId id, double now) {
        FlowRecord& f = flows_.at(id);
        if (!f.active) throw std::logic_error("complete_flow: inactive flow");
        advance(f, now);
        const double slack = 4 * f.rate * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(now));
        if (std::abs(f.remaining_bits) <= slack) {
            f.sent_bits += f.remaining_bits;
            f.remaining_bits = 0;
        }
        remove_flow(id, now);
    }

    void set_capacity(ResourceId r, double cap) {
        if (!(cap > 0)) throw std::invalid_argument("set_capacity: capacity must be > 0");
        if (capacity_.at(r) == cap) return;
        capacity_[r] = cap;
        dirty_.push_back(r);
    }

    /// Brings the flow's byte accounting up to `now` at its current rate.
    void advance(FlowId id, double now) { advance(flows_.at(id), now); }

    /// Re-solves every part of the allocation reachable from resources
    /// changed since the last call. Returns flows whose rate changed; their
    /// epochs are bumped.
    std::vector<FlowId> recompute(double now) {
        std::vector<FlowId> changed;
        if (dirty_.empty()) return changed;

        ++visit_mark_;
        if (res_mark_.size() < capacity_.size()) {
            res_mark_.resize(capacity_.size(), 0);
            expanded_mark_.resize(capacity_.size(), 0);
            local_index_.resize(capacity_.size(), 0);
        }
        if (flow_mark_.size() < flows_.size()) flow_mark_.resize(flows_.size(), 0);

        // Component: flows pulled in, and every resource they touch (locals).
        std::vector<FlowId> comp_flows;
        std::vector<ResourceId> locals;
        std::vector<std::uint32_t> path_off{0}, path_idx;
        std::vector<ResourceId> pending;
        const auto touch = [&](ResourceId r) {
            if (res_mark_[r] == visit_mark_) return;
            res_mark_[r] = visit_mark_;
            local_index_[r] = static_cast<std::uint32_t>(locals.size());
            locals.push_back(r);
            // Saturated under the old allocation: a change may release it.
            if (saturated(r, load(r))) pending.push_back(r);
        };
        const auto expand = [&](ResourceId r) {
            if (expanded_mark_[r] == visit_mark_) return;
            expanded_mark_[r] = visit_mark_;
            touch(r);
            for (auto fid : flows_on_[r]) {
                if (flow_mark_[fid] == visit_mark_) continue;
                flow_mark_[fid] = visit_mark_;
                comp_flows.push_back(fid);
                for (auto q : flows_[fid].resources) {
                    touch(q);
                    path_idx.push_back(local_index_[q]);
                }
                path_off.push_back(static_cast<std::uint32_t>(path_idx.size()));
            }
        };
        const auto drain = [&] {
            while (!pending.empty()) {
                const ResourceId r = pending.back();
                pending.pop_back();
                expand(r);
            }
        };
        for (auto r : dirty_) expand(r);
        dirty_.clear();
        drain();

        std::vector<double> rates;
        for (;;) {
            if (comp_flows.empty()) return changed;
            // Capacity left after flows outside the component.
            std::vector<double> cap(locals.size());
            std::vector<double> outside(locals.size(), 0.0);
            for (std::size_t k = 0; k < locals.size(); ++k) {
                for (auto fid : flows_on_[locals[k]])
                    if (flow_mark_[fid] != visit_mark_) outside[k] += flows_[fid].rate;
                cap[k] = std::max(0.0, capacity_[locals[k]] - outside[k]);
            }
            rates = detail::water_fill_csr(cap, path_off, path_idx);
            // Any untouched local that the candidate saturates must join.
            std::vector<double> newload = outside;
            for (std::size_t i = 0; i < comp_flows.size(); ++i)
                for (auto k = path_off[i]; k < path_off[i + 1]; ++k) newload[path_idx[k]] += rates[i];
            for (std::size_t k = 0; k < locals.size(); ++k)
                if (expanded_mark_[locals[k]] != visit_mark_ && saturated(locals[k], newload[k]))
                    pending.push_back(locals[k]);
            if (pending.empty()) break;
            drain();
        }

        for (std::size_t i = 0; i < comp_flows.size(); ++i) {
            FlowRecord& f = flows_[comp_flows[i]];
            if (!(rates[i] > 0)) throw InvariantViolation("flow allocated a non-positive rate");
            if (rates[i] != f.rate) {
                advance(f, now);
                f.rate = rates[i];
                ++f.epoch;
                changed.push_back(comp_flows[i]);
            }
        }
        std::sort(changed.begin(), changed.end());
        for (auto r : locals) check_capacity(r);
        return changed;
    }

    void check_capacity(ResourceId r) const {
        const double l = load(r);
        if (l > capacity_[r] * (1 + 1e-9))
            throw InvariantViolation("resource " + std::to_string(r) + " over capacity: " + std::to_string(l) + " > " +
                                     std::to_string(capacity_[r]));
    }
    void check_all_capacities() const {
        for (ResourceId r = 0; r < capacity_.size(); ++r) check_capacity(r);
    }

    /// Seconds until the flow drains at its current rate, measured from `now`.
    double time_to_finish(FlowId id, double now) const {
        const FlowRecord& f = flows_.at(id);
        const double left = f.remaining_bits - f.rate * (now - f.last_update);
        return std::max(0.0, left) / f.rate;
    }

private:
    bool saturated(ResourceId r, double load) const { return load >= capacity_[r] * (1 - 1e-9); }

    static void advance(FlowRecord& f, double now) {
        const double dt = now - f.last_update;
        if (dt > 0) {
            const double bits = f.rate * dt;
            f.remaining_bits -= bits;
            f.sent_bits += bits;
        }
        f.last_update = std::max(f.last_update, now);
    }

    std::vector<double> capacity_;
    std::vector<std::vector<FlowId>> flows_on_;
    std::vector<double> demand_;
    std::vector<FlowRecord> flows_;
    std::vector<FlowId> free_;
    std::vector<ResourceId> dirty_;
    std::size_t active_count_ = 0;

    std::uint32_t visit_mark_ = 0;
    std::vector<std::uint32_t> res_mark_;
    std::vector<std::uint32_t> flow_mark_;
    std::vector<std::uint32_t> expanded_mark_;
    std::vector<std::uint32_t> local_index_;
};

}  // namespace greendc
