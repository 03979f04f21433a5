#pragma once

// Discrete-event core. Events are ordered by (time, sequence number), the
// sequence being assigned when an event is scheduled. Events carry the
// epoch of the object they refer to; a later change to that object bumps
// its epoch and the older event is dropped on arrival.
//
// Power is cached per component class and only changes at events, so energy
// is integrated exactly (piecewise constant) between consecutive events.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <queue>
#include <string>
#include <vector>

#include "greendc/config.hpp"
#include "greendc/ledger.hpp"
#include "greendc/metrics.hpp"
#include "greendc/scheduler.hpp"
#include "greendc/state.hpp"

namespace greendc {

enum class EventKind : std::uint8_t {
    JobArrival,
    JobStart,
    ComputePhaseEnd,
    FlowRateRecompute,
    TransferEnd,
    TransitionComplete,
    DnsTick,
    StatsSample,
    SimEnd,
};

inline const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::JobArrival: return "arrival";
        case EventKind::JobStart: return "start";
        case EventKind::ComputePhaseEnd: return "compute_end";
        case EventKind::FlowRateRecompute: return "recompute";
        case EventKind::TransferEnd: return "transfer_end";
        case EventKind::TransitionComplete: return "transition";
        case EventKind::DnsTick: return "dns_tick";
        case EventKind::StatsSample: return "sample";
        case EventKind::SimEnd: return "end";
    }
    return "?";
}

struct Event {
    double time = 0;
    std::uint64_t seq = 0;
    EventKind kind = EventKind::SimEnd;
    std::uint64_t a = 0;  // job, server index, flow or node id
    std::uint32_t b = 0;  // epoch

    bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
};

/// 64-bit FNV-1a.
class TraceHash {
public:
    void add(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= p[i];
            h_ *= 0x100000001b3ULL;
        }
    }
    template <typename T>
    void add_value(T v) {
        add(&v, sizeof v);
    }
    void add_event(const Event& e) {
        std::uint64_t bits;
        std::memcpy(&bits, &e.time, sizeof bits);
        add_value(bits);
        add_value(static_cast<std::uint8_t>(e.kind));
        add_value(e.a);
        add_value(e.b);
    }
    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

/// Total reservation of the server's started jobs.
inline double running_reservation(const SimState& st, std::size_t server) {
    double total = 0;
    for (auto j : st.servers[server].jobs)
        if (st.jobs[j].started) total += st.jobs[j].reserved;
    return total;
}

/// Serves `dt` seconds on one server at its current setpoint f. Jobs share
/// f in proportion to their reservations, so each job runs at least at the
/// rate it reserved whenever f covers the committed load.
inline void advance_compute(SimState& st, std::size_t server, double dt) {
    ServerState& s = st.servers[server];
    if (!(dt > 0) || s.running == 0) return;
    const double f = s.power.setpoint;
    const double total = running_reservation(st, server);
    for (auto j : s.jobs) {
        JobRun& r = st.jobs[j];
        if (r.started) r.remaining -= f * dt * r.reserved / total;
    }
    s.served_work += f * dt;
}

/// Adds `dt` seconds at the current cached power of every component class.
inline void integrate_energy(const SimState& st, double dt, EnergyLedger& ledger) {
    if (!(dt > 0)) return;
    for (std::size_t c = 0; c < kComponentClasses; ++c)
        ledger.add_joules(static_cast<ComponentClass>(c), st.class_power[c] * dt);
}

struct RunOptions {
    std::ostream* trace = nullptr;  // event trace CSV
    std::ostream* audit = nullptr;  // placement decisions CSV
};

class Simulation {
public:
    Simulation(const ScenarioConfig& cfg, std::vector<Job> jobs, RunOptions opts = {})
        : cfg_(cfg),
          st_(build_topology(cfg.architecture), cfg.power, cfg.policy),
          arrivals_(std::move(jobs)),
          opts_(opts) {
        cfg_.validate();
        for (std::size_t i = 1; i < arrivals_.size(); ++i)
            if (!(arrivals_[i].arrival >= arrivals_[i - 1].arrival))
                throw ConfigError("job arrivals must be nondecreasing");
    }

    const SimState& state() const { return st_; }

    SimReport run() {
        if (opts_.trace) *opts_.trace << "time,seq,kind,a,b\n";
        if (opts_.audit) *opts_.audit << "job,server,admit,reason\n";
        if (!arrivals_.empty() && arrivals_[0].arrival < cfg_.horizon)
            schedule(arrivals_[0].arrival, EventKind::JobArrival, 0);
        schedule(0.0, EventKind::StatsSample, 0);
        schedule(cfg_.horizon, EventKind::SimEnd, 0);
        if (st_.policy.dns())
            for (std::size_t i = 0; i < st_.servers.size(); ++i)
                schedule(st_.policy.idle_timeout, EventKind::DnsTick, st_.topo.server(i));

        while (!queue_.empty()) {
            const Event ev = queue_.top();
            queue_.pop();
            if (ev.time < st_.clock) throw InvariantViolation("event scheduled in the past");
            integrate(ev.time);
            st_.clock = ev.time;
            if (!dispatch(ev)) continue;
            hash_.add_event(ev);
            ++diag_.events;
            if (opts_.trace) {
                char buf[160];
                std::snprintf(buf, sizeof buf, "%.17g,%llu,%s,%llu,%u\n", ev.time,
                              static_cast<unsigned long long>(ev.seq), to_string(ev.kind),
                              static_cast<unsigned long long>(ev.a), ev.b);
                *opts_.trace << buf;
            }
        }
        integrate(std::max(st_.clock, cfg_.horizon));
        return finish_report();
    }

private:
    // ---- scheduling ------------------------------------------------------

    void schedule(double t, EventKind k, std::uint64_t a, std::uint32_t b = 0) {
        queue_.push(Event{t, next_seq_++, k, a, b});
    }

    void integrate(double now) {
        const double lo = std::max(last_t_, cfg_.warmup);
        const double hi = std::min(now, cfg_.horizon);
        if (hi > lo) {
            const double dt = hi - lo;
            integrate_energy(st_, dt, ledger_);
            awake_integral_.add(static_cast<double>(st_.awake_servers) * dt);
        }
        last_t_ = std::max(last_t_, now);
    }

    double now() const { return st_.clock; }

    bool dispatch(const Event& ev) {
        switch (ev.kind) {
            case EventKind::JobArrival: on_arrival(ev.a); return true;
            case EventKind::JobStart: start_job(ev.a); return true;
            case EventKind::ComputePhaseEnd: return on_compute_end(ev.a, ev.b);
            case EventKind::FlowRateRecompute: recompute_flows(); return true;
            case EventKind::TransferEnd: return on_transfer_end(static_cast<FlowId>(ev.a), ev.b);
            case EventKind::TransitionComplete: return settle_node(static_cast<NodeId>(ev.a));
            case EventKind::DnsTick: return on_dns_tick(static_cast<NodeId>(ev.a));
            case EventKind::StatsSample: on_sample(); return true;
            case EventKind::SimEnd: ended_ = true; return true;
        }
        return false;
    }

    // ---- jobs ------------------------------------------------------------

    void on_arrival(std::size_t k) {
        if (k + 1 < arrivals_.size() && arrivals_[k + 1].arrival < cfg_.horizon)
            schedule(arrivals_[k + 1].arrival, EventKind::JobArrival, k + 1);
        const Job& job = arrivals_[k];
        PlacementDecision d = place(job, st_, st_.policy, now(), cfg_.sequential_phases);
        if (opts_.audit) {
            *opts_.audit << job.id << ',';
            if (d.admit)
                *opts_.audit << st_.topo.server(d.server);
            *opts_.audit << ',' << (d.admit ? 1 : 0) << ',' << d.reason << '\n';
        }
        if (!d.admit) {
            ++sla_.rejected;
            return;
        }
        ++sla_.admitted;
        diag_.work_admitted += job.compute_demand;

        JobRun run;
        run.job = job;
        run.server = d.server;
        run.reserved = d.reserved;
        run.remaining = job.compute_demand;
        run.start = d.start;
        const std::size_t idx = st_.jobs.size();
        st_.jobs.push_back(run);

        const NodeId node = st_.topo.server(d.server);
        ServerState& s = st_.servers[d.server];
        if (cfg_.check_invariants && s.load + d.reserved > 1 + 1e-9)
            throw InvariantViolation("admission exceeds server capacity");
        advance_server(d.server);
        s.jobs.push_back(idx);
        s.load += d.reserved;
        if (d.wake) {
            request_wake(node);
            request_wake(st_.topo.access_of(node));
        }
        set_frequency(d.server);
        if (d.start <= now())
            start_job(idx);
        else
            schedule(d.start, EventKind::JobStart, idx);
    }

    void start_job(std::size_t idx) {
        JobRun& run = st_.jobs[idx];
        const NodeId node = st_.topo.server(run.server);
        const NodeId acc = st_.topo.access_of(node);
        settle_node(node);
        settle_node(acc);
        if (!st_.servers[run.server].power.available(now()) || !st_.switches[acc].power.available(now()))
            throw InvariantViolation("job " + std::to_string(run.job.id) + " starts on an unavailable server");
        advance_server(run.server);
        run.started = true;
        ++st_.servers[run.server].running;
        st_.refresh_server(run.server);
        reschedule_compute(run.server);
        if (!cfg_.sequential_phases) start_flows(idx);
    }

    void advance_server(std::size_t i) {
        ServerState& s = st_.servers[i];
        const double dt = now() - s.last_advance;
        s.last_advance = now();
        advance_compute(st_, i, dt);
    }

    void reschedule_compute(std::size_t i) {
        ServerState& s = st_.servers[i];
        ++s.epoch;
        if (s.running == 0) return;
        const double f = s.power.setpoint;
        const double total = running_reservation(st_, i);
        double first = std::numeric_limits<double>::infinity();
        for (auto j : s.jobs) {
            const JobRun& r = st_.jobs[j];
            if (r.started) first = std::min(first, std::max(0.0, r.remaining) * total / (f * r.reserved));
        }
        schedule(now() + first, EventKind::ComputePhaseEnd, i, s.epoch);
    }

    /// DVFS: pick the setpoint for the server's committed load.
    void set_frequency(std::size_t i) {
        if (!st_.policy.dvfs()) return;
        ServerState& s = st_.servers[i];
        const double f = dvfs_setpoint(s.load, st_.policy.dvfs_headroom, st_.policy.f_min);
        if (f == s.power.setpoint) return;
        advance_server(i);
        s.power.setpoint = f;
        st_.refresh_server(i);
        reschedule_compute(i);
    }

    bool on_compute_end(std::size_t i, std::uint32_t epoch) {
        ServerState& s = st_.servers[i];
        if (epoch != s.epoch) return false;
        advance_server(i);
        std::vector<std::size_t> done;
        for (auto j : s.jobs) {
            const JobRun& r = st_.jobs[j];
            if (r.started && r.remaining <= 1e-9 * std::max(1.0, r.job.compute_demand)) done.push_back(j);
        }
        if (done.empty()) throw InvariantViolation("compute phase end with no finished job");
        for (auto j : done) {
            JobRun& r = st_.jobs[j];
            r.remaining = 0;
            r.compute_done = true;
            s.jobs.erase(std::find(s.jobs.begin(), s.jobs.end(), j));
            --s.running;
            s.load = s.jobs.empty() ? 0.0 : std::max(0.0, s.load - r.reserved);
        }
        st_.refresh_server(i);
        reschedule_compute(i);
        set_frequency(i);
        for (auto j : done) {
            if (cfg_.sequential_phases) start_flows(j);
            maybe_finish(j);
        }
        check_idle(i);
        return true;
    }

    void maybe_finish(std::size_t j) {
        JobRun& r = st_.jobs[j];
        if (r.finished || !r.compute_done || r.flows_left > 0) return;
        r.finished = true;
        r.finish = now();
        if (r.finish <= r.job.deadline * (1 + 1e-12) + 1e-12)
            ++sla_.completed;
        else
            ++sla_.deadline_missed;
    }

    // ---- flows -----------------------------------------------------------

    struct FlowMeta {
        std::size_t job = 0;
        std::size_t src = 0;  // server index
        std::optional<std::size_t> dst;
        std::vector<LinkId> links;
    };

    void start_flows(std::size_t idx) {
        JobRun& run = st_.jobs[idx];
        const NodeId src = st_.topo.server(run.server);
        double bits_int = run.job.comm_internal * 8.0;
        double bits_ext = run.job.comm_external * 8.0;
        std::optional<NodeId> dst;
        if (bits_int > 0) {
            dst = pick_destination(st_, src, run.job.id, now());
            if (!dst) {
                bits_ext += bits_int;
                bits_int = 0;
            }
        }
        const double budget = std::max(run.job.deadline - now(), 1e-9);
        if (bits_int > 0) add_flow(idx, st_.router.route(src, *dst, detail::flow_key(run.job, false)), bits_int, budget, dst);
        if (bits_ext > 0)
            add_flow(idx, st_.router.route(src, st_.topo.gateway(), detail::flow_key(run.job, true)), bits_ext, budget,
                     std::nullopt);
    }

    void add_flow(std::size_t job, const Path& path, double bits, double budget, std::optional<NodeId> dst) {
        const FlowId fid = st_.network.add_flow(st_.resources_of(path), bits, bits / budget, job, now());
        if (meta_.size() <= fid) meta_.resize(fid + 1);
        FlowMeta& m = meta_[fid];
        m.job = job;
        m.src = st_.jobs[job].server;
        m.dst = dst ? std::optional<std::size_t>(st_.topo.server_index(*dst)) : std::nullopt;
        m.links = path.links;
        ++st_.jobs[job].flows_left;
        ++st_.servers[m.src].flow_endpoints;
        if (m.dst) ++st_.servers[*m.dst].flow_endpoints;
        retier(m.links);
        request_recompute();
    }

    /// DVS: re-tier each link to its offered load.
    void retier(const std::vector<LinkId>& links) {
        if (!st_.policy.dvfs()) return;
        for (auto l : links) {
            const double top = st_.topo.link(l).rate;
            st_.set_link_rate(l, dvs_link_rate(st_.utilization(l), dvs_tiers(top), st_.policy.link_headroom));
        }
    }

    void request_recompute() {
        if (recompute_pending_) return;
        recompute_pending_ = true;
        schedule(now(), EventKind::FlowRateRecompute, 0);
    }

    void recompute_flows() {
        recompute_pending_ = false;
        const auto changed = st_.network.recompute(now());
        for (auto fid : changed) {
            const FlowRecord& f = st_.network.flow(fid);
            schedule(now() + st_.network.time_to_finish(fid, now()), EventKind::TransferEnd, fid, f.epoch);
            for (auto r : f.resources)
                diag_.max_link_load = std::max(diag_.max_link_load, st_.network.load(r) / st_.network.capacity(r));
        }
    }

    bool on_transfer_end(FlowId fid, std::uint32_t epoch) {
        const FlowRecord& f = st_.network.flow(fid);
        if (!f.active || f.epoch != epoch) return false;
        st_.network.complete_flow(fid, now());
        const FlowRecord& done = st_.network.flow(fid);
        diag_.max_byte_error = std::max(diag_.max_byte_error, std::abs(done.sent_bits - done.total_bits) / done.total_bits);
        ++diag_.flows_completed;
        const FlowMeta m = meta_[fid];
        --st_.servers[m.src].flow_endpoints;
        if (m.dst) --st_.servers[*m.dst].flow_endpoints;
        retier(m.links);
        request_recompute();
        --st_.jobs[m.job].flows_left;
        maybe_finish(m.job);
        check_idle(m.src);
        if (m.dst) check_idle(*m.dst);
        return true;
    }

    // ---- power states ----------------------------------------------------

    PowerState& power_ref(NodeId n) {
        return st_.topo.is_server(n) ? st_.server_at(n).power : st_.switches[n].power;
    }
    bool& wake_flag(NodeId n) {
        return st_.topo.is_server(n) ? st_.server_at(n).wake_requested : st_.switches[n].wake_requested;
    }

    void begin_transition(NodeId n, PowerMode target) {
        PowerState& ps = power_ref(n);
        ps = request_transition(ps, target, now(), st_.policy.transition_time);
        schedule(ps.transition_until, EventKind::TransitionComplete, n);
    }

    void request_wake(NodeId n) {
        const PowerState& ps = power_ref(n);
        if (ps.target_mode() == PowerMode::Active) return;
        if (ps.pending)
            wake_flag(n) = true;  // re-woken once the sleep settles
        else
            begin_transition(n, PowerMode::Active);
    }

    /// Applies a due transition. Returns false when there was none.
    bool settle_node(NodeId n) {
        PowerState& ps = power_ref(n);
        if (!ps.pending || now() < ps.transition_until) return false;
        const PowerMode m = *ps.pending;
        st_.set_mode(n, m);
        if (m == PowerMode::Sleep) {
            if (wake_flag(n)) {
                wake_flag(n) = false;
                begin_transition(n, PowerMode::Active);
            } else if (st_.topo.is_server(n) && st_.policy.dns()) {
                schedule(now(), EventKind::DnsTick, st_.topo.access_of(n));
            }
        } else if (st_.topo.is_server(n)) {
            check_idle(st_.topo.server_index(n));
        }
        return true;
    }

    void check_idle(std::size_t i) {
        ServerState& s = st_.servers[i];
        if (!s.idle()) return;
        s.idle_since = now();
        if (st_.policy.dns() && !ended_)
            schedule(now() + st_.policy.idle_timeout, EventKind::DnsTick, st_.topo.server(i));
    }

    bool on_dns_tick(NodeId n) {
        if (ended_ || !st_.policy.dns()) return false;
        if (st_.topo.is_server(n)) {
            if (!server_may_sleep(st_, st_.policy, st_.topo.server_index(n), now())) return false;
        } else if (st_.topo.node(n).role != NodeRole::Access || !access_may_sleep(st_, n)) {
            return false;
        }
        begin_transition(n, PowerMode::Sleep);
        return true;
    }

    void on_sample() {
        st_.recompute_power_totals();
        PowerSample p;
        p.time = now();
        p.watts = st_.class_power;
        p.awake_servers = st_.awake_servers;
        series_.push_back(p);
        const double next = now() + cfg_.stats_interval;
        if (next <= cfg_.horizon) schedule(next, EventKind::StatsSample, 0);
    }

    // ---- results ---------------------------------------------------------

    SimReport finish_report() {
        double served = 0;
        for (const auto& s : st_.servers) served += s.served_work;
        double remaining = 0;
        std::uint64_t unfinished = 0;
        for (const auto& r : st_.jobs) {
            if (!r.compute_done) remaining += r.remaining;
            if (!r.finished) ++unfinished;
        }
        diag_.work_served = served;
        diag_.work_remaining = remaining;
        diag_.work_error = diag_.work_admitted > 0
                               ? std::abs(diag_.work_admitted - served - remaining) / diag_.work_admitted
                               : 0.0;

        if (cfg_.check_invariants) {
            if (unfinished > 0) throw InvariantViolation(std::to_string(unfinished) + " jobs never finished");
            if (sla_.admitted != sla_.completed + sla_.deadline_missed)
                throw InvariantViolation("admitted != completed + missed");
            if (diag_.work_error > 1e-6) throw InvariantViolation("work not conserved");
            if (diag_.max_byte_error > 1e-6) throw InvariantViolation("bytes not conserved");
            if (diag_.max_link_load > 1 + 1e-9) throw InvariantViolation("link capacity exceeded");
            if (st_.network.active_flows() != 0) throw InvariantViolation("flows left active");
        }

        SimReport rep;
        rep.label = cfg_.name;
        rep.seed = cfg_.seed;
        rep.window_seconds = cfg_.horizon - cfg_.warmup;
        rep.ledger = ledger_;
        rep.sla = sla_;
        for (std::size_t c = 0; c < kComponentClasses; ++c)
            rep.mean_power_w[c] = ledger_.wh(static_cast<ComponentClass>(c)) * 3600.0 / rep.window_seconds;
        rep.mean_awake_fraction =
            awake_integral_.value() / (rep.window_seconds * static_cast<double>(st_.servers.size()));
        rep.timeseries = std::move(series_);
        if (ledger_.datacenter_total() > 0) {
            const auto [pue, dcie] = compute_pue_dcie(ledger_.datacenter_total(), cfg_.pue_overhead);
            rep.pue = pue;
            rep.dcie = dcie;
        }
        rep.annualized_cost = annualize_cost(ledger_, rep.window_seconds, cfg_.price_per_kwh, cfg_.pue_overhead);
        rep.trace_hash = hash_.value();
        rep.diagnostics = diag_;
        return rep;
    }

    ScenarioConfig cfg_;
    SimState st_;
    std::vector<Job> arrivals_;
    RunOptions opts_;
    std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
    std::uint64_t next_seq_ = 0;
    double last_t_ = 0;
    bool ended_ = false;
    bool recompute_pending_ = false;
    EnergyLedger ledger_;
    CompensatedSum awake_integral_;
    SlaStats sla_;
    Diagnostics diag_;
    TraceHash hash_;
    std::vector<PowerSample> series_;
    std::vector<FlowMeta> meta_;
};

/// Job stream for one replication: replayed from CSV or generated.
inline std::vector<Job> jobs_for(const ScenarioConfig& cfg, int replication) {
    if (!cfg.jobs_csv.empty()) {
        std::ifstream in(cfg.jobs_csv);
        if (!in) throw ConfigError("cannot open job trace '" + cfg.jobs_csv + "'");
        return read_jobs_csv(in);
    }
    return generate(cfg.workload_for(replication));
}

inline SimReport run_scenario(const ScenarioConfig& cfg, int replication = 0, RunOptions opts = {}) {
    ScenarioConfig c = cfg;
    c.seed = cfg.seed + static_cast<std::uint64_t>(replication);
    Simulation sim(c, jobs_for(cfg, replication), opts);
    SimReport r = sim.run();
    r.seed = c.seed;
    return r;
}

}  // namespace greendc
