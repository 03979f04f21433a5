// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <string>

#include "greendc/greendc.hpp"

using namespace greendc;

namespace {

int failures = 0;

void verdict(int id, bool ok, const std::string& what) {
    std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", id, what.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

bool within(double x, double lo, double hi) { return x >= lo && x <= hi; }

struct Timed {
    SimReport report;
    double seconds = 0;
};

Timed timed_run(const ScenarioConfig& c, int rep = 0) {
    const auto t0 = std::chrono::steady_clock::now();
    Timed t;
    t.report = run_scenario(c, rep);
    t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return t;
}

ScenarioConfig with_scheme(ScenarioConfig c, Scheme s) {
    c.policy.scheme = s;
    return c;
}

// Continuous progressive filling: every unfrozen flow grows at unit speed;
// advance to the next instant some resource fills, freeze its flows.
std::vector<double> filling_oracle(const std::vector<double>& cap, const std::vector<std::vector<ResourceId>>& flows) {
    std::vector<double> rate(flows.size(), 0.0);
    std::vector<bool> frozen(flows.size(), false);
    std::size_t left = flows.size();
    while (left > 0) {
        double step = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < cap.size(); ++r) {
            double used = 0;
            int growing = 0;
            for (std::size_t f = 0; f < flows.size(); ++f)
                for (auto x : flows[f])
                    if (x == r) {
                        used += rate[f];
                        growing += frozen[f] ? 0 : 1;
                    }
            if (growing) step = std::min(step, (cap[r] - used) / growing);
        }
        for (std::size_t f = 0; f < flows.size(); ++f)
            if (!frozen[f]) rate[f] += step;
        for (std::size_t r = 0; r < cap.size(); ++r) {
            double used = 0;
            for (std::size_t f = 0; f < flows.size(); ++f)
                for (auto x : flows[f])
                    if (x == r) used += rate[f];
            if (used < cap[r] * (1 - 1e-12)) continue;
            for (std::size_t f = 0; f < flows.size(); ++f)
                for (auto x : flows[f])
                    if (x == r && !frozen[f]) {
                        frozen[f] = true;
                        --left;
                    }
        }
    }
    return rate;
}

bool conserved(const SimReport& r, std::string& why) {
    const auto& d = r.diagnostics;
    const double parts = r.ledger.servers() + r.ledger.core_switches() + r.ledger.agg_switches() +
                         r.ledger.access_switches();
    const double add_err = std::abs(parts - r.ledger.datacenter_total()) / std::max(1e-300, r.ledger.datacenter_total());
    why = fmt("work %.1e bytes %.1e link %.9f ledger %.1e", d.work_error, d.max_byte_error, d.max_link_load, add_err);
    return d.work_error <= 1e-6 && d.max_byte_error <= 1e-6 && d.max_link_load <= 1 + 1e-6 && add_err <= 1e-6 &&
           r.sla.admitted == r.sla.completed + r.sla.deadline_missed;
}

}  // namespace

int main() {
    const std::string dir = GREENDC_SCENARIO_DIR;

    // 1. server power endpoints
    {
        const ServerPowerParams p;
        PowerState s;
        const double peak = server_power(p, s, 1.0);
        const double idle = server_power(p, s, 0.0);
        verdict(1, peak == 301.0 && idle == 198.0 && std::abs(idle / peak - 0.658) <= 0.001,
                fmt("peak %.2f W, idle %.2f W, idle/peak %.4f", peak, idle, idle / peak));
    }

    // Reference scenario under all four schemes.
    const ScenarioConfig ref = load_scenario(dir + "/reference_3t.json");
    std::printf("reference: %s, horizon %.0f s, warmup %.0f s\n", ref.name.c_str(), ref.horizon, ref.warmup);
    const Timed none = timed_run(with_scheme(ref, Scheme::None));
    const Timed dvfs = timed_run(with_scheme(ref, Scheme::DVFS));
    const Timed dns = timed_run(with_scheme(ref, Scheme::DNS));
    const Timed both = timed_run(with_scheme(ref, Scheme::DVFS_DNS));
    for (const auto* t : {&none, &dvfs, &dns, &both}) {
        const auto& r = t->report;
        std::printf("  %-20s total %9.1f Wh  servers %9.1f  core %7.1f  agg %7.1f  access %7.1f  awake %.3f"
                    "  admitted %llu missed %llu rejected %llu  %.1f s\n",
                    r.label.c_str(), r.ledger.datacenter_total(), r.ledger.servers(), r.ledger.core_switches(),
                    r.ledger.agg_switches(), r.ledger.access_switches(), r.mean_awake_fraction,
                    static_cast<unsigned long long>(r.sla.admitted),
                    static_cast<unsigned long long>(r.sla.deadline_missed),
                    static_cast<unsigned long long>(r.sla.rejected), t->seconds);
    }
    const EnergyLedger& base = none.report.ledger;

    // 2. DVFS only
    {
        const double srv = dvfs.report.ledger.servers() / base.servers();
        const double sw_cut = 1 - dvfs.report.ledger.switches_total() / base.switches_total();
        verdict(2, within(srv, 0.93, 0.99) && within(sw_cut, 0.03, 0.15) && dvfs.seconds < 120,
                fmt("server energy %.4f of baseline (want 0.93-0.99); switch reduction %.4f (want 0.03-0.15);"
                    " run %.1f s (want < 120)",
                    srv, sw_cut, dvfs.seconds));
    }

    // 3. DNS and DVFS+DNS
    {
        const double srv = dns.report.ledger.servers() / base.servers();
        const double total = both.report.ledger.datacenter_total() / base.datacenter_total();
        const double awake = dns.report.mean_awake_fraction;
        verdict(3, srv <= 0.45 && within(total, 0.28, 0.42) && within(awake, 0.30, 0.40),
                fmt("DNS server energy %.4f of baseline (want <= 0.45); DVFS+DNS total %.4f (want 0.28-0.42);"
                    " DNS awake fraction %.4f (want 0.30-0.40)",
                    srv, total, awake));
    }

    // 4. energy split of the baseline
    {
        const double srv = base.servers() / base.datacenter_total();
        const double acc = base.access_switches() / base.switches_total();
        const bool order = base.access_switches() > base.agg_switches() && base.agg_switches() > base.core_switches();
        verdict(4, within(srv, 0.60, 0.80) && order && within(acc, 0.40, 0.60),
                fmt("servers %.4f of total (want 0.60-0.80); access %.4f / agg %.4f / core %.4f of switch energy"
                    " (want access > agg > core, access 0.40-0.60)",
                    srv, acc, base.agg_switches() / base.switches_total(), base.core_switches() / base.switches_total()));
    }

    // 5. flow model vs an independent oracle on random micro-topologies
    {
        std::mt19937_64 rng(99);
        int instances = 0;
        double worst = 0;
        for (int trial = 0; trial < 100; ++trial) {
            const int nl = 1 + static_cast<int>(rng() % 6);
            const int nf = 1 + static_cast<int>(rng() % 6);
            std::vector<double> cap;
            for (int l = 0; l < nl; ++l) cap.push_back(std::pow(10.0, 7 + static_cast<int>(rng() % 4)) * (1 + rng() % 9));
            std::vector<std::vector<ResourceId>> flows(nf);
            FlowNetwork net(cap);
            std::vector<FlowId> ids;
            for (auto& f : flows) {
                std::set<ResourceId> s;
                const int len = 1 + static_cast<int>(rng() % nl);
                while (static_cast<int>(s.size()) < len) s.insert(static_cast<ResourceId>(rng() % nl));
                f.assign(s.begin(), s.end());
                // flows arrive one at a time, as in a run
                ids.push_back(net.add_flow(f, 1e9, 1e6, 0, 0));
                net.recompute(0);
            }
            const auto want = filling_oracle(cap, flows);
            for (std::size_t i = 0; i < ids.size(); ++i)
                worst = std::max(worst, std::abs(net.flow(ids[i]).rate - want[i]) / want[i]);
            ++instances;
        }
        verdict(5, instances >= 25 && worst <= 1e-9,
                fmt("%d micro-topologies (<= 6 links, <= 6 flows), worst relative rate error %.2e", instances, worst));
    }

    // 6. conservation on every CI scenario
    {
        bool ok = true;
        std::string detail;
        int runs = 0;
        const auto check = [&](const SimReport& r) {
            std::string why;
            const bool good = conserved(r, why);
            ++runs;
            if (!good) {
                ok = false;
                detail += " [" + r.label + ": " + why + "]";
            }
        };
        for (const auto* t : {&none, &dvfs, &dns, &both}) check(t->report);
        const ScenarioConfig small = load_scenario(dir + "/small.json");
        for (auto s : {Scheme::None, Scheme::DVFS, Scheme::DNS, Scheme::DVFS_DNS})
            for (bool seq : {false, true})
                for (int rep = 0; rep < small.replications; ++rep) {
                    ScenarioConfig c = with_scheme(small, s);
                    c.sequential_phases = seq;
                    check(run_scenario(c, rep));
                }
        verdict(6, ok, fmt("%d runs: work, byte, link-capacity and ledger-additivity residuals within 1e-6", runs) +
                           detail);
    }

    // 7. determinism and replication spread
    {
        const SimReport again = run_scenario(with_scheme(ref, Scheme::None));
        const bool same_hash = again.trace_hash == none.report.trace_hash;
        const bool same_report = to_json(again).dump() == to_json(none.report).dump();
        ScenarioConfig rep = with_scheme(ref, Scheme::None);
        rep.replications = 20;
        const auto cells = run_experiment_matrix(rep, MatrixSpec{}, 0);
        const auto s = cell_stat(cells.at(0), [](const SimReport& r) { return r.ledger.servers(); });
        const double rel = s.mean > 0 ? s.half_width / s.mean : 1;
        verdict(7, same_hash && same_report && cells[0].ok() && rel < 0.005,
                fmt("hash %016llx repeated: %s; report identical: %s; 20-replication server-energy CI half-width"
                    " %.4f%% (want < 0.5%%)",
                    static_cast<unsigned long long>(none.report.trace_hash), same_hash ? "yes" : "no",
                    same_report ? "yes" : "no", 100 * rel));
    }

    // 8. workload statistics
    {
        WorkloadSpec w;
        w.job_count = 100000;
        w.mean_interarrival = 2.0;
        w.class_mix = {1.0 / 3, 1.0 / 3, 1.0 / 3};
        w.seed = 2024;
        const auto jobs = generate(w);
        double sum = 0, sq = 0, prev = 0, worst_ratio = 0;
        for (const auto& j : jobs) {
            const double g = j.arrival - prev;
            prev = j.arrival;
            sum += g;
            sq += g * g;
            const double want = w.ratio(j.cls);
            const double got = j.comm_total() / (j.compute_demand * w.bytes_per_cpu_second);
            worst_ratio = std::max(worst_ratio, std::abs(got - want) / want);
        }
        const double n = static_cast<double>(jobs.size());
        const double mean = sum / n;
        const double cv = std::sqrt((sq - n * mean * mean) / (n - 1)) / mean;
        verdict(8, std::abs(mean / 2.0 - 1) <= 0.02 && std::abs(cv - 1) <= 0.05 && worst_ratio <= 1e-12,
                fmt("%zu jobs: mean gap %.4f s (want 2 +- 2%%), CV %.4f (want 1 +- 5%%), worst class-ratio error %.1e",
                    jobs.size(), mean, cv, worst_ratio));
    }

    std::printf("%d of 8 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
