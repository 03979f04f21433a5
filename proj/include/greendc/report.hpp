#pragma once

// Experiment orchestration and result emission. Emitters are pure functions
// of the result set, so writing the same results twice gives identical
// bytes.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include "greendc/config.hpp"
#include "greendc/engine.hpp"
#include "greendc/metrics.hpp"

namespace greendc {

struct SummaryStat {
    double mean = 0;
    double half_width = 0;  // 95% Student-t; 0 with a single sample

    double relative_half_width() const { return mean != 0 ? half_width / std::abs(mean) : 0.0; }
};

inline SummaryStat summarize(const std::vector<double>& xs, double confidence = 0.95) {
    SummaryStat s;
    if (xs.empty()) return s;
    double sum = 0;
    for (double x : xs) sum += x;
    s.mean = sum / static_cast<double>(xs.size());
    if (xs.size() < 2) return s;
    double ss = 0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    const double n = static_cast<double>(xs.size());
    const double sd = std::sqrt(ss / (n - 1));
    const boost::math::students_t dist(n - 1);
    const double t = boost::math::quantile(boost::math::complement(dist, (1 - confidence) / 2));
    s.half_width = t * sd / std::sqrt(n);
    return s;
}

struct MatrixSpec {
    std::vector<Architecture> architectures;
    std::vector<Scheme> schemes;
    std::vector<double> loads;  // empty: keep the scenario's own load
};

inline MatrixSpec parse_matrix(const nlohmann::json& j) {
    detail::check_keys(j, "matrix", {"architectures", "schemes", "loads"});
    MatrixSpec m;
    try {
        for (const auto& a : j.value("architectures", nlohmann::json::array()))
            m.architectures.push_back(parse_architecture(a.get<std::string>()));
        for (const auto& s : j.value("schemes", nlohmann::json::array()))
            m.schemes.push_back(parse_scheme(s.get<std::string>()));
        for (const auto& l : j.value("loads", nlohmann::json::array())) m.loads.push_back(l.get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("matrix: ") + e.what());
    }
    for (double l : m.loads)
        if (!(l > 0 && l < 1)) throw InvalidSpec("matrix.loads", "each load must be in (0, 1)");
    return m;
}

inline MatrixSpec load_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open matrix file '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("matrix: ") + e.what());
    }
    return parse_matrix(j);
}

struct CellResult {
    std::string label;
    Architecture architecture = Architecture::ThreeTier;
    Scheme scheme = Scheme::None;
    double load = 0;  // 0 when the scenario sets its own arrival rate
    std::vector<SimReport> runs;
    std::string error;            // empty on success
    bool invariant_failure = false;

    bool ok() const { return error.empty(); }
};

inline std::string cell_label(Architecture a, Scheme s, double load) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s/%s/%.2f", std::string(to_string(a)).c_str(), std::string(to_string(s)).c_str(),
                  load);
    return buf;
}

/// Configuration of one matrix cell.
inline ScenarioConfig cell_config(const ScenarioConfig& base, Architecture a, Scheme s, std::optional<double> load) {
    ScenarioConfig c = base;
    if (a != base.architecture.kind) c.use_preset(a);
    c.policy.scheme = s;
    if (load) c.target_load = *load;
    c.name = cell_label(a, s, c.target_load.value_or(0));
    return c;
}

/// Runs every (architecture, scheme, load) cell for `replications` seeds.
/// Runs execute on worker threads; results are collated by cell and
/// replication index, so output does not depend on scheduling. A failing
/// cell records its error and the rest of the matrix continues.
inline std::vector<CellResult> run_experiment_matrix(const ScenarioConfig& base, const MatrixSpec& sweep,
                                                     unsigned threads = 0) {
    std::vector<Architecture> archs = sweep.architectures;
    if (archs.empty()) archs.push_back(base.architecture.kind);
    std::vector<Scheme> schemes = sweep.schemes;
    if (schemes.empty()) schemes.push_back(base.policy.scheme);
    std::vector<std::optional<double>> loads;
    for (double l : sweep.loads) loads.emplace_back(l);
    if (loads.empty()) loads.emplace_back(std::nullopt);

    std::vector<CellResult> cells;
    std::vector<ScenarioConfig> cfgs;
    for (auto a : archs)
        for (auto s : schemes)
            for (const auto& l : loads) {
                ScenarioConfig c = cell_config(base, a, s, l);
                CellResult r;
                r.label = c.name;
                r.architecture = a;
                r.scheme = s;
                r.load = c.target_load.value_or(0);
                r.runs.resize(static_cast<std::size_t>(c.replications));
                cells.push_back(std::move(r));
                cfgs.push_back(std::move(c));
            }

    struct Task {
        std::size_t cell;
        int rep;
    };
    std::vector<Task> tasks;
    for (std::size_t i = 0; i < cells.size(); ++i)
        for (int r = 0; r < cfgs[i].replications; ++r) tasks.push_back({i, r});
    std::vector<std::string> errors(tasks.size());
    std::vector<char> invariant(tasks.size(), 0);

    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t k = next++; k < tasks.size(); k = next++) {
            const Task& t = tasks[k];
            try {
                cells[t.cell].runs[static_cast<std::size_t>(t.rep)] = run_scenario(cfgs[t.cell], t.rep);
            } catch (const InvariantViolation& e) {
                errors[k] = e.what();
                invariant[k] = 1;
            } catch (const std::exception& e) {
                errors[k] = e.what();
            }
        }
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, tasks.size())));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        CellResult& c = cells[tasks[k].cell];
        if (!errors[k].empty() && c.error.empty()) {
            c.error = "replication " + std::to_string(tasks[k].rep) + ": " + errors[k];
            c.invariant_failure = invariant[k] != 0;
        }
    }
    return cells;
}

// ---- metric extraction -------------------------------------------------------

template <typename F>
SummaryStat cell_stat(const CellResult& c, F metric) {
    std::vector<double> xs;
    if (c.ok())
        for (const auto& r : c.runs) xs.push_back(metric(r));
    return summarize(xs);
}

namespace detail {

inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline void write_header(std::ostream& os, const char* first, const std::vector<CellResult>& cells) {
    os << first;
    for (const auto& c : cells) os << ',' << c.label << ',' << c.label << " ci95";
    os << '\n';
}

template <typename F>
void write_row(std::ostream& os, const char* name, const std::vector<CellResult>& cells, F metric) {
    os << name;
    for (const auto& c : cells) {
        if (!c.ok()) {
            os << ",error,error";
            continue;
        }
        const auto s = cell_stat(c, metric);
        os << ',' << fmt(s.mean) << ',' << fmt(s.half_width);
    }
    os << '\n';
}

}  // namespace detail

/// Energy by component class (kWh over the measurement window), one column
/// pair (mean, 95% half-width) per cell.
inline void write_table2(std::ostream& os, const std::vector<CellResult>& cells) {
    detail::write_header(os, "component_kwh", cells);
    detail::write_row(os, "datacenter", cells, [](const SimReport& r) { return r.ledger.datacenter_total() / 1000; });
    detail::write_row(os, "servers", cells, [](const SimReport& r) { return r.ledger.servers() / 1000; });
    detail::write_row(os, "switch", cells, [](const SimReport& r) { return r.ledger.switches_total() / 1000; });
    detail::write_row(os, "core", cells, [](const SimReport& r) { return r.ledger.core_switches() / 1000; });
    detail::write_row(os, "aggregation", cells, [](const SimReport& r) { return r.ledger.agg_switches() / 1000; });
    detail::write_row(os, "access", cells, [](const SimReport& r) { return r.ledger.access_switches() / 1000; });
}

/// Scheme comparison: energies, cost, and ratios to the matching baseline
/// cell (same architecture and load, scheme none) when one is present.
inline void write_table3(std::ostream& os, const std::vector<CellResult>& cells) {
    detail::write_header(os, "metric", cells);
    detail::write_row(os, "server_kwh", cells, [](const SimReport& r) { return r.ledger.servers() / 1000; });
    detail::write_row(os, "switch_kwh", cells, [](const SimReport& r) { return r.ledger.switches_total() / 1000; });
    detail::write_row(os, "datacenter_kwh", cells,
                      [](const SimReport& r) { return r.ledger.datacenter_total() / 1000; });
    detail::write_row(os, "annual_cost", cells, [](const SimReport& r) { return r.annualized_cost; });
    detail::write_row(os, "awake_fraction", cells, [](const SimReport& r) { return r.mean_awake_fraction; });
    detail::write_row(os, "sla_missed_or_rejected", cells, [](const SimReport& r) {
        const double total = static_cast<double>(r.sla.admitted + r.sla.rejected);
        return total > 0 ? static_cast<double>(r.sla.deadline_missed + r.sla.rejected) / total : 0.0;
    });

    const auto ratio_row = [&](const char* name, auto metric) {
        os << name;
        for (const auto& c : cells) {
            const CellResult* base = nullptr;
            for (const auto& b : cells)
                if (b.scheme == Scheme::None && b.architecture == c.architecture && b.load == c.load) base = &b;
            if (!base || !c.ok() || !base->ok()) {
                os << ",,";
                continue;
            }
            const double num = cell_stat(c, metric).mean;
            const double den = cell_stat(*base, metric).mean;
            os << ',' << detail::fmt(den != 0 ? num / den : 0.0) << ',';
        }
        os << '\n';
    };
    ratio_row("server_vs_baseline", [](const SimReport& r) { return r.ledger.servers(); });
    ratio_row("switch_vs_baseline", [](const SimReport& r) { return r.ledger.switches_total(); });
    ratio_row("datacenter_vs_baseline", [](const SimReport& r) { return r.ledger.datacenter_total(); });
}

/// Sampled power of the first replication of every cell.
inline void write_timeseries(std::ostream& os, const std::vector<CellResult>& cells) {
    os << "cell,time,servers_w,core_w,aggregation_w,access_w,total_w,awake_servers\n";
    for (const auto& c : cells) {
        if (!c.ok() || c.runs.empty()) continue;
        for (const auto& p : c.runs.front().timeseries) {
            double total = 0;
            for (double w : p.watts) total += w;
            os << c.label << ',' << detail::fmt(p.time);
            for (double w : p.watts) os << ',' << detail::fmt(w);
            os << ',' << detail::fmt(total) << ',' << p.awake_servers << '\n';
        }
    }
}

/// Mean power against load, one row per cell (the per-load curves).
inline void write_curves(std::ostream& os, const std::vector<CellResult>& cells) {
    os << "architecture,scheme,load,servers_w,switches_w,total_w,awake_fraction\n";
    for (const auto& c : cells) {
        if (!c.ok()) continue;
        const auto sv = cell_stat(c, [](const SimReport& r) { return r.mean_power_w[0]; });
        const auto sw = cell_stat(c, [](const SimReport& r) { return r.mean_total_power_w() - r.mean_power_w[0]; });
        const auto aw = cell_stat(c, [](const SimReport& r) { return r.mean_awake_fraction; });
        os << to_string(c.architecture) << ',' << to_string(c.scheme) << ',' << detail::fmt(c.load) << ','
           << detail::fmt(sv.mean) << ',' << detail::fmt(sw.mean) << ',' << detail::fmt(sv.mean + sw.mean) << ','
           << detail::fmt(aw.mean) << '\n';
    }
}

inline void write_trace_hashes(std::ostream& os, const std::vector<CellResult>& cells) {
    for (const auto& c : cells) {
        if (!c.ok()) continue;
        for (const auto& r : c.runs) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "%s seed=%llu %016llx\n", c.label.c_str(),
                          static_cast<unsigned long long>(r.seed), static_cast<unsigned long long>(r.trace_hash));
            os << buf;
        }
    }
}

inline nlohmann::ordered_json to_json(const SimReport& r) {
    nlohmann::ordered_json j;
    j["label"] = r.label;
    j["seed"] = r.seed;
    j["window_seconds"] = r.window_seconds;
    j["energy_wh"] = {{"servers", r.ledger.servers()},
                      {"core_switches", r.ledger.core_switches()},
                      {"agg_switches", r.ledger.agg_switches()},
                      {"access_switches", r.ledger.access_switches()},
                      {"switches_total", r.ledger.switches_total()},
                      {"datacenter_total", r.ledger.datacenter_total()}};
    j["sla"] = {{"admitted", r.sla.admitted},
                {"completed", r.sla.completed},
                {"deadline_missed", r.sla.deadline_missed},
                {"rejected", r.sla.rejected}};
    j["mean_power_w"] = {{"servers", r.mean_power_w[0]},
                         {"core", r.mean_power_w[1]},
                         {"aggregation", r.mean_power_w[2]},
                         {"access", r.mean_power_w[3]}};
    j["mean_awake_fraction"] = r.mean_awake_fraction;
    j["pue"] = r.pue;
    j["dcie"] = r.dcie;
    j["annualized_cost"] = r.annualized_cost;
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(r.trace_hash));
    j["trace_hash"] = hash;
    const auto& d = r.diagnostics;
    j["diagnostics"] = {{"work_admitted", d.work_admitted}, {"work_served", d.work_served},
                        {"work_remaining", d.work_remaining}, {"work_error", d.work_error},
                        {"max_byte_error", d.max_byte_error}, {"max_link_load", d.max_link_load},
                        {"flows_completed", d.flows_completed}, {"events", d.events}};
    return j;
}

inline nlohmann::ordered_json to_json(const std::vector<CellResult>& cells) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& c : cells) {
        nlohmann::ordered_json j;
        j["cell"] = c.label;
        j["architecture"] = std::string(to_string(c.architecture));
        j["scheme"] = std::string(to_string(c.scheme));
        j["load"] = c.load;
        if (!c.ok()) {
            j["error"] = c.error;
        } else {
            const auto dc = cell_stat(c, [](const SimReport& r) { return r.ledger.datacenter_total(); });
            const auto sv = cell_stat(c, [](const SimReport& r) { return r.ledger.servers(); });
            j["datacenter_wh"] = {{"mean", dc.mean}, {"ci95", dc.half_width}};
            j["servers_wh"] = {{"mean", sv.mean}, {"ci95", sv.half_width}};
            j["runs"] = nlohmann::ordered_json::array();
            for (const auto& r : c.runs) j["runs"].push_back(to_json(r));
        }
        out.push_back(std::move(j));
    }
    return out;
}

/// Writes report.json, table2.csv, table3.csv, timeseries.csv, curves.csv
/// and trace_hash.txt into `dir`.
inline void write_outputs(const std::filesystem::path& dir, const std::vector<CellResult>& cells) {
    std::filesystem::create_directories(dir);
    const auto open = [&](const char* name) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) throw ConfigError("cannot write " + (dir / name).string());
        return f;
    };
    {
        auto f = open("report.json");
        f << to_json(cells).dump(2) << '\n';
    }
    {
        auto f = open("table2.csv");
        write_table2(f, cells);
    }
    {
        auto f = open("table3.csv");
        write_table3(f, cells);
    }
    {
        auto f = open("timeseries.csv");
        write_timeseries(f, cells);
    }
    {
        auto f = open("curves.csv");
        write_curves(f, cells);
    }
    {
        auto f = open("trace_hash.txt");
        write_trace_hashes(f, cells);
    }
}

}  // namespace greendc
