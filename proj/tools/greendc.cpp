// greendc command-line driver.
//   exit 0: success, 1: configuration error, 2: invariant violation

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "greendc/greendc.hpp"

namespace {

using namespace greendc;

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::string arch;
    std::string scheme;
    std::optional<double> load;
};

ScenarioConfig apply(ScenarioConfig c, const Overrides& o) {
    if (o.seed) c.seed = *o.seed;
    if (!o.arch.empty()) c.use_preset(parse_architecture(o.arch));
    if (!o.scheme.empty()) c.policy.scheme = parse_scheme(o.scheme);
    if (o.load) c.target_load = *o.load;
    c.validate();
    return c;
}

void print_summary(const std::vector<CellResult>& cells) {
    for (const auto& c : cells) {
        if (!c.ok()) {
            std::printf("%-18s ERROR %s\n", c.label.c_str(), c.error.c_str());
            continue;
        }
        const auto dc = cell_stat(c, [](const SimReport& r) { return r.ledger.datacenter_total(); });
        const auto sv = cell_stat(c, [](const SimReport& r) { return r.ledger.servers(); });
        const auto aw = cell_stat(c, [](const SimReport& r) { return r.mean_awake_fraction; });
        const auto& r0 = c.runs.front();
        std::printf("%-18s total %.1f Wh  servers %.1f Wh (%.1f%%)  awake %.3f  admitted %llu missed %llu rejected %llu"
                    "  hash %016llx\n",
                    c.label.c_str(), dc.mean, sv.mean, dc.mean > 0 ? 100 * sv.mean / dc.mean : 0.0, aw.mean,
                    static_cast<unsigned long long>(r0.sla.admitted),
                    static_cast<unsigned long long>(r0.sla.deadline_missed),
                    static_cast<unsigned long long>(r0.sla.rejected), static_cast<unsigned long long>(r0.trace_hash));
    }
}

int exit_code(const std::vector<CellResult>& cells) {
    int code = 0;
    for (const auto& c : cells)
        if (!c.ok()) code = std::max(code, c.invariant_failure ? 2 : 1);
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Energy-aware data-center simulator"};
    app.require_subcommand(1);

    std::string scenario_path, matrix_path, out_dir = "out", trace_path, audit_path, dot_path, jobs_out;
    Overrides ov;
    unsigned threads = 0;

    auto* sim = app.add_subcommand("simulate", "Run one scenario (all of its replications)");
    sim->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
    sim->add_option("--seed", ov.seed, "Base seed");
    sim->add_option("--arch", ov.arch, "Architecture preset")->check(CLI::IsMember({"2t", "3t", "3ths"}));
    sim->add_option("--scheme", ov.scheme, "Power-saving scheme")
        ->check(CLI::IsMember({"none", "dvfs", "dns", "dvfs+dns"}));
    sim->add_option("--load", ov.load, "Target average server load in (0, 1)");
    sim->add_option("--out", out_dir, "Output directory");
    sim->add_option("--trace", trace_path, "Write the event trace (first replication) as CSV");
    sim->add_option("--audit", audit_path, "Write placement decisions (first replication) as CSV");
    sim->add_option("--threads", threads, "Worker threads for replications (0 = all cores)");

    auto* sweep = app.add_subcommand("sweep", "Run an architecture x scheme x load matrix");
    sweep->add_option("--scenario", scenario_path, "Base scenario JSON file")->required();
    sweep->add_option("--matrix", matrix_path, "Matrix JSON file")->required();
    sweep->add_option("--out", out_dir, "Output directory")->required();
    sweep->add_option("--threads", threads, "Worker threads (0 = all cores)");

    auto* val = app.add_subcommand("validate", "Check a scenario file and build its topology");
    val->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
    val->add_option("--dot", dot_path, "Export the topology as a DOT graph");
    val->add_option("--jobs-out", jobs_out, "Export the first replication's job stream as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        ScenarioConfig cfg = load_scenario(scenario_path);

        if (*val) {
            const Topology t = build_topology(cfg.architecture);
            std::printf("ok: %s  %zu core, %zu aggregation, %zu access, %zu servers, %zu links\n", cfg.name.c_str(),
                        t.core_count(), t.agg_count(), t.access_count(), t.server_count(), t.link_count());
            if (!dot_path.empty()) {
                std::ofstream f(dot_path);
                if (!f) throw ConfigError("cannot write " + dot_path);
                t.write_dot(f);
            }
            if (!jobs_out.empty()) {
                std::ofstream f(jobs_out);
                if (!f) throw ConfigError("cannot write " + jobs_out);
                write_jobs_csv(f, jobs_for(cfg, 0));
            }
            return 0;
        }

        if (*sim) {
            cfg = apply(cfg, ov);
            MatrixSpec m;
            m.architectures = {cfg.architecture.kind};
            m.schemes = {cfg.policy.scheme};
            if (cfg.target_load) m.loads = {*cfg.target_load};
            std::vector<CellResult> cells;
            if (!trace_path.empty() || !audit_path.empty()) {
                // Traced first replication runs in the foreground.
                std::ofstream trace, audit;
                RunOptions opts;
                if (!trace_path.empty()) {
                    trace.open(trace_path);
                    opts.trace = &trace;
                }
                if (!audit_path.empty()) {
                    audit.open(audit_path);
                    opts.audit = &audit;
                }
                run_scenario(cfg, 0, opts);
            }
            cells = run_experiment_matrix(cfg, m, threads);
            write_outputs(out_dir, cells);
            print_summary(cells);
            return exit_code(cells);
        }

        if (*sweep) {
            const MatrixSpec m = load_matrix(matrix_path);
            const auto cells = run_experiment_matrix(cfg, m, threads);
            write_outputs(out_dir, cells);
            print_summary(cells);
            return exit_code(cells);
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const InvariantViolation& e) {
        std::fprintf(stderr, "invariant violation: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
