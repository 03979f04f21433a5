#pragma once

// Scenario files (JSON). Every object is checked against its list of known
// keys so a typo fails loudly instead of silently falling back to a default.
// See docs/scenario.md for the schema.

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "greendc/error.hpp"
#include "greendc/state.hpp"
#include "greendc/topology.hpp"
#include "greendc/workload.hpp"

namespace greendc {

struct ScenarioConfig {
    std::string name = "scenario";
    ArchitectureSpec architecture = ArchitectureSpec::three_tier();
    WorkloadSpec workload;
    /// When set, overrides workload.mean_interarrival so offered compute is
    /// this fraction of total server capacity.
    std::optional<double> target_load;
    /// Replay a job stream instead of generating one.
    std::string jobs_csv;
    SchedulerPolicy policy;
    PowerConfig power = PowerConfig::defaults_for(Architecture::ThreeTier);
    double horizon = 600;
    double warmup = 0;  // energy is integrated over [warmup, horizon]
    std::uint64_t seed = 1;
    int replications = 1;
    double pue_overhead = 1.0;
    double price_per_kwh = 0.10;
    double stats_interval = 60;
    bool sequential_phases = false;
    bool check_invariants = true;

    void validate() const {
        architecture.validate();
        if (!(horizon > 0)) throw InvalidSpec("horizon", "must be > 0");
        workload_for(0).validate();
        policy.validate();
        power.validate();
        if (target_load && !(*target_load > 0 && *target_load < 1))
            throw InvalidSpec("workload.target_load", "must be in (0, 1)");
        if (!(warmup >= 0 && warmup < horizon)) throw InvalidSpec("warmup", "must be in [0, horizon)");
        if (replications < 1) throw InvalidSpec("replications", "must be >= 1");
        if (!(pue_overhead >= 1)) throw InvalidSpec("pue_overhead", "must be >= 1");
        if (!(price_per_kwh >= 0)) throw InvalidSpec("price_per_kwh", "must be >= 0");
        if (!(stats_interval > 0)) throw InvalidSpec("stats_interval", "must be > 0");
    }

    /// Workload for one replication: seed offset and the load target applied.
    WorkloadSpec workload_for(int replication) const {
        WorkloadSpec w = workload;
        w.seed = seed + static_cast<std::uint64_t>(replication);
        w.reference_rate = architecture.link_rate_access_server;
        if (w.job_count == 0 && !(w.duration > 0)) w.duration = horizon;
        if (target_load && *target_load > 0 && *target_load < 1)
            w = load_for_target(architecture.server_count(), *target_load, w);
        return w;
    }

    /// Switches the fabric to a preset, resetting role powers to that
    /// preset's defaults.
    void use_preset(Architecture a) {
        architecture = ArchitectureSpec::preset(a);
        power.core = PowerConfig::defaults_for(a).core;
        power.aggregation = PowerConfig::defaults_for(a).aggregation;
        power.access = PowerConfig::defaults_for(a).access;
    }
};

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> known) {
    if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
    for (const auto& [k, _] : j.items()) {
        bool ok = false;
        for (auto n : known) ok = ok || k == n;
        if (!ok) throw ConfigError(std::string(where) + ": unknown key '" + k + "'");
    }
}

template <typename T>
void get_if(const json& j, const char* key, T& out, std::string_view where) {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->template get<T>();
    } catch (const json::exception&) {
        throw InvalidSpec(std::string(where) + "." + key, "wrong type");
    }
}

inline ArchitectureSpec parse_architecture_json(const json& j) {
    if (j.is_string()) return ArchitectureSpec::preset(parse_architecture(j.get<std::string>()));
    check_keys(j, "architecture",
               {"kind", "core_count", "agg_count", "access_count", "servers_per_access", "agg_uplinks_per_access",
                "link_rate_core_agg", "link_rate_agg_access", "link_rate_access_server", "link_rate_core_core",
                "link_delay"});
    if (!j.contains("kind")) throw InvalidSpec("architecture.kind", "required");
    ArchitectureSpec a = ArchitectureSpec::preset(parse_architecture(j.at("kind").get<std::string>()));
    get_if(j, "core_count", a.core_count, "architecture");
    get_if(j, "agg_count", a.agg_count, "architecture");
    get_if(j, "access_count", a.access_count, "architecture");
    get_if(j, "servers_per_access", a.servers_per_access, "architecture");
    get_if(j, "agg_uplinks_per_access", a.agg_uplinks_per_access, "architecture");
    get_if(j, "link_rate_core_agg", a.link_rate_core_agg, "architecture");
    get_if(j, "link_rate_agg_access", a.link_rate_agg_access, "architecture");
    get_if(j, "link_rate_access_server", a.link_rate_access_server, "architecture");
    get_if(j, "link_rate_core_core", a.link_rate_core_core, "architecture");
    get_if(j, "link_delay", a.link_delay, "architecture");
    return a;
}

inline void parse_workload(const json& j, ScenarioConfig& c) {
    check_keys(j, "workload",
               {"class_mix", "target_load", "mean_interarrival", "mean_compute", "comm_compute_ratio",
                "bytes_per_cpu_second", "internal_fraction", "deadline_slack", "job_count", "duration", "jobs_csv"});
    WorkloadSpec& w = c.workload;
    if (auto it = j.find("class_mix"); it != j.end()) {
        check_keys(*it, "workload.class_mix", {"ciw", "diw", "balanced"});
        w.class_mix = ClassMix{0, 0, 0};
        get_if(*it, "ciw", w.class_mix.ciw, "workload.class_mix");
        get_if(*it, "diw", w.class_mix.diw, "workload.class_mix");
        get_if(*it, "balanced", w.class_mix.balanced, "workload.class_mix");
    }
    if (auto it = j.find("comm_compute_ratio"); it != j.end()) {
        check_keys(*it, "workload.comm_compute_ratio", {"ciw", "diw", "balanced"});
        get_if(*it, "ciw", w.ratio_ciw, "workload.comm_compute_ratio");
        get_if(*it, "diw", w.ratio_diw, "workload.comm_compute_ratio");
        get_if(*it, "balanced", w.ratio_balanced, "workload.comm_compute_ratio");
    }
    if (j.contains("target_load")) {
        double t = 0;
        get_if(j, "target_load", t, "workload");
        c.target_load = t;
    }
    get_if(j, "mean_interarrival", w.mean_interarrival, "workload");
    get_if(j, "mean_compute", w.mean_compute, "workload");
    get_if(j, "bytes_per_cpu_second", w.bytes_per_cpu_second, "workload");
    get_if(j, "internal_fraction", w.internal_fraction, "workload");
    get_if(j, "deadline_slack", w.deadline_slack, "workload");
    get_if(j, "job_count", w.job_count, "workload");
    get_if(j, "duration", w.duration, "workload");
    get_if(j, "jobs_csv", c.jobs_csv, "workload");
}

inline void parse_policy(const json& j, SchedulerPolicy& p) {
    check_keys(j, "policy",
               {"scheme", "congestion_threshold", "idle_timeout", "dvfs_headroom", "f_min", "link_headroom",
                "transition_time", "placement"});
    if (j.contains("scheme")) p.scheme = parse_scheme(j.at("scheme").get<std::string>());
    get_if(j, "congestion_threshold", p.congestion_threshold, "policy");
    get_if(j, "idle_timeout", p.idle_timeout, "policy");
    get_if(j, "dvfs_headroom", p.dvfs_headroom, "policy");
    get_if(j, "f_min", p.f_min, "policy");
    get_if(j, "link_headroom", p.link_headroom, "policy");
    get_if(j, "transition_time", p.transition_time, "policy");
    if (j.contains("placement")) {
        const auto s = j.at("placement").get<std::string>();
        if (s == "most_loaded_first")
            p.order = PlacementOrder::MostLoadedFirst;
        else if (s == "first_fit")
            p.order = PlacementOrder::FirstFit;
        else
            throw InvalidSpec("policy.placement", "expected most_loaded_first or first_fit");
    }
}

inline void parse_switch_power(const json& j, SwitchPowerParams& s, const std::string& where) {
    check_keys(j, where, {"p_chassis", "p_linecard", "n_linecards", "port_power_by_rate", "p_sleep"});
    get_if(j, "p_chassis", s.p_chassis, where);
    get_if(j, "p_linecard", s.p_linecard, where);
    get_if(j, "n_linecards", s.n_linecards, where);
    get_if(j, "p_sleep", s.p_sleep, where);
    if (auto it = j.find("port_power_by_rate"); it != j.end()) {
        if (!it->is_object()) throw InvalidSpec(where + ".port_power_by_rate", "expected an object");
        s.port_power_by_rate.clear();
        for (const auto& [k, v] : it->items()) {
            double rate = 0;
            try {
                std::size_t used = 0;
                rate = std::stod(k, &used);
                if (used != k.size()) throw std::invalid_argument(k);
            } catch (const std::logic_error&) {
                throw InvalidSpec(where + ".port_power_by_rate", "key '" + k + "' is not a rate");
            }
            if (!v.is_number()) throw InvalidSpec(where + ".port_power_by_rate", "values must be numbers");
            s.port_power_by_rate[rate] = v.get<double>();
        }
    }
}

inline void parse_power(const json& j, PowerConfig& p) {
    check_keys(j, "power", {"server", "core", "aggregation", "access"});
    if (auto it = j.find("server"); it != j.end()) {
        check_keys(*it, "power.server", {"p_fixed", "p_f", "f_max", "p_idle_cpu", "p_sleep"});
        get_if(*it, "p_fixed", p.server.p_fixed, "power.server");
        get_if(*it, "p_f", p.server.p_f, "power.server");
        get_if(*it, "f_max", p.server.f_max, "power.server");
        get_if(*it, "p_idle_cpu", p.server.p_idle_cpu, "power.server");
        get_if(*it, "p_sleep", p.server.p_sleep, "power.server");
    }
    if (auto it = j.find("core"); it != j.end()) parse_switch_power(*it, p.core, "power.core");
    if (auto it = j.find("aggregation"); it != j.end()) parse_switch_power(*it, p.aggregation, "power.aggregation");
    if (auto it = j.find("access"); it != j.end()) parse_switch_power(*it, p.access, "power.access");
}

}  // namespace detail

inline ScenarioConfig parse_scenario(const nlohmann::json& j) {
    using detail::get_if;
    detail::check_keys(j, "scenario",
                       {"name", "architecture", "workload", "policy", "power", "horizon", "warmup", "seed",
                        "replications", "pue_overhead", "price_per_kwh", "stats_interval", "sequential_phases",
                        "check_invariants"});
    ScenarioConfig c;
    try {
        get_if(j, "name", c.name, "scenario");
        if (auto it = j.find("architecture"); it != j.end()) {
            c.architecture = detail::parse_architecture_json(*it);
            c.power = PowerConfig::defaults_for(c.architecture.kind);
        }
        if (auto it = j.find("workload"); it != j.end()) detail::parse_workload(*it, c);
        if (auto it = j.find("policy"); it != j.end()) detail::parse_policy(*it, c.policy);
        if (auto it = j.find("power"); it != j.end()) detail::parse_power(*it, c.power);
        get_if(j, "horizon", c.horizon, "scenario");
        get_if(j, "warmup", c.warmup, "scenario");
        get_if(j, "seed", c.seed, "scenario");
        get_if(j, "replications", c.replications, "scenario");
        get_if(j, "pue_overhead", c.pue_overhead, "scenario");
        get_if(j, "price_per_kwh", c.price_per_kwh, "scenario");
        get_if(j, "stats_interval", c.stats_interval, "scenario");
        get_if(j, "sequential_phases", c.sequential_phases, "scenario");
        get_if(j, "check_invariants", c.check_invariants, "scenario");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }
    c.validate();
    return c;
}

inline ScenarioConfig parse_scenario(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }
    return parse_scenario(j);
}

inline ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    ScenarioConfig c = parse_scenario(std::string_view(text));
    // Relative job traces resolve against the scenario's directory.
    if (!c.jobs_csv.empty() && c.jobs_csv.front() != '/') {
        const auto slash = path.find_last_of('/');
        if (slash != std::string::npos) c.jobs_csv = path.substr(0, slash + 1) + c.jobs_csv;
    }
    return c;
}

}  // namespace greendc
