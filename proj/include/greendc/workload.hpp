#pragma once

// Seeded synthetic job streams.
//
// Random numbers come from std::mt19937_64 (fully specified by the C++
// standard, so bit-exact across platforms). Each 64-bit draw is turned into
// a double in (0, 1) as ((x >> 11) + 0.5) * 2^-53; exponential variates use
// the inverse CDF -mean * log(u). Per job the draws are taken in the order:
// inter-arrival gap, class, compute demand.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "greendc/error.hpp"

namespace greendc {

enum class JobClass { CIW, DIW, Balanced };

inline std::string_view to_string(JobClass c) {
    switch (c) {
        case JobClass::CIW: return "ciw";
        case JobClass::DIW: return "diw";
        case JobClass::Balanced: return "balanced";
    }
    return "?";
}

inline JobClass parse_job_class(std::string_view s) {
    if (s == "ciw") return JobClass::CIW;
    if (s == "diw") return JobClass::DIW;
    if (s == "balanced") return JobClass::Balanced;
    throw ConfigError("unknown job class '" + std::string(s) + "'");
}

struct Job {
    std::uint64_t id = 0;
    double arrival = 0;
    JobClass cls = JobClass::Balanced;
    double compute_demand = 0;  // CPU-seconds at f = 1
    double comm_internal = 0;   // bytes
    double comm_external = 0;   // bytes
    double deadline = 0;        // absolute seconds

    double comm_total() const { return comm_internal + comm_external; }
    bool operator==(const Job&) const = default;
};

struct ClassMix {
    double ciw = 0;
    double diw = 0;
    double balanced = 1;
};

struct WorkloadSpec {
    ClassMix class_mix;
    double mean_interarrival = 1.0;
    double mean_compute = 1.0;
    double ratio_ciw = 0.1;
    double ratio_diw = 10.0;
    double ratio_balanced = 1.0;
    double bytes_per_cpu_second = 1e6;
    double internal_fraction = 0.8;
    double deadline_slack = 2.0;
    /// Rate used for the ideal transfer time in the deadline (server NIC).
    double reference_rate = 1e9;
    std::uint64_t seed = 1;
    std::size_t job_count = 0;  // when 0, generate arrivals up to `duration`
    double duration = 0;

    double ratio(JobClass c) const {
        switch (c) {
            case JobClass::CIW: return ratio_ciw;
            case JobClass::DIW: return ratio_diw;
            case JobClass::Balanced: return ratio_balanced;
        }
        return ratio_balanced;
    }

    void validate() const {
        const double mix = class_mix.ciw + class_mix.diw + class_mix.balanced;
        if (class_mix.ciw < 0 || class_mix.diw < 0 || class_mix.balanced < 0 || std::abs(mix - 1) > 1e-9)
            throw InvalidSpec("workload.class_mix", "fractions must be >= 0 and sum to 1");
        if (!(mean_interarrival > 0)) throw InvalidSpec("workload.mean_interarrival", "must be > 0");
        if (!(mean_compute > 0)) throw InvalidSpec("workload.mean_compute", "must be > 0");
        if (!(ratio_ciw >= 0 && ratio_diw >= 0 && ratio_balanced >= 0))
            throw InvalidSpec("workload.comm_compute_ratio", "must be >= 0");
        if (!(bytes_per_cpu_second >= 0)) throw InvalidSpec("workload.bytes_per_cpu_second", "must be >= 0");
        if (!(internal_fraction >= 0 && internal_fraction <= 1))
            throw InvalidSpec("workload.internal_fraction", "must be in [0, 1]");
        if (!(deadline_slack > 1)) throw InvalidSpec("workload.deadline_slack", "must be > 1");
        if (!(reference_rate > 0)) throw InvalidSpec("workload.reference_rate", "must be > 0");
        if (job_count == 0 && !(duration > 0)) throw InvalidSpec("workload.job_count", "set job_count or duration");
    }
};

/// Draws of (0, 1) doubles and exponentials on top of mt19937_64.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }
    double exponential(double mean) { return -mean * std::log(uniform()); }
    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

inline double ideal_transfer_time(double bytes, double rate) { return bytes * 8.0 / rate; }

inline std::vector<Job> generate(const WorkloadSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    std::vector<Job> jobs;
    if (spec.job_count > 0) jobs.reserve(spec.job_count);
    double t = 0;
    for (std::uint64_t id = 0;; ++id) {
        if (spec.job_count > 0 && jobs.size() >= spec.job_count) break;
        t += rng.exponential(spec.mean_interarrival);
        if (spec.job_count == 0 && t >= spec.duration) break;
        Job j;
        j.id = id;
        j.arrival = t;
        const double u = rng.uniform();
        if (u < spec.class_mix.ciw)
            j.cls = JobClass::CIW;
        else if (u < spec.class_mix.ciw + spec.class_mix.diw)
            j.cls = JobClass::DIW;
        else
            j.cls = JobClass::Balanced;
        j.compute_demand = rng.exponential(spec.mean_compute);
        const double total = j.compute_demand * spec.ratio(j.cls) * spec.bytes_per_cpu_second;
        j.comm_internal = total * spec.internal_fraction;
        j.comm_external = total - j.comm_internal;
        j.deadline = j.arrival +
                     spec.deadline_slack * (j.compute_demand + ideal_transfer_time(total, spec.reference_rate));
        jobs.push_back(j);
    }
    return jobs;
}

/// Sets the inter-arrival mean so offered compute equals `target_utilization`
/// of `capacity` (CPU-seconds per second, i.e. server count at f = 1).
inline WorkloadSpec load_for_target(double capacity, double target_utilization, WorkloadSpec spec) {
    if (!(target_utilization > 0 && target_utilization < 1))
        throw InvalidSpec("target_utilization", "must be in (0, 1)");
    if (!(capacity > 0)) throw InvalidSpec("capacity", "must be > 0");
    spec.mean_interarrival = spec.mean_compute / (target_utilization * capacity);
    return spec;
}

inline void write_jobs_csv(std::ostream& os, const std::vector<Job>& jobs) {
    os << "id,arrival,class,compute,bytes_int,bytes_ext,deadline\n";
    char buf[256];
    for (const auto& j : jobs) {
        std::snprintf(buf, sizeof buf, "%llu,%.17g,%s,%.17g,%.17g,%.17g,%.17g\n",
                      static_cast<unsigned long long>(j.id), j.arrival, std::string(to_string(j.cls)).c_str(),
                      j.compute_demand, j.comm_internal, j.comm_external, j.deadline);
        os << buf;
    }
}

inline std::vector<Job> read_jobs_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("id,arrival,class", 0) != 0)
        throw ConfigError("job CSV: missing header");
    std::vector<Job> jobs;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        if (cells.size() != 7) throw ConfigError("job CSV line " + std::to_string(lineno) + ": expected 7 fields");
        try {
            Job j;
            j.id = std::stoull(cells[0]);
            j.arrival = std::stod(cells[1]);
            j.cls = parse_job_class(cells[2]);
            j.compute_demand = std::stod(cells[3]);
            j.comm_internal = std::stod(cells[4]);
            j.comm_external = std::stod(cells[5]);
            j.deadline = std::stod(cells[6]);
            if (!(j.compute_demand > 0) || j.comm_internal < 0 || j.comm_external < 0 || !(j.deadline > j.arrival))
                throw ConfigError("job invariants violated");
            if (!jobs.empty() && !(j.arrival > jobs.back().arrival)) throw ConfigError("arrivals must increase");
            jobs.push_back(j);
        } catch (const std::logic_error&) {
            throw ConfigError("job CSV line " + std::to_string(lineno) + ": malformed number");
        } catch (const ConfigError& e) {
            throw ConfigError("job CSV line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return jobs;
}

}  // namespace greendc
