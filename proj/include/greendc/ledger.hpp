#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace greendc {

/// Neumaier-compensated accumulator for long energy integrals.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            carry_ += (sum_ - t) + x;
        else
            carry_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + carry_; }

private:
    double sum_ = 0;
    double carry_ = 0;
};

enum class ComponentClass : std::uint8_t { Servers, Core, Aggregation, Access };
inline constexpr std::size_t kComponentClasses = 4;

inline std::string_view to_string(ComponentClass c) {
    switch (c) {
        case ComponentClass::Servers: return "servers";
        case ComponentClass::Core: return "core";
        case ComponentClass::Aggregation: return "aggregation";
        case ComponentClass::Access: return "access";
    }
    return "?";
}

/// Energy per component class in watt-hours.
class EnergyLedger {
public:
    void add_joules(ComponentClass c, double joules) { acc_[static_cast<std::size_t>(c)].add(joules); }

    double wh(ComponentClass c) const { return acc_[static_cast<std::size_t>(c)].value() / 3600.0; }
    double servers() const { return wh(ComponentClass::Servers); }
    double core_switches() const { return wh(ComponentClass::Core); }
    double agg_switches() const { return wh(ComponentClass::Aggregation); }
    double access_switches() const { return wh(ComponentClass::Access); }
    double switches_total() const { return core_switches() + agg_switches() + access_switches(); }
    double datacenter_total() const { return servers() + switches_total(); }

private:
    std::array<CompensatedSum, kComponentClasses> acc_{};
};

struct SlaStats {
    std::uint64_t admitted = 0;
    std::uint64_t completed = 0;
    std::uint64_t deadline_missed = 0;
    std::uint64_t rejected = 0;
};

struct PowerSample {
    double time = 0;
    std::array<double, kComponentClasses> watts{};
    std::size_t awake_servers = 0;
};

/// Measured conservation residuals; all relative.
struct Diagnostics {
    double work_admitted = 0;      // CPU-seconds
    double work_served = 0;        // integral of f over serving time
    double work_remaining = 0;     // left on unfinished jobs
    double work_error = 0;         // |admitted - served - remaining| / admitted
    double max_byte_error = 0;     // max over flows |sent - size| / size
    double max_link_load = 0;      // max over recomputes of load / capacity
    std::uint64_t flows_completed = 0;
    std::uint64_t events = 0;
};

struct SimReport {
    std::string label;
    std::uint64_t seed = 0;
    double window_seconds = 0;  // energy integration window
    EnergyLedger ledger;
    SlaStats sla;
    std::array<double, kComponentClasses> mean_power_w{};
    double mean_awake_fraction = 0;
    std::vector<PowerSample> timeseries;
    double pue = 1;
    double dcie = 1;
    double annualized_cost = 0;
    std::uint64_t trace_hash = 0;
    Diagnostics diagnostics;

    double mean_total_power_w() const {
        double s = 0;
        for (double w : mean_power_w) s += w;
        return s;
    }
};

}  // namespace greendc
