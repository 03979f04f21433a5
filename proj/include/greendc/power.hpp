#pragma once

// Server, switch and link power models.
//
//   server:  P = P_fixed + P_f * f^3            (busy at normalized frequency f)
//            P = P_fixed + P_idle_cpu           (idle, OS resident)
//   switch:  P = P_chassis + n_linecards * P_linecard + sum_r ports_r * P_r
//
// A sleeping device draws its configured sleep power. Mode changes take
// `transition_time` seconds during which the device keeps drawing its
// pre-transition power and cannot serve work.

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "greendc/error.hpp"

namespace greendc {

inline constexpr double kDefaultTransitionTime = 0.1;

enum class PowerMode { Active, Sleep };

struct PowerState {
    PowerMode mode = PowerMode::Active;
    /// Normalized CPU frequency for servers; unused for switches.
    double setpoint = 1.0;
    std::optional<PowerMode> pending;
    double transition_until = -std::numeric_limits<double>::infinity();

    bool in_transition(double now) const { return pending.has_value() && now < transition_until; }
    /// Able to serve work at `now`: awake and not mid-transition.
    bool available(double now) const { return !in_transition(now) && effective_mode(now) == PowerMode::Active; }
    PowerMode effective_mode(double now) const {
        if (pending && now >= transition_until) return *pending;
        return mode;
    }
    /// The mode this device is heading to (or in, when nothing is pending).
    PowerMode target_mode() const { return pending ? *pending : mode; }
};

/// Applies a completed transition, if any.
inline PowerState settle(PowerState s, double now) {
    if (s.pending && now >= s.transition_until) {
        s.mode = *s.pending;
        s.pending.reset();
    }
    return s;
}

inline PowerState request_transition(const PowerState& state, PowerMode target, double now,
                                     double transition_time = kDefaultTransitionTime) {
    PowerState s = settle(state, now);
    if (s.pending) throw TransitionPending("transition already pending until t=" + std::to_string(s.transition_until));
    s.pending = target;
    s.transition_until = now + transition_time;
    return s;
}

struct ServerPowerParams {
    double p_fixed = 171.0;
    double p_f = 130.0;
    double f_max = 1.0;
    double p_idle_cpu = 27.0;
    double p_sleep = 0.0;

    double idle() const { return p_fixed + p_idle_cpu; }
    double peak() const { return p_fixed + p_f; }

    void validate() const {
        if (!(p_fixed >= 0)) throw InvalidSpec("server.p_fixed", "must be >= 0");
        if (!(p_f >= 0)) throw InvalidSpec("server.p_f", "must be >= 0");
        if (!(f_max > 0)) throw InvalidSpec("server.f_max", "must be > 0");
        if (!(p_idle_cpu >= 0 && p_idle_cpu <= p_f)) throw InvalidSpec("server.p_idle_cpu", "must be in [0, p_f]");
        if (!(p_sleep >= 0 && p_sleep <= p_fixed + p_idle_cpu))
            throw InvalidSpec("server.p_sleep", "must be in [0, p_fixed + p_idle_cpu]");
    }
};

/// `cpu_busy` is the fraction of wall time the CPU spends executing, at
/// most the setpoint. Partial occupancy blends the idle and busy draws.
inline double server_power(const ServerPowerParams& p, const PowerState& state, double cpu_busy) {
    if (state.mode == PowerMode::Sleep) return p.p_sleep;
    const double f = state.setpoint;
    if (!(f > 0 && f <= p.f_max)) throw InvalidSetpoint("frequency " + std::to_string(f) + " outside (0, f_max]");
    if (!(cpu_busy >= 0 && cpu_busy <= f * (1 + 1e-12)))
        throw std::invalid_argument("cpu_busy must lie in [0, setpoint]");
    const double busy_share = std::min(1.0, cpu_busy / f);
    return p.p_fixed + (1 - busy_share) * p.p_idle_cpu + busy_share * p.p_f * f * f * f;
}

/// Port power keyed by operating rate (bits/s).
using RatePowerMap = std::map<double, double>;

inline RatePowerMap default_port_power() {
    return {{1e7, 0.2}, {1e8, 0.3}, {1e9, 0.4}, {1e10, 1.0}, {1e11, 10.0}};
}

namespace detail {
template <typename Map>
auto find_rate(Map& m, double rate) -> decltype(m.begin()) {
    auto it = m.lower_bound(rate * (1 - 1e-9));
    if (it != m.end() && std::abs(it->first - rate) <= 1e-9 * rate) return it;
    return m.end();
}
}  // namespace detail

struct SwitchPowerParams {
    double p_chassis = 0.0;
    double p_linecard = 0.0;
    int n_linecards = 0;
    RatePowerMap port_power_by_rate = default_port_power();
    double p_sleep = 0.0;

    double port_power(double rate) const {
        auto it = detail::find_rate(port_power_by_rate, rate);
        if (it == port_power_by_rate.end()) throw UnknownRate("no port power configured for rate " + std::to_string(rate));
        return it->second;
    }

    void validate(const std::string& role) const {
        if (!(p_chassis >= 0)) throw InvalidSpec(role + ".p_chassis", "must be >= 0");
        if (!(p_linecard >= 0)) throw InvalidSpec(role + ".p_linecard", "must be >= 0");
        if (n_linecards < 0) throw InvalidSpec(role + ".n_linecards", "must be >= 0");
        if (!(p_sleep >= 0)) throw InvalidSpec(role + ".p_sleep", "must be >= 0");
        for (const auto& [rate, w] : port_power_by_rate)
            if (!(rate > 0 && w >= 0)) throw InvalidSpec(role + ".port_power_by_rate", "rates > 0, powers >= 0");
    }

    /// Calibrated defaults per role; see scenarios/README.md.
    static SwitchPowerParams access_default() { return {146.0, 0.0, 0, default_port_power(), 0.0}; }
    static SwitchPowerParams aggregation_default() { return {1500.0, 1000.0, 5, default_port_power(), 0.0}; }
    static SwitchPowerParams core_default() { return {1500.0, 1000.0, 2, default_port_power(), 0.0}; }
    static SwitchPowerParams core_high_speed_default() { return {3000.0, 2000.0, 2, default_port_power(), 0.0}; }
};

using PortCounts = std::map<double, int>;

inline double switch_power(const SwitchPowerParams& p, const PortCounts& active_ports_by_rate, const PowerState& state) {
    if (state.mode == PowerMode::Sleep) return p.p_sleep;
    double w = p.p_chassis + p.n_linecards * p.p_linecard;
    for (const auto& [rate, count] : active_ports_by_rate) w += count * p.port_power(rate);
    return w;
}

/// DVS rate ladder for a link whose top rate is `max_rate`:
/// max/100, max/10, max (10 Mb/s, 100 Mb/s, 1 Gb/s for gigabit links).
inline std::vector<double> dvs_tiers(double max_rate) { return {max_rate / 100, max_rate / 10, max_rate}; }

inline constexpr double kDefaultLinkHeadroom = 1.25;

/// Smallest allowed rate covering the offered load with headroom; clamps
/// to the top rate when overloaded. `utilization` is relative to the top rate.
inline double dvs_link_rate(double utilization, std::span<const double> allowed_rates,
                            double headroom = kDefaultLinkHeadroom) {
    if (allowed_rates.empty()) throw std::invalid_argument("dvs_link_rate: no allowed rates");
    for (std::size_t i = 1; i < allowed_rates.size(); ++i)
        if (!(allowed_rates[i] > allowed_rates[i - 1])) throw std::invalid_argument("dvs_link_rate: rates must ascend");
    const double needed = std::max(0.0, utilization) * allowed_rates.back() * headroom;
    for (double r : allowed_rates)
        if (r >= needed) return r;
    return allowed_rates.back();
}

}  // namespace greendc
