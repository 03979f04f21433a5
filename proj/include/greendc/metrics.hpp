#pragma once

#include <utility>

#include "greendc/error.hpp"
#include "greendc/ledger.hpp"

namespace greendc {

inline constexpr double kSecondsPerYear = 31'536'000.0;

/// Facility energy = IT energy x overhead, so PUE is the overhead itself and
/// DCIE its reciprocal. Returns {pue, dcie}.
inline std::pair<double, double> compute_pue_dcie(double it_energy_wh, double pue_overhead) {
    if (!(it_energy_wh > 0)) throw ZeroItEnergy("IT energy must be positive");
    if (!(pue_overhead >= 1)) throw InvalidSpec("pue_overhead", "must be >= 1");
    const double facility = it_energy_wh * pue_overhead;
    const double pue = facility / it_energy_wh;
    return {pue, 1.0 / pue};
}

/// Scales the window's energy to a year and prices it.
inline double annualize_cost(const EnergyLedger& ledger, double horizon_s, double price_per_kwh,
                             double pue_overhead = 1.0) {
    if (!(horizon_s > 0)) throw InvalidSpec("horizon", "must be > 0");
    return ledger.datacenter_total() * pue_overhead * (kSecondsPerYear / horizon_s) * price_per_kwh / 1000.0;
}

}  // namespace greendc
