#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "greendc/network.hpp"

using namespace greendc;

namespace {

using FlowSet = std::vector<std::vector<ResourceId>>;

// Textbook bottleneck loop: each round compute every link's fair share of
// what is left, fix all flows crossing the tightest link, repeat.
std::vector<double> oracle(const std::vector<double>& cap, const FlowSet& flows) {
    std::vector<double> rate(flows.size(), 0.0);
    std::vector<bool> fixed(flows.size(), false);
    std::vector<double> left = cap;
    for (;;) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_r = SIZE_MAX;
        for (std::size_t r = 0; r < cap.size(); ++r) {
            int n = 0;
            for (std::size_t f = 0; f < flows.size(); ++f)
                if (!fixed[f] && std::count(flows[f].begin(), flows[f].end(), r)) ++n;
            if (n && left[r] / n < best) {
                best = left[r] / n;
                best_r = r;
            }
        }
        if (best_r == SIZE_MAX) break;
        for (std::size_t f = 0; f < flows.size(); ++f) {
            if (fixed[f] || !std::count(flows[f].begin(), flows[f].end(), best_r)) continue;
            fixed[f] = true;
            rate[f] = best;
            for (auto r : flows[f]) left[r] -= best;
        }
    }
    return rate;
}

// Definition check: feasible, and every flow crosses a saturated resource
// on which no other flow gets more.
void expect_max_min(const std::vector<double>& cap, const FlowSet& flows, const std::vector<double>& rate) {
    std::vector<double> load(cap.size(), 0.0);
    for (std::size_t f = 0; f < flows.size(); ++f)
        for (auto r : flows[f]) load[r] += rate[f];
    for (std::size_t r = 0; r < cap.size(); ++r) EXPECT_LE(load[r], cap[r] * (1 + 1e-9));
    for (std::size_t f = 0; f < flows.size(); ++f) {
        bool has_bottleneck = false;
        for (auto r : flows[f]) {
            if (load[r] < cap[r] * (1 - 1e-9)) continue;
            bool top = true;
            for (std::size_t g = 0; g < flows.size(); ++g)
                if (std::count(flows[g].begin(), flows[g].end(), r) && rate[g] > rate[f] * (1 + 1e-9)) top = false;
            has_bottleneck |= top;
        }
        EXPECT_TRUE(has_bottleneck) << "flow " << f;
    }
}

void expect_close(const std::vector<double>& a, const std::vector<double>& b) {
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9 * std::max(std::abs(b[i]), 1.0)) << i;
}

}  // namespace

TEST(MaxMin, SingleFlow) {
    const std::vector<double> cap{1e9, 1e9};
    const auto r = max_min_rates(cap, FlowSet{{0, 1}});
    EXPECT_DOUBLE_EQ(r[0], 1e9);
}

TEST(MaxMin, TwoFlowsShare) {
    const std::vector<double> cap{1e9, 1e9, 1e9};
    const auto r = max_min_rates(cap, FlowSet{{0, 1}, {0, 2}});
    EXPECT_DOUBLE_EQ(r[0], 0.5e9);
    EXPECT_DOUBLE_EQ(r[1], 0.5e9);
}

TEST(MaxMin, ThreeFlowChain) {
    const std::vector<double> cap{1e9, 1e9};
    const FlowSet flows{{0}, {0, 1}, {1}};
    const auto r = max_min_rates(cap, flows);
    for (double x : r) EXPECT_DOUBLE_EQ(x, 0.5e9);
    expect_close(r, oracle(cap, flows));
}

TEST(MaxMin, UnequalBottlenecks) {
    // A limited to 0.2 by link 1, B takes the rest of link 0
    const std::vector<double> cap{1.0, 0.2};
    const FlowSet flows{{0, 1}, {0}};
    const auto r = max_min_rates(cap, flows);
    EXPECT_NEAR(r[0], 0.2, 1e-15);
    EXPECT_NEAR(r[1], 0.8, 1e-15);
}

TEST(MaxMin, RejectsBadInput) {
    const std::vector<double> cap{1.0};
    EXPECT_THROW(max_min_rates(cap, FlowSet{{}}), std::invalid_argument);
    EXPECT_THROW(max_min_rates(cap, FlowSet{{3}}), std::out_of_range);
}

TEST(MaxMin, RandomMicroTopologiesMatchOracle) {
    std::mt19937_64 rng(2024);
    const double tiers[] = {1e7, 1e8, 1e9, 1e10};
    for (int trial = 0; trial < 200; ++trial) {
        const int nlinks = 1 + static_cast<int>(rng() % 6);
        const int nflows = 1 + static_cast<int>(rng() % 6);
        std::vector<double> cap;
        for (int l = 0; l < nlinks; ++l) cap.push_back(tiers[rng() % 4] * (0.5 + (rng() % 1000) / 1000.0));
        FlowSet flows(nflows);
        for (auto& f : flows) {
            std::set<ResourceId> s;
            const int len = 1 + static_cast<int>(rng() % nlinks);
            while (static_cast<int>(s.size()) < len) s.insert(static_cast<ResourceId>(rng() % nlinks));
            f.assign(s.begin(), s.end());
        }
        const auto got = max_min_rates(cap, flows);
        expect_close(got, oracle(cap, flows));
        expect_max_min(cap, flows, got);
    }
}

TEST(FlowNetwork, IncrementalMatchesFullRecompute) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 40; ++trial) {
        const int nres = 4 + static_cast<int>(rng() % 20);
        std::vector<double> cap;
        for (int r = 0; r < nres; ++r) cap.push_back(1e6 * (1 + rng() % 100));
        FlowNetwork net(cap);
        std::vector<FlowId> live;
        double now = 0;
        for (int step = 0; step < 120; ++step) {
            now += 0.001;
            const int op = static_cast<int>(rng() % 10);
            if (op < 5 || live.empty()) {
                std::set<ResourceId> s;
                const int len = 1 + static_cast<int>(rng() % 4);
                while (static_cast<int>(s.size()) < len) s.insert(static_cast<ResourceId>(rng() % nres));
                live.push_back(net.add_flow({s.begin(), s.end()}, 1e9, 1e5, 0, now));
            } else if (op < 8) {
                const std::size_t k = rng() % live.size();
                net.remove_flow(live[k], now);
                live.erase(live.begin() + static_cast<long>(k));
            } else {
                const auto r = static_cast<ResourceId>(rng() % nres);
                cap[r] = 1e6 * (1 + rng() % 100);
                net.set_capacity(r, cap[r]);
            }
            if (rng() % 3 == 0) continue;  // batch several changes
            net.recompute(now);
            FlowSet flows;
            for (auto id : live) flows.push_back(net.flow(id).resources);
            const auto want = oracle(cap, flows);
            for (std::size_t i = 0; i < live.size(); ++i)
                EXPECT_NEAR(net.flow(live[i]).rate, want[i], 1e-9 * want[i]) << "trial " << trial << " step " << step;
            EXPECT_NO_THROW(net.check_all_capacities());
        }
    }
}

TEST(FlowNetwork, ByteAccountingAndFinishTime) {
    FlowNetwork net({1e9, 1e9});
    const FlowId a = net.add_flow({0, 1}, 1e9, 1e8, 1, 0.0);
    net.recompute(0.0);
    EXPECT_DOUBLE_EQ(net.time_to_finish(a, 0.0), 1.0);
    const FlowId b = net.add_flow({0}, 1e9, 1e8, 2, 0.5);
    net.recompute(0.5);
    // a has 0.5e9 bits left at half rate
    EXPECT_DOUBLE_EQ(net.flow(a).remaining_bits, 0.5e9);
    EXPECT_DOUBLE_EQ(net.time_to_finish(a, 0.5), 1.0);
    net.remove_flow(a, 1.5);
    EXPECT_NEAR(net.flow(a).sent_bits, 1e9, 1e-3);
    net.recompute(1.5);
    EXPECT_DOUBLE_EQ(net.flow(b).rate, 1e9);
    EXPECT_DOUBLE_EQ(net.time_to_finish(b, 1.5), 0.5);
}

TEST(FlowNetwork, OfferedDemandTracksFlows) {
    FlowNetwork net({1e9, 1e9});
    const FlowId a = net.add_flow({0, 1}, 1e6, 3e6, 0, 0);
    const FlowId b = net.add_flow({1}, 1e6, 2e6, 0, 0);
    EXPECT_DOUBLE_EQ(net.offered(0), 3e6);
    EXPECT_DOUBLE_EQ(net.offered(1), 5e6);
    net.remove_flow(a, 0);
    EXPECT_DOUBLE_EQ(net.offered(0), 0);
    net.remove_flow(b, 0);
    EXPECT_DOUBLE_EQ(net.offered(1), 0);
    EXPECT_EQ(net.active_flows(), 0u);
}

TEST(FlowNetwork, UnrelatedComponentUntouched) {
    FlowNetwork net({1e9, 1e9, 1e9});
    const FlowId a = net.add_flow({0}, 1e9, 0, 0, 0);
    net.recompute(0);
    const auto epoch = net.flow(a).epoch;
    net.add_flow({2}, 1e9, 0, 0, 0);
    const auto changed = net.recompute(0);
    EXPECT_EQ(std::count(changed.begin(), changed.end(), a), 0);
    EXPECT_EQ(net.flow(a).epoch, epoch);
}

TEST(FlowNetwork, CompleteCreditsOnlyClockRounding) {
    // a 2-bit flow started late: the drain instant is not representable exactly
    FlowNetwork net({1e9});
    const double t0 = 211.37;
    const FlowId a = net.add_flow({0}, 2.0, 1e8, 1, t0);
    net.recompute(t0);
    const double end = t0 + net.time_to_finish(a, t0);
    net.complete_flow(a, end);
    EXPECT_EQ(net.flow(a).sent_bits, 2.0);
    EXPECT_EQ(net.flow(a).remaining_bits, 0.0);

    // stopping a microsecond early is not rounding and stays visible
    const FlowId b = net.add_flow({0}, 1e6, 1e8, 2, 0.0);
    net.recompute(0.0);
    net.complete_flow(b, net.time_to_finish(b, 0.0) - 1e-6);
    EXPECT_NEAR(net.flow(b).remaining_bits, 1e3, 1e-3);
    EXPECT_FALSE(net.flow(b).active);
}
