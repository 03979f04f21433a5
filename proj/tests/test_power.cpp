#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "greendc/power.hpp"

using namespace greendc;

namespace {

PowerState active(double f = 1.0) {
    PowerState s;
    s.setpoint = f;
    return s;
}

PowerState asleep() {
    PowerState s;
    s.mode = PowerMode::Sleep;
    return s;
}

}  // namespace

TEST(ServerPower, Endpoints) {
    const ServerPowerParams p;
    EXPECT_DOUBLE_EQ(server_power(p, active(), 1.0), 301.0);
    EXPECT_DOUBLE_EQ(server_power(p, active(), 0.0), 198.0);
    EXPECT_NEAR(198.0 / 301.0, 0.658, 0.001);
    EXPECT_DOUBLE_EQ(server_power(p, asleep(), 0.0), 0.0);
}

TEST(ServerPower, HalfFrequency) {
    const ServerPowerParams p;
    EXPECT_DOUBLE_EQ(server_power(p, active(0.5), 0.5), 171.0 + 130.0 * 0.125);
    EXPECT_DOUBLE_EQ(server_power(p, active(0.5), 0.5), 187.25);
}

TEST(ServerPower, ScaledExample) {
    const ServerPowerParams p;
    EXPECT_NEAR(server_power(p, active(0.625), 0.625), 202.7, 0.05);
}

TEST(ServerPower, MonotoneInFrequency) {
    const ServerPowerParams p;
    double prev = 0;
    for (int i = 1; i <= 100; ++i) {
        const double f = i / 100.0;
        const double w = server_power(p, active(f), f);
        EXPECT_GE(w, prev);
        EXPECT_GE(w, p.p_fixed);
        EXPECT_LE(w, p.peak());
        prev = w;
    }
}

TEST(ServerPower, InvalidSetpoint) {
    const ServerPowerParams p;
    EXPECT_THROW(server_power(p, active(0.0), 0.0), InvalidSetpoint);
    EXPECT_THROW(server_power(p, active(1.5), 0.0), InvalidSetpoint);
}

TEST(ServerPower, ParamValidation) {
    ServerPowerParams p;
    p.p_idle_cpu = 200;
    EXPECT_THROW(p.validate(), InvalidSpec);
    p = ServerPowerParams{};
    p.p_sleep = 500;
    EXPECT_THROW(p.validate(), InvalidSpec);
    EXPECT_NO_THROW(ServerPowerParams{}.validate());
}

TEST(SwitchPower, ChassisOnly) {
    SwitchPowerParams p;
    p.p_chassis = 100;
    EXPECT_DOUBLE_EQ(switch_power(p, {}, active()), 100.0);
}

TEST(SwitchPower, LinecardAndPorts) {
    SwitchPowerParams p;
    p.p_chassis = 100;
    p.p_linecard = 35;
    p.n_linecards = 1;
    EXPECT_NEAR(switch_power(p, {{1e9, 48}}, active()), 154.2, 1e-9);
}

TEST(SwitchPower, SleepAndUnknownRate) {
    SwitchPowerParams p;
    p.p_chassis = 100;
    p.p_sleep = 7;
    EXPECT_DOUBLE_EQ(switch_power(p, {{1e9, 4}}, asleep()), 7.0);
    EXPECT_THROW(switch_power(p, {{2.5e9, 1}}, active()), UnknownRate);
}

TEST(SwitchPower, LinearInPorts) {
    const auto p = SwitchPowerParams::aggregation_default();
    const double base = switch_power(p, {}, active());
    double prev = base;
    for (int n = 1; n <= 20; ++n) {
        const double w = switch_power(p, {{1e9, n}, {1e10, n}}, active());
        EXPECT_NEAR(w - prev, 1.4, 1e-9);
        prev = w;
    }
}

TEST(SwitchPower, DefaultPortPowers) {
    const SwitchPowerParams p;
    EXPECT_DOUBLE_EQ(p.port_power(1e9), 0.4);
    EXPECT_DOUBLE_EQ(p.port_power(1e10), 1.0);
    EXPECT_DOUBLE_EQ(p.port_power(1e11), 10.0);
}

TEST(Dvs, Tiers) {
    const auto tiers = dvs_tiers(1e9);
    ASSERT_EQ(tiers.size(), 3u);
    EXPECT_DOUBLE_EQ(tiers[0], 1e7);
    EXPECT_DOUBLE_EQ(tiers[1], 1e8);
    EXPECT_DOUBLE_EQ(tiers[2], 1e9);
}

TEST(Dvs, Examples) {
    const auto tiers = dvs_tiers(1e9);
    EXPECT_DOUBLE_EQ(dvs_link_rate(0.0, tiers), 1e7);
    EXPECT_DOUBLE_EQ(dvs_link_rate(60e6 / 1e9, tiers), 1e8);
    EXPECT_DOUBLE_EQ(dvs_link_rate(0.9, tiers), 1e9);
    EXPECT_DOUBLE_EQ(dvs_link_rate(3.0, tiers), 1e9);
}

TEST(Dvs, OutputIsAllowedRate) {
    const auto tiers = dvs_tiers(1e10);
    for (int i = 0; i <= 200; ++i) {
        const double r = dvs_link_rate(i / 100.0, tiers);
        EXPECT_NE(std::find(tiers.begin(), tiers.end(), r), tiers.end());
    }
}

TEST(Transitions, SleepTakesOneHundredMs) {
    PowerState s = request_transition(active(), PowerMode::Sleep, 5.0);
    EXPECT_TRUE(s.in_transition(5.05));
    EXPECT_FALSE(s.available(5.05));
    EXPECT_EQ(s.effective_mode(5.05), PowerMode::Active);
    EXPECT_EQ(s.effective_mode(5.1), PowerMode::Sleep);
    EXPECT_EQ(settle(s, 5.1).mode, PowerMode::Sleep);
}

TEST(Transitions, WakeServesAfterDelay) {
    PowerState s = request_transition(asleep(), PowerMode::Active, 0.0);
    EXPECT_FALSE(s.available(0.05));
    EXPECT_TRUE(s.available(0.1));
}

TEST(Transitions, SecondRequestWhilePending) {
    const PowerState s = request_transition(active(), PowerMode::Sleep, 5.0);
    EXPECT_THROW(request_transition(s, PowerMode::Active, 5.05), TransitionPending);
    EXPECT_NO_THROW(request_transition(s, PowerMode::Active, 5.1));
}

TEST(Transitions, DrawsPreTransitionPower) {
    const ServerPowerParams p;
    const PowerState s = request_transition(active(), PowerMode::Sleep, 0.0);
    // mode only flips once settled
    EXPECT_DOUBLE_EQ(server_power(p, s, 0.0), 198.0);
    EXPECT_DOUBLE_EQ(server_power(p, settle(s, 0.1), 0.0), 0.0);
}
