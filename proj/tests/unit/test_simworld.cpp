#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include <gtest/gtest.h>

#include "nafdrive/error.hpp"
#include "nafdrive/nafq.hpp"
#include "nafdrive/rng.hpp"
#include "nafdrive/simworld.hpp"

using namespace nafdrive;
using namespace nafdrive::sim;

namespace {

class ZeroYaw final : public LateralPolicy {
public:
    double act(const nafq::RlState&, int) override { return 0.0; }
};

class ConstantYaw final : public LateralPolicy {
public:
    explicit ConstantYaw(double a) : a_(a) {}
    double act(const nafq::RlState&, int) override { return a_; }

private:
    double a_;
};

VehicleState keeper(double station, int lane, double v, double v0, const WorldConfig& cfg) {
    VehicleState s;
    s.station = station;
    s.lane = s.origin_lane = s.target_lane = lane;
    s.d = cfg.road.lane_center(lane);
    s.v = v;
    s.v0 = v0;
    s.length = cfg.vehicle_length;
    s.trigger_drawn = true;
    return s;
}

WorldConfig no_lane_changes() {
    WorldConfig cfg;
    cfg.traffic.change_prob_left = 0.0;
    cfg.traffic.change_prob_right = 0.0;
    return cfg;
}

}  // namespace

TEST(Kinematics, StraightCruise) {
    VehicleState s;
    s.station = 10.0;
    s.d = 5.625;
    s.v = 20.0;
    const auto n = step_kinematics(s, 0.0, 0.0, 0.1, 0.0);
    EXPECT_EQ(n.station, 12.0);
    EXPECT_EQ(n.d, s.d);
    EXPECT_EQ(n.v, s.v);
    EXPECT_EQ(n.theta, 0.0);
    EXPECT_EQ(n.omega, 0.0);
}

TEST(Kinematics, HandEvaluatedYawStep) {
    VehicleState s;
    s.v = 20.0;
    const auto n = step_kinematics(s, 0.0, 0.1, 0.1, 0.0);
    EXPECT_NEAR(n.omega, 0.01, 1e-17);
    EXPECT_NEAR(n.theta, 0.001, 1e-18);
    EXPECT_NEAR(n.d, 0.0019999996666666834, 1e-17);
}

TEST(Kinematics, SpeedNeverNegativeAndCommandStored) {
    VehicleState s;
    s.v = 0.3;
    const auto n = step_kinematics(s, -9.0, 0.0, 0.1, 0.0);
    EXPECT_EQ(n.v, 0.0);
    EXPECT_EQ(n.a_lng, -9.0);
}

TEST(Kinematics, CurvatureRotatesRelativeHeading) {
    VehicleState s;
    s.v = 20.0;
    const auto n = step_kinematics(s, 0.0, 0.0, 0.1, 0.002);
    EXPECT_NEAR(n.theta, -0.002 * 20.0 * 0.1, 1e-18);
}

TEST(Kinematics, MirrorSymmetry) {
    RngStream rng(4, "mirror");
    VehicleState a;
    a.v = 18.0;
    a.d = 0.0;
    a.theta = 0.02;
    a.omega = -0.01;
    VehicleState b = a;
    b.theta = -a.theta;
    b.omega = -a.omega;
    for (int k = 0; k < 200; ++k) {
        const double yaw = rng.uniform(-0.6, 0.6);
        const double lng = rng.uniform(-2.0, 2.0);
        a = step_kinematics(a, lng, yaw, 0.1, 0.0);
        b = step_kinematics(b, lng, -yaw, 0.1, 0.0);
        ASSERT_EQ(a.d, -b.d);
        ASSERT_EQ(a.theta, -b.theta);
        ASSERT_EQ(a.station, b.station);
    }
}

TEST(RlState, DeviationToTargetCenter) {
    WorldConfig cfg;
    World world(cfg, 0);
    VehicleState ego = keeper(100.0, 1, 20.0, 25.0, cfg);
    EXPECT_EQ(world.build_rl_state(ego).delta_d_lat, 0.0);
    EXPECT_EQ(world.build_rl_state(ego).c, 0.0);
    // Positive when the target lies to the left, so that positive (leftward) yaw
    // acceleration reduces it.
    ego.d = 4.0;
    ego.target_lane = 0;
    EXPECT_EQ(world.build_rl_state(ego).delta_d_lat, -2.125);
    ego.target_lane = 2;
    EXPECT_EQ(world.build_rl_state(ego).delta_d_lat, 9.375 - 4.0);
}

TEST(RlState, CurvatureSampledAtStation) {
    WorldConfig cfg;
    cfg.road.curvature_profile = {{0.0, 0.0}, {400.0, 0.001}, {600.0, -0.0005}};
    World world(cfg, 0);
    EXPECT_EQ(world.build_rl_state(keeper(399.0, 1, 20, 25, cfg)).c, 0.0);
    EXPECT_EQ(world.build_rl_state(keeper(400.0, 1, 20, 25, cfg)).c, 0.001);
    EXPECT_EQ(world.build_rl_state(keeper(900.0, 1, 20, 25, cfg)).c, -0.0005);
}

TEST(Reward, HandEvaluated) {
    const RewardWeights w;
    nafq::RlState next;
    next.omega = 0.05;
    next.delta_d_lat = 1.875;
    const auto r = immediate_reward(0.1, next, w);
    EXPECT_EQ(r.r, -0.275);
    EXPECT_EQ(r.r_acce, -0.2);
    EXPECT_EQ(r.r_rate, -0.025);
    EXPECT_EQ(r.r_dev, -0.05);

    const auto r2 = immediate_reward(0.2, nafq::RlState{}, w);
    EXPECT_EQ(r2.r, -0.4);
    EXPECT_EQ(r2.r_acce, -0.4);
    EXPECT_EQ(r2.r_rate, 0.0);
    EXPECT_EQ(r2.r_dev, 0.0);

    const auto zero = immediate_reward(0.0, nafq::RlState{}, w);
    EXPECT_EQ(zero.r, 0.0);
}

TEST(Reward, SignAndSymmetry) {
    RngStream rng(1, "reward");
    const RewardWeights w;
    for (int i = 0; i < 1000; ++i) {
        nafq::RlState s;
        s.omega = rng.uniform(-1, 1);
        s.delta_d_lat = rng.uniform(-5, 5);
        const double a = rng.uniform(-0.6, 0.6);
        const auto r = immediate_reward(a, s, w);
        EXPECT_LE(r.r_acce, 0.0);
        EXPECT_LE(r.r_rate, 0.0);
        EXPECT_LE(r.r_dev, 0.0);
        nafq::RlState m = s;
        m.omega = -s.omega;
        m.delta_d_lat = -s.delta_d_lat;
        EXPECT_EQ(immediate_reward(-a, m, w).r, r.r);
    }
}

TEST(Metrics, Accumulate) {
    EpisodeMetrics m;
    EXPECT_EQ(m.R(), 0.0);
    nafq::RlState next;
    next.omega = 0.05;
    next.delta_d_lat = 1.875;
    accumulate_metrics(m, immediate_reward(0.1, next, RewardWeights{}));
    accumulate_metrics(m, immediate_reward(0.2, nafq::RlState{}, RewardWeights{}));
    EXPECT_EQ(m.steps, 2);
    EXPECT_NEAR(m.R(), -0.675, 1e-15);
    EXPECT_EQ(m.R(), m.R_acce + m.R_rate + m.R_dev);
}

TEST(Completion, Thresholds) {
    const CompletionSpec spec;
    EXPECT_EQ(completion_check(nafq::RlState{}, spec), Completion::done);
    nafq::RlState s;
    s.delta_d_lat = 0.2;
    EXPECT_EQ(completion_check(s, spec), Completion::active);
    s.delta_d_lat = 0.04;
    s.theta = 0.005;
    s.omega = 0.04;
    EXPECT_EQ(completion_check(s, spec), Completion::done);
    s.omega = -0.06;
    EXPECT_EQ(completion_check(s, spec), Completion::active);
}

TEST(Spawn, IntervalsWithinRangeAndDeterministic) {
    const WorldConfig cfg = no_lane_changes();
    auto entry_times = [&](std::uint64_t seed) {
        World world(cfg, seed);
        ZeroYaw policy;
        std::vector<std::vector<double>> times(3);
        std::set<int> seen;
        for (int k = 0; k < 6000; ++k) {
            for (const auto& v : world.vehicles()) {
                if (seen.insert(v.id).second) {
                    times[static_cast<std::size_t>(v.lane)].push_back(world.time());
                }
            }
            world.step(policy);
        }
        return times;
    };
    const auto times = entry_times(17);
    EXPECT_EQ(times, entry_times(17));
    EXPECT_NE(times, entry_times(18));
    for (const auto& lane : times) {
        ASSERT_GT(lane.size(), 50u);
        EXPECT_LE(lane.front(), 10.0 + 1e-9);
        for (std::size_t i = 1; i < lane.size(); ++i) {
            const double gap = lane[i] - lane[i - 1];
            // entry is the step after the spawn step (recorded before stepping), so the
            // spacing is the sampled interval, rounded up to the step grid, or later if deferred
            EXPECT_GE(gap, 5.0 - 1e-9);
        }
    }
}

TEST(Spawn, DeferredWhileEntryZoneOccupied) {
    WorldConfig cfg = no_lane_changes();
    World world(cfg, 3);
    // a stopped vehicle parked in lane 0's entry zone with no way to move
    auto blocker = keeper(10.0, 0, 0.0, 0.1, cfg);
    world.add_vehicle(blocker);
    ZeroYaw policy;
    for (int k = 0; k < 300; ++k) {
        world.step(policy);
        int in_lane0 = 0;
        for (const auto& v : world.vehicles()) in_lane0 += v.lane == 0;
        const auto* b = world.find(0);
        if (b && b->station < cfg.traffic.entry_zone) {
            ASSERT_EQ(in_lane0, 1) << "spawned into an occupied entry zone at step " << k;
        }
    }
}

TEST(Trigger, OnlyMiddleLaneAfterStation) {
    WorldConfig cfg;
    cfg.traffic.change_prob_left = 0.5;
    cfg.traffic.change_prob_right = 0.5;
    World world(cfg, 1);
    world.set_spawning(false);
    auto v = keeper(149.0, 1, 20.0, 25.0, cfg);
    v.trigger_drawn = false;
    world.add_vehicle(v);
    auto side = keeper(200.0, 0, 20.0, 25.0, cfg);
    side.trigger_drawn = false;
    world.add_vehicle(side);
    EXPECT_TRUE(world.lane_change_trigger().empty());
    world.find_mut(0)->station = 150.0;
    const auto cmds = world.lane_change_trigger();
    ASSERT_EQ(cmds.size(), 1u);
    EXPECT_EQ(cmds[0].vehicle_id, 0);
    EXPECT_TRUE(world.lane_change_trigger().empty());  // one draw per vehicle
}

TEST(Trigger, FractionNearOneThird) {
    WorldConfig cfg;
    World world(cfg, 99);
    world.set_spawning(false);
    int triggered = 0;
    int left = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        auto v = keeper(150.0 + i * 0.01, 1, 20.0, 25.0, cfg);
        v.trigger_drawn = false;
        world.add_vehicle(v);
    }
    for (const auto& c : world.lane_change_trigger()) {
        ++triggered;
        left += c.direction == 1;
    }
    const double frac = static_cast<double>(triggered) / n;
    EXPECT_GE(frac, 0.31);
    EXPECT_LE(frac, 0.36);
    EXPECT_NEAR(static_cast<double>(left) / triggered, 0.5, 0.05);
}

TEST(World, EmptyWorldOnlyAdvancesTime) {
    World world(WorldConfig{}, 1);
    world.set_spawning(false);
    ZeroYaw policy;
    const auto out = world.step(policy);
    EXPECT_TRUE(world.vehicles().empty());
    EXPECT_TRUE(out.agent_steps.empty());
    EXPECT_EQ(world.step_index(), 1);
    EXPECT_NEAR(world.time(), 0.1, 1e-15);
}

TEST(World, SingleVehicleFollowsFreeModel) {
    WorldConfig cfg;
    World world(cfg, 1);
    world.set_spawning(false);
    world.add_vehicle(keeper(0.0, 1, 10.0, 30.0, cfg));
    ZeroYaw policy;
    double x = 0.0;
    double v = 10.0;
    auto idm = cfg.idm;
    idm.v0 = 30.0;
    for (int k = 0; k < 300; ++k) {
        const double a = std::clamp(2.0 * (1.0 - std::pow(v / 30.0, 4.0)), -9.0, 2.0);
        v = std::max(0.0, v + a * 0.1);
        x += v * 0.1;
        world.step(policy);
        const auto* s = world.find(0);
        ASSERT_NE(s, nullptr);
        ASSERT_NEAR(s->station, x, 1e-9);
        ASSERT_NEAR(s->v, v, 1e-9);
    }
}

TEST(World, OrderOfInsertionDoesNotMatter) {
    const WorldConfig cfg = no_lane_changes();
    std::vector<VehicleState> fleet = {keeper(100, 0, 15, 25, cfg), keeper(130, 0, 12, 30, cfg),
                                       keeper(90, 1, 20, 22, cfg), keeper(160, 1, 10, 28, cfg),
                                       keeper(50, 2, 25, 33, cfg)};
    auto run = [&](bool reversed) {
        World world(cfg, 5);
        world.set_spawning(false);
        auto order = fleet;
        if (reversed) std::reverse(order.begin(), order.end());
        for (const auto& v : order) world.add_vehicle(v);
        ZeroYaw policy;
        for (int k = 0; k < 200; ++k) world.step(policy);
        std::vector<std::tuple<double, double, double>> out;
        for (const auto& v : world.vehicles()) out.emplace_back(v.station, v.d, v.v);
        std::sort(out.begin(), out.end());
        return out;
    };
    EXPECT_EQ(run(false), run(true));
}

TEST(World, KeepersNeverTurnAndRewardsAreNonPositive) {
    WorldConfig cfg;
    World world(cfg, 12);
    ConstantYaw policy(0.05);
    int episodes = 0;
    for (int k = 0; k < 5000; ++k) {
        const auto out = world.step(policy);
        for (const auto& v : world.vehicles()) {
            if (v.maneuver == Maneuver::keeping) {
                ASSERT_EQ(v.theta, 0.0);
                ASSERT_EQ(v.omega, 0.0);
                ASSERT_EQ(v.d, cfg.road.lane_center(v.lane));
            }
        }
        for (const auto& a : out.agent_steps) {
            ASSERT_LE(a.reward.r, 0.0);
            ASSERT_EQ(a.reward.r, a.reward.r_acce + a.reward.r_rate + a.reward.r_dev);
        }
        for (const auto& e : out.closed_episodes) {
            ++episodes;
            ASSERT_LE(e.R_acce, 0.0);
            ASSERT_LE(e.R_rate, 0.0);
            ASSERT_LE(e.R_dev, 0.0);
            ASSERT_LE(e.steps, cfg.completion.episode_cap_steps);
            ASSERT_EQ(e.duration, e.steps * cfg.dt);
        }
    }
    EXPECT_GT(episodes, 0);
}

TEST(World, EpisodeCapClosesTerminal) {
    WorldConfig cfg;
    World world(cfg, 1);
    world.set_spawning(false);
    const int ego = world.add_vehicle(keeper(100.0, 1, 10.0, 10.0, cfg));
    world.command_lane_change(ego, -1);
    ZeroYaw policy;  // never moves laterally, so never completes
    std::optional<EpisodeMetrics> closed;
    int steps = 0;
    while (!closed && steps < 1000) {
        const auto out = world.step(policy);
        ++steps;
        if (!out.closed_episodes.empty()) {
            closed = out.closed_episodes.front();
            EXPECT_TRUE(out.agent_steps.front().terminal);
        }
    }
    ASSERT_TRUE(closed);
    EXPECT_EQ(closed->outcome, Outcome::truncated);
    EXPECT_EQ(closed->steps, 300);
    EXPECT_EQ(world.find(ego), nullptr);  // retired with its episode
}

TEST(World, GreedyEpisodesCarryTheirTransitions) {
    WorldConfig cfg;
    World world(cfg, 2);
    RngStream init(2, "init");
    const auto params = nafq::naf_init(nafq::NafConstants{}, init);
    NafPolicy policy(params);
    std::map<int, int> steps_seen;
    int closed = 0;
    for (int k = 0; k < 4000; ++k) {
        const auto out = world.step(policy);
        for (const auto& a : out.agent_steps) {
            ASSERT_EQ(a.a, nafq::greedy_action(a.s, params));
            ++steps_seen[a.vehicle_id];
        }
        for (const auto& e : out.closed_episodes) {
            EXPECT_EQ(steps_seen[e.vehicle_id], e.steps);
            steps_seen.erase(e.vehicle_id);
            ++closed;
        }
    }
    EXPECT_GT(closed, 0);
}

TEST(Safety, NoOverlapWithoutLaneChanges) {
    const WorldConfig cfg = no_lane_changes();
    for (std::uint64_t seed : {1u, 2u}) {
        World world(cfg, seed);
        ZeroYaw policy;
        for (int k = 0; k < 3000; ++k) {
            const auto out = world.step(policy);
            ASSERT_TRUE(out.faults.empty());
            ASSERT_GT(out.min_gap, 0.0);
        }
    }
}

TEST(Safety, StrictModeThrowsOnOverlap) {
    WorldConfig cfg = no_lane_changes();
    cfg.strict = true;
    World world(cfg, 1);
    world.set_spawning(false);
    world.add_vehicle(keeper(100.0, 1, 20.0, 25.0, cfg));
    world.add_vehicle(keeper(103.0, 1, 20.0, 25.0, cfg));
    ZeroYaw policy;
    EXPECT_THROW(world.step(policy), SimulationError);

    cfg.strict = false;
    World lenient(cfg, 1);
    lenient.set_spawning(false);
    lenient.add_vehicle(keeper(100.0, 1, 20.0, 25.0, cfg));
    lenient.add_vehicle(keeper(103.0, 1, 20.0, 25.0, cfg));
    const auto out = lenient.step(policy);
    EXPECT_FALSE(out.faults.empty());
}

TEST(Config, ValidateRejectsBadRanges) {
    WorldConfig cfg;
    cfg.traffic.departure_interval_min = 11.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = WorldConfig{};
    cfg.traffic.change_prob_left = 0.7;
    cfg.traffic.change_prob_right = 0.7;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = WorldConfig{};
    cfg.road.curvature_profile = {{0.0, 0.5}};
    EXPECT_THROW(cfg.validate(), ConfigError);
}
