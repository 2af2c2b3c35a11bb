#pragma once

#include <optional>

namespace nafdrive::longitudinal {

/// Modified IDM parameters. `v0` is per vehicle; `b_max` clamps braking.
struct IdmParams {
    double s0 = 5.0;     // m, minimum spacing
    double T = 1.0;      // s, minimum time headway
    double a_m = 2.0;    // m/s^2, maximum acceleration
    double b = 1.5;      // m/s^2, comfortable braking
    double delta = 4.0;  // free-road exponent
    double v0 = 30.0;    // m/s, desired free-flow speed
    double b_max = 9.0;  // m/s^2, physical deceleration limit

    void validate() const;
    bool operator==(const IdmParams&) const = default;
};

/// A leader as seen by the follower: bumper-to-bumper gap and leader speed.
struct Leader {
    double gap = 0.0;  // m
    double v = 0.0;    // m/s
};

/// Modified IDM acceleration toward a leader; `delta_v` = v_ego - v_leader.
/// Throws SimulationError when gap <= 0.
double idm_accel(double v, double delta_v, double gap, const IdmParams& p);

/// Free-road acceleration used when no leader is sensed.
double free_leader_accel(double v, const IdmParams& p);

/// Acceleration toward one optional leader (free road when absent).
double single_leader_accel(double v, const std::optional<Leader>& leader, const IdmParams& p);

/// Minimum of the accelerations toward each present leader; free road when neither exists.
double dual_leader_accel(double v, const std::optional<Leader>& ego_lane_leader,
                         const std::optional<Leader>& target_lane_leader, const IdmParams& p);

}  // namespace nafdrive::longitudinal
