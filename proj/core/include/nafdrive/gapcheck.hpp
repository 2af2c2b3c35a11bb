#pragma once

#include <optional>

#include "nafdrive/longitudinal.hpp"
#include "nafdrive/simworld.hpp"

namespace nafdrive::gap {

/// A neighbor on the target lane: bumper-to-bumper gap to the ego and its speed.
struct Neighbor {
    double gap = 0.0;  // m, negative when the vehicles overlap longitudinally
    double v = 0.0;    // m/s
};

struct GapAssessment {
    double lead_gap = 0.0;
    double follow_gap = 0.0;
    double lead_required = 0.0;
    double follow_required = 0.0;
    bool acceptable = false;
};

/// IDM desired gap between a rear and a front vehicle; never below s0.
double required_gap(double v_rear, double v_front, const longitudinal::IdmParams& p);

/// Absent neighbors leave their side automatically satisfied (infinite gap, zero requirement).
GapAssessment gap_acceptable(double v_ego, const std::optional<Neighbor>& target_leader,
                             const std::optional<Neighbor>& target_follower, const longitudinal::IdmParams& p);

/// Gap assessment of `ego` against the current target-lane neighbors in `world`.
GapAssessment assess_target_gap(const sim::World& world, const sim::VehicleState& ego, int target_lane);

enum class MonitorDecision { keep_going, abort };

/// Safety guard run every step for a vehicle mid-lane-change. Before the commit point an
/// unacceptable target gap aborts the maneuver; once committed the change always continues.
MonitorDecision monitor_step(const sim::World& world, const sim::VehicleState& ego);

}  // namespace nafdrive::gap
