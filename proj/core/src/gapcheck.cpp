#include "nafdrive/gapcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nafdrive::gap {

double required_gap(double v_rear, double v_front, const longitudinal::IdmParams& p) {
    const double dynamic = v_rear * p.T + v_rear * (v_rear - v_front) / (2.0 * std::sqrt(p.a_m * p.b));
    return p.s0 + std::max(0.0, dynamic);
}

GapAssessment gap_acceptable(double v_ego, const std::optional<Neighbor>& target_leader,
                             const std::optional<Neighbor>& target_follower, const longitudinal::IdmParams& p) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    GapAssessment a;
    a.lead_gap = target_leader ? target_leader->gap : inf;
    a.lead_required = target_leader ? required_gap(v_ego, target_leader->v, p) : 0.0;
    a.follow_gap = target_follower ? target_follower->gap : inf;
    a.follow_required = target_follower ? required_gap(target_follower->v, v_ego, p) : 0.0;
    const bool overlapping = a.lead_gap < 0.0 || a.follow_gap < 0.0;
    a.acceptable = !overlapping && a.lead_gap >= a.lead_required && a.follow_gap >= a.follow_required;
    return a;
}

GapAssessment assess_target_gap(const sim::World& world, const sim::VehicleState& ego, int target_lane) {
    std::optional<Neighbor> leader;
    std::optional<Neighbor> follower;
    if (auto l = world.leader_in_lane(target_lane, ego)) {
        leader = Neighbor{l->gap, l->vehicle->v};
    }
    if (auto f = world.follower_in_lane(target_lane, ego)) {
        follower = Neighbor{f->gap, f->vehicle->v};
    }
    return gap_acceptable(ego.v, leader, follower, world.config().idm);
}

MonitorDecision monitor_step(const sim::World& world, const sim::VehicleState& ego) {
    if (ego.maneuver != sim::Maneuver::changing || world.committed(ego)) {
        return MonitorDecision::keep_going;
    }
    return assess_target_gap(world, ego, ego.target_lane).acceptable ? MonitorDecision::keep_going
                                                                     : MonitorDecision::abort;
}

}  // namespace nafdrive::gap
