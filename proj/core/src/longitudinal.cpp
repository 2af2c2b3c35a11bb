#include "nafdrive/longitudinal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nafdrive/error.hpp"

namespace nafdrive::longitudinal {

void IdmParams::validate() const {
    if (!(s0 > 0.0 && T > 0.0 && a_m > 0.0 && b > 0.0 && delta > 0.0 && v0 > 0.0 && b_max > 0.0)) {
        throw ConfigError("IDM parameters must be strictly positive");
    }
    if (b_max < b) {
        throw ConfigError("IDM b_max must be >= b");
    }
}

double idm_accel(double v, double delta_v, double gap, const IdmParams& p) {
    if (!(gap > 0.0)) {
        throw SimulationError("idm_accel: non-positive gap " + std::to_string(gap) + " m (vehicles overlap)");
    }
    const double free_term = std::pow(v / p.v0, p.delta);
    // A negative bracket would be squared into spurious braking; the desired gap never goes below zero.
    const double bracket =
        std::max(0.0, (p.s0 + v * p.T) / gap + v * delta_v / (2.0 * std::sqrt(p.a_m * p.b) * gap));
    const double raw = p.a_m * (1.0 - std::max(free_term, bracket * bracket));
    return std::clamp(raw, -p.b_max, p.a_m);
}

double free_leader_accel(double v, const IdmParams& p) {
    return std::clamp(p.a_m * (1.0 - std::pow(v / p.v0, p.delta)), -p.b_max, p.a_m);
}

double single_leader_accel(double v, const std::optional<Leader>& leader, const IdmParams& p) {
    return leader ? idm_accel(v, v - leader->v, leader->gap, p) : free_leader_accel(v, p);
}

double dual_leader_accel(double v, const std::optional<Leader>& ego_lane_leader,
                         const std::optional<Leader>& target_lane_leader, const IdmParams& p) {
    if (!ego_lane_leader && !target_lane_leader) {
        return free_leader_accel(v, p);
    }
    double a = p.a_m;
    if (ego_lane_leader) {
        a = std::min(a, idm_accel(v, v - ego_lane_leader->v, ego_lane_leader->gap, p));
    }
    if (target_lane_leader) {
        a = std::min(a, idm_accel(v, v - target_lane_leader->v, target_lane_leader->gap, p));
    }
    return a;
}

}  // namespace nafdrive::longitudinal
