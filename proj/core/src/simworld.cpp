#include "nafdrive/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nafdrive/error.hpp"
#include "nafdrive/gapcheck.hpp"

namespace nafdrive::sim {

namespace {

constexpr double kOverlapGapFloor = 0.01;  // m, used in lenient mode once vehicles already overlap

// (station, id) ordering so that vehicles at equal stations still have a definite order.
bool is_ahead(const VehicleState& a, const VehicleState& b) {
    return a.station > b.station || (a.station == b.station && a.id > b.id);
}

}  // namespace

// ---------------------------------------------------------------------------
// configuration

int RoadSpec::lane_at(double d) const {
    const int lane = static_cast<int>(std::floor(d / lane_width));
    return std::clamp(lane, 0, lanes - 1);
}

double RoadSpec::curvature_at(double station) const {
    double c = 0.0;
    for (const auto& seg : curvature_profile) {
        if (station >= seg.start_station) {
            c = seg.curvature;
        }
    }
    return c;
}

void RoadSpec::validate() const {
    if (lanes < 1) {
        throw ConfigError("road.lanes must be >= 1");
    }
    if (!(lane_width > 0.0)) {
        throw ConfigError("road.lane_width must be > 0");
    }
    if (!(length > 0.0)) {
        throw ConfigError("road.length must be > 0");
    }
    double prev = -std::numeric_limits<double>::infinity();
    for (const auto& seg : curvature_profile) {
        if (!(seg.start_station > prev)) {
            throw ConfigError("road.curvature_profile stations must be strictly increasing");
        }
        if (!(std::abs(seg.curvature) * lane_width * lanes < 1.0)) {
            throw ConfigError("road.curvature_profile curvature too large for the road width");
        }
        prev = seg.start_station;
    }
}

void TrafficConfig::validate() const {
    auto ordered = [](double lo, double hi, const char* name) {
        if (!(lo > 0.0) || !(lo <= hi)) {
            throw ConfigError(std::string("traffic.") + name + " range must be positive and ordered");
        }
    };
    ordered(departure_interval_min, departure_interval_max, "departure_interval");
    ordered(initial_speed_min, initial_speed_max, "initial_speed");
    ordered(desired_speed_min, desired_speed_max, "desired_speed");
    if (!(lane_change_trigger_station >= 0.0)) {
        throw ConfigError("traffic.lane_change_trigger_station must be >= 0");
    }
    if (!(change_prob_left >= 0.0) || !(change_prob_right >= 0.0) || change_prob_left + change_prob_right > 1.0) {
        throw ConfigError("traffic change probabilities must be >= 0 and sum to <= 1");
    }
    if (!(entry_zone > 0.0) || !(command_timeout >= 0.0)) {
        throw ConfigError("traffic.entry_zone must be > 0 and traffic.command_timeout >= 0");
    }
}

void RewardWeights::validate() const {
    if (!(w_acce > 0.0 && w_rate > 0.0 && w_dev > 0.0 && d_avg > 0.0)) {
        throw ConfigError("reward weights and d_avg must be strictly positive");
    }
}

void WorldConfig::validate() const {
    road.validate();
    traffic.validate();
    reward.validate();
    idm.validate();
    if (!(dt > 0.0) || !(vehicle_length > 0.0) || !(sensing_range > 0.0)) {
        throw ConfigError("world dt, vehicle_length and sensing_range must be > 0");
    }
    if (completion.episode_cap_steps < 1 || !(completion.max_abs_deviation > 0.0) ||
        !(completion.max_abs_theta > 0.0) || !(completion.max_abs_omega > 0.0)) {
        throw ConfigError("completion thresholds must be > 0 and episode cap >= 1");
    }
}

std::string_view maneuver_name(Maneuver m) {
    switch (m) {
        case Maneuver::keeping: return "keeping";
        case Maneuver::changing: return "changing";
        case Maneuver::aborting: return "aborting";
    }
    return "?";
}

std::string_view outcome_name(Outcome o) {
    switch (o) {
        case Outcome::completed: return "completed";
        case Outcome::aborted: return "aborted";
        case Outcome::truncated: return "truncated";
    }
    return "?";
}

std::optional<Outcome> parse_outcome(std::string_view name) {
    for (Outcome o : {Outcome::completed, Outcome::aborted, Outcome::truncated}) {
        if (outcome_name(o) == name) {
            return o;
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// pure operations

VehicleState step_kinematics(const VehicleState& state, double a_lng_cmd, double a_yaw_cmd, double dt, double c) {
    VehicleState next = state;
    next.omega = state.omega + a_yaw_cmd * dt;
    next.theta = state.theta + next.omega * dt;
    next.v = std::max(0.0, state.v + a_lng_cmd * dt);
    next.theta -= c * next.v * dt;
    next.station = state.station + next.v * std::cos(next.theta) * dt;
    next.d = state.d + next.v * std::sin(next.theta) * dt;
    next.a_lng = a_lng_cmd;
    return next;
}

RewardComponents immediate_reward(double action, const RlState& next_state, const RewardWeights& w) {
    RewardComponents r;
    r.r_acce = -w.w_acce * std::abs(action);
    r.r_rate = -w.w_rate * std::abs(next_state.omega);
    r.r_dev = -w.w_dev * std::abs(next_state.delta_d_lat) / w.d_avg;
    r.r = r.r_acce + r.r_rate + r.r_dev;
    return r;
}

void accumulate_metrics(EpisodeMetrics& metrics, const RewardComponents& step) {
    metrics.R_acce += step.r_acce;
    metrics.R_rate += step.r_rate;
    metrics.R_dev += step.r_dev;
    metrics.steps += 1;
}

Completion completion_check(const RlState& ego_state, const CompletionSpec& spec) {
    const bool done = std::abs(ego_state.delta_d_lat) <= spec.max_abs_deviation &&
                      std::abs(ego_state.theta) <= spec.max_abs_theta &&
                      std::abs(ego_state.omega) <= spec.max_abs_omega;
    return done ? Completion::done : Completion::active;
}

double NafPolicy::act(const RlState& state, int /*vehicle_id*/) {
    if (rng_ == nullptr) {
        return nafq::greedy_action(state, *params_);
    }
    return nafq::explore_action(state, *params_, sigma_, *rng_);
}

// ---------------------------------------------------------------------------
// World

World::World(WorldConfig config, std::uint64_t master_seed)
    : World(std::move(config), RngStream(master_seed, "spawn"), RngStream(master_seed, "trigger")) {}

World::World(WorldConfig config, RngStream spawn_rng, RngStream trigger_rng)
    : config_(std::move(config)), spawn_rng_(std::move(spawn_rng)), trigger_rng_(std::move(trigger_rng)) {
    config_.validate();
    next_departure_.resize(static_cast<std::size_t>(config_.road.lanes));
    for (auto& t : next_departure_) {
        t = spawn_rng_.uniform(config_.traffic.departure_interval_min, config_.traffic.departure_interval_max);
    }
}

const VehicleState* World::find(int vehicle_id) const {
    auto it = std::lower_bound(vehicles_.begin(), vehicles_.end(), vehicle_id,
                               [](const VehicleState& v, int id) { return v.id < id; });
    return (it != vehicles_.end() && it->id == vehicle_id) ? &*it : nullptr;
}

VehicleState* World::find_mut(int vehicle_id) { return const_cast<VehicleState*>(std::as_const(*this).find(vehicle_id)); }

int World::add_vehicle(VehicleState state) {
    state.id = next_id_++;
    vehicles_.push_back(state);
    return state.id;
}

int World::occupancy_lane(const VehicleState& v) const {
    if (v.maneuver == Maneuver::keeping) {
        return v.lane;
    }
    if (v.d < 0.0 || v.d > config_.road.lanes * config_.road.lane_width) {
        return kOffRoad;
    }
    return config_.road.lane_at(v.d);
}

bool World::committed(const VehicleState& v) const {
    if (v.maneuver == Maneuver::keeping || v.target_lane == v.origin_lane) {
        return false;
    }
    const double boundary = std::max(v.origin_lane, v.target_lane) * config_.road.lane_width;
    return v.target_lane > v.origin_lane ? v.d >= boundary : v.d <= boundary;
}

std::optional<NeighborRef> World::leader_in_lane(int lane, const VehicleState& ego) const {
    std::optional<NeighborRef> best;
    if (lane == kOffRoad) {
        return best;
    }
    for (const auto& other : vehicles_) {
        if (other.id == ego.id || occupancy_lane(other) != lane || !is_ahead(other, ego)) {
            continue;
        }
        if (!best || is_ahead(*best->vehicle, other)) {
            best = NeighborRef{&other, other.station - other.length - ego.station};
        }
    }
    if (best && best->gap > config_.sensing_range) {
        return std::nullopt;
    }
    return best;
}

std::optional<NeighborRef> World::follower_in_lane(int lane, const VehicleState& ego) const {
    std::optional<NeighborRef> best;
    if (lane == kOffRoad) {
        return best;
    }
    for (const auto& other : vehicles_) {
        if (other.id == ego.id || occupancy_lane(other) != lane || !is_ahead(ego, other)) {
            continue;
        }
        if (!best || is_ahead(other, *best->vehicle)) {
            best = NeighborRef{&other, ego.station - ego.length - other.station};
        }
    }
    if (best && best->gap > config_.sensing_range) {
        return std::nullopt;
    }
    return best;
}

RlState World::build_rl_state(const VehicleState& ego) const {
    RlState s;
    s.v = ego.v;
    s.a_lng = ego.a_lng;
    s.delta_d_lat = config_.road.lane_center(ego.target_lane) - ego.d;
    s.theta = ego.theta;
    s.omega = ego.omega;
    s.c = config_.road.curvature_at(ego.station);
    return s;
}

void World::spawn_traffic() {
    if (!spawning_) {
        return;
    }
    const auto& tc = config_.traffic;
    for (int lane = 0; lane < config_.road.lanes; ++lane) {
        auto& due = next_departure_[static_cast<std::size_t>(lane)];
        if (time_ + 1e-9 < due) {
            continue;
        }
        const bool clear = std::none_of(vehicles_.begin(), vehicles_.end(), [&](const VehicleState& v) {
            return occupancy_lane(v) == lane && v.station < tc.entry_zone;
        });
        if (!clear) {
            continue;  // deferred to the next step with a clear entry zone
        }
        VehicleState v;
        v.station = 0.0;
        v.lane = v.target_lane = v.origin_lane = lane;
        v.d = config_.road.lane_center(lane);
        v.v = spawn_rng_.uniform(tc.initial_speed_min, tc.initial_speed_max);
        v.v0 = spawn_rng_.uniform(tc.desired_speed_min, tc.desired_speed_max);
        v.length = config_.vehicle_length;
        add_vehicle(v);
        due = time_ + spawn_rng_.uniform(tc.departure_interval_min, tc.departure_interval_max);
    }
}

std::vector<LaneChangeCommand> World::lane_change_trigger() {
    std::vector<LaneChangeCommand> commands;
    const auto& tc = config_.traffic;
    const int middle = config_.road.middle_lane();
    for (auto& v : vehicles_) {
        if (v.trigger_drawn || v.maneuver != Maneuver::keeping || v.lane != middle ||
            v.station < tc.lane_change_trigger_station) {
            continue;
        }
        v.trigger_drawn = true;
        const double u = trigger_rng_.uniform(0.0, 1.0);
        if (u < tc.change_prob_left) {
            commands.push_back({v.id, +1});
        } else if (u < tc.change_prob_left + tc.change_prob_right) {
            commands.push_back({v.id, -1});
        }
    }
    return commands;
}

void World::command_lane_change(int vehicle_id, int direction) {
    if (direction != 1 && direction != -1) {
        throw ContractError("lane-change direction must be +1 (left) or -1 (right)");
    }
    if (find(vehicle_id) == nullptr) {
        throw ContractError("lane-change command for unknown vehicle " + std::to_string(vehicle_id));
    }
    pending_[vehicle_id] = PendingCommand{direction, step_index_};
}

void World::start_pending_changes() {
    const auto timeout_steps = static_cast<std::int64_t>(std::llround(config_.traffic.command_timeout / config_.dt));
    for (auto it = pending_.begin(); it != pending_.end();) {
        VehicleState* v = find_mut(it->first);
        const int target = v ? v->lane + it->second.direction : -1;
        if (v == nullptr || v->maneuver != Maneuver::keeping || target < 0 || target >= config_.road.lanes) {
            it = pending_.erase(it);
            continue;
        }
        if (gap::assess_target_gap(*this, *v, target).acceptable) {
            v->maneuver = Maneuver::changing;
            v->origin_lane = v->lane;
            v->target_lane = target;
            EpisodeMetrics m;
            m.vehicle_id = v->id;
            m.start_step = step_index_;
            episodes_[v->id] = OpenEpisode{m};
            it = pending_.erase(it);
        } else if (step_index_ - it->second.issued_step >= timeout_steps) {
            it = pending_.erase(it);
        } else {
            ++it;
        }
    }
}

std::optional<longitudinal::Leader> World::sensed_leader(int lane, const VehicleState& ego,
                                                         std::vector<Fault>& faults) const {
    auto ref = leader_in_lane(lane, ego);
    if (!ref) {
        return std::nullopt;
    }
    double gap = ref->gap;
    if (!(gap > 0.0)) {
        if (config_.strict) {
            throw SimulationError("vehicle " + std::to_string(ego.id) + " overlaps leader " +
                                  std::to_string(ref->vehicle->id) + " (gap " + std::to_string(gap) + " m)");
        }
        faults.push_back(Fault{step_index_, ego.id, ref->vehicle->id, gap});
        gap = kOverlapGapFloor;
    }
    return longitudinal::Leader{gap, ref->vehicle->v};
}

double World::longitudinal_command(const VehicleState& v, std::vector<Fault>& faults) const {
    auto idm = config_.idm;
    idm.v0 = v.v0;
    const int own = occupancy_lane(v);
    const auto own_leader = sensed_leader(own, v, faults);
    if (v.maneuver == Maneuver::keeping || v.target_lane == own) {
        return longitudinal::single_leader_accel(v.v, own_leader, idm);
    }
    const auto target_leader = sensed_leader(v.target_lane, v, faults);
    return longitudinal::dual_leader_accel(v.v, own_leader, target_leader, idm);
}

void World::retire(int vehicle_id) {
    vehicles_.erase(std::remove_if(vehicles_.begin(), vehicles_.end(),
                                   [&](const VehicleState& v) { return v.id == vehicle_id; }),
                    vehicles_.end());
    pending_.erase(vehicle_id);
    episodes_.erase(vehicle_id);
}

double World::min_gap_and_faults(std::vector<Fault>& faults) const {
    double min_gap = std::numeric_limits<double>::infinity();
    for (const auto& v : vehicles_) {
        auto ref = leader_in_lane(occupancy_lane(v), v);
        if (!ref) {
            continue;
        }
        min_gap = std::min(min_gap, ref->gap);
        if (!(ref->gap > 0.0)) {
            if (config_.strict) {
                throw SimulationError("vehicle " + std::to_string(v.id) + " overlaps leader " +
                                      std::to_string(ref->vehicle->id) + " after step " +
                                      std::to_string(step_index_));
            }
            faults.push_back(Fault{step_index_, v.id, ref->vehicle->id, ref->gap});
        }
    }
    return min_gap;
}

StepOutput World::step(LateralPolicy& policy) {
    StepOutput out;
    out.step = step_index_;
    const double dt = config_.dt;

    spawn_traffic();
    for (const auto& cmd : lane_change_trigger()) {
        command_lane_change(cmd.vehicle_id, cmd.direction);
    }
    start_pending_changes();

    for (auto& v : vehicles_) {
        if (v.maneuver == Maneuver::changing && gap::monitor_step(*this, v) == gap::MonitorDecision::abort) {
            v.maneuver = Maneuver::aborting;
            v.target_lane = v.origin_lane;
        }
    }

    // Everything below reads the pre-step snapshot only.
    const std::vector<VehicleState> snapshot = vehicles_;
    struct Command {
        double a_lng = 0.0;
        double a_yaw = 0.0;
        RlState s;
        bool acting = false;
    };
    std::vector<Command> commands(snapshot.size());
    for (std::size_t i = 0; i < snapshot.size(); ++i) {
        const auto& v = snapshot[i];
        if (v.maneuver != Maneuver::keeping) {
            commands[i].acting = true;
            commands[i].s = build_rl_state(v);
            commands[i].a_yaw = policy.act(commands[i].s, v.id);
            if (!std::isfinite(commands[i].a_yaw)) {
                throw NumericError("policy returned a non-finite yaw acceleration for vehicle " +
                                   std::to_string(v.id));
            }
        }
    }
    for (std::size_t i = 0; i < snapshot.size(); ++i) {
        commands[i].a_lng = longitudinal_command(snapshot[i], out.faults);
    }

    for (std::size_t i = 0; i < snapshot.size(); ++i) {
        const auto& v = snapshot[i];
        if (commands[i].acting) {
            vehicles_[i] = step_kinematics(v, commands[i].a_lng, commands[i].a_yaw, dt,
                                           config_.road.curvature_at(v.station));
        } else {
            vehicles_[i] = step_kinematics(v, commands[i].a_lng, 0.0, dt, 0.0);
        }
    }

    std::vector<int> to_retire;
    for (std::size_t i = 0; i < snapshot.size(); ++i) {
        auto& v = vehicles_[i];
        const bool off_road = v.station > config_.road.length || v.station < 0.0;
        if (!commands[i].acting) {
            if (off_road) {
                to_retire.push_back(v.id);
            }
            continue;
        }
        AgentStep step;
        step.vehicle_id = v.id;
        step.s = commands[i].s;
        step.a = commands[i].a_yaw;
        step.s_next = build_rl_state(v);
        step.reward = immediate_reward(step.a, step.s_next, config_.reward);
        step.after = v;

        auto& episode = episodes_.at(v.id).metrics;
        accumulate_metrics(episode, step.reward);

        std::optional<Outcome> closed;
        if (completion_check(step.s_next, config_.completion) == Completion::done) {
            closed = v.target_lane == v.origin_lane ? Outcome::aborted : Outcome::completed;
            v.maneuver = Maneuver::keeping;
            v.lane = v.target_lane;
            v.origin_lane = v.target_lane;
            v.theta = 0.0;
            v.omega = 0.0;
        } else if (episode.steps >= config_.completion.episode_cap_steps || off_road) {
            closed = Outcome::truncated;
            to_retire.push_back(v.id);
        }
        if (closed) {
            step.terminal = true;
            episode.end_step = step_index_;
            episode.duration = episode.steps * dt;
            episode.outcome = *closed;
            out.closed_episodes.push_back(episode);
            episodes_.erase(v.id);
        }
        out.agent_steps.push_back(step);
    }
    for (int id : to_retire) {
        retire(id);
    }

    out.min_gap = min_gap_and_faults(out.faults);
    time_ += dt;
    step_index_ += 1;
    return out;
}

}  // namespace nafdrive::sim
