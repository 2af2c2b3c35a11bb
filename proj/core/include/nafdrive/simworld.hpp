#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nafdrive/longitudinal.hpp"
#include "nafdrive/nafq.hpp"
#include "nafdrive/rng.hpp"

namespace nafdrive::sim {

using nafq::RlState;

/// Constant-curvature arc beginning at `start_station` and running to the next segment.
struct CurvatureSegment {
    double start_station = 0.0;  // m
    double curvature = 0.0;      // 1/m
    bool operator==(const CurvatureSegment&) const = default;
};

/// One direction of a straight-or-arc highway. Lane 0 is rightmost; lateral offset d
/// is measured leftward from the right road edge.
struct RoadSpec {
    int lanes = 3;
    double lane_width = 3.75;  // m
    double length = 1000.0;    // m
    std::vector<CurvatureSegment> curvature_profile;

    double lane_center(int lane) const { return (lane + 0.5) * lane_width; }
    int lane_at(double d) const;  // clamped to [0, lanes-1]
    double curvature_at(double station) const;
    int middle_lane() const { return lanes / 2; }
    void validate() const;
    bool operator==(const RoadSpec&) const = default;
};

struct TrafficConfig {
    double departure_interval_min = 5.0;  // s
    double departure_interval_max = 10.0;
    double initial_speed_min = 30.0 / 3.6;  // m/s
    double initial_speed_max = 50.0 / 3.6;
    double desired_speed_min = 80.0 / 3.6;
    double desired_speed_max = 120.0 / 3.6;
    double lane_change_trigger_station = 150.0;  // m
    double change_prob_left = 1.0 / 6.0;
    double change_prob_right = 1.0 / 6.0;
    double entry_zone = 15.0;          // m kept clear before a vehicle may enter
    double command_timeout = 10.0;     // s a rejected lane-change command stays pending

    void validate() const;
    bool operator==(const TrafficConfig&) const = default;
};

struct RewardWeights {
    double w_acce = 2.0;
    double w_rate = 0.5;
    double w_dev = 0.05;
    double d_avg = 1.875;  // m, half a lane width

    void validate() const;
    bool operator==(const RewardWeights&) const = default;
};

/// Lane-change completion tolerances and the per-episode step cap.
struct CompletionSpec {
    double max_abs_deviation = 0.05;  // m
    double max_abs_theta = 0.01;      // rad
    double max_abs_omega = 0.05;      // rad/s
    int episode_cap_steps = 300;
    bool operator==(const CompletionSpec&) const = default;
};

struct WorldConfig {
    RoadSpec road;
    TrafficConfig traffic;
    RewardWeights reward;
    longitudinal::IdmParams idm;  // v0 is replaced per vehicle
    CompletionSpec completion;
    double dt = 0.1;                // s
    double vehicle_length = 5.0;    // m
    double sensing_range = 150.0;   // m
    bool strict = false;            // throw on overlapping vehicles instead of recording a fault

    void validate() const;
    bool operator==(const WorldConfig&) const = default;
};

enum class Maneuver { keeping, changing, aborting };
std::string_view maneuver_name(Maneuver m);

struct VehicleState {
    int id = 0;
    double station = 0.0;  // m along the road
    double d = 0.0;        // m from the right road edge
    double v = 0.0;        // m/s
    double a_lng = 0.0;    // m/s^2, last applied longitudinal command
    double theta = 0.0;    // rad, positive = leftward
    double omega = 0.0;    // rad/s
    int lane = 0;
    int target_lane = 0;
    int origin_lane = 0;
    Maneuver maneuver = Maneuver::keeping;
    double v0 = 30.0;      // m/s
    double length = 5.0;   // m
    bool trigger_drawn = false;

    bool operator==(const VehicleState&) const = default;
};

enum class Outcome { completed, aborted, truncated };
std::string_view outcome_name(Outcome o);
std::optional<Outcome> parse_outcome(std::string_view name);

struct RewardComponents {
    double r = 0.0;
    double r_acce = 0.0;
    double r_rate = 0.0;
    double r_dev = 0.0;
};

/// Accumulated reward of one lane-change episode. The total is the sum of the
/// three component totals, so the decomposition holds exactly.
struct EpisodeMetrics {
    int vehicle_id = 0;
    std::int64_t start_step = 0;
    std::int64_t end_step = 0;
    int steps = 0;
    double duration = 0.0;  // s
    double R_acce = 0.0;
    double R_rate = 0.0;
    double R_dev = 0.0;
    Outcome outcome = Outcome::completed;

    double R() const { return R_acce + R_rate + R_dev; }
};

/// Semi-implicit kinematic update in lane-centric coordinates.
VehicleState step_kinematics(const VehicleState& state, double a_lng_cmd, double a_yaw_cmd, double dt, double c);

RewardComponents immediate_reward(double action, const RlState& next_state, const RewardWeights& w);

void accumulate_metrics(EpisodeMetrics& metrics, const RewardComponents& step);

enum class Completion { active, done };

/// Done when the ego sits on its target lane center with small heading and yaw rate.
Completion completion_check(const RlState& ego_state, const CompletionSpec& spec);

/// Lateral control for vehicles mid-maneuver.
class LateralPolicy {
public:
    virtual ~LateralPolicy() = default;
    virtual double act(const RlState& state, int vehicle_id) = 0;
};

/// Greedy or exploring policy backed by Q-function parameters.
class NafPolicy final : public LateralPolicy {
public:
    /// Greedy: always mu(s).
    explicit NafPolicy(const nafq::NafParams& params) : params_(&params) {}
    /// Exploring: mu(s) plus clipped Gaussian noise of the given sigma.
    NafPolicy(const nafq::NafParams& params, double sigma, RngStream& rng)
        : params_(&params), sigma_(sigma), rng_(&rng) {}

    double act(const RlState& state, int vehicle_id) override;
    void set_sigma(double sigma) { sigma_ = sigma; }

private:
    const nafq::NafParams* params_;
    double sigma_ = 0.0;
    RngStream* rng_ = nullptr;
};

/// One acting vehicle's transition for the step.
struct AgentStep {
    int vehicle_id = 0;
    RlState s;
    double a = 0.0;
    RlState s_next;
    RewardComponents reward;
    bool terminal = false;
    VehicleState after;  // post-step state (before completion snapping)
};

struct Fault {
    std::int64_t step = 0;
    int follower_id = 0;
    int leader_id = 0;
    double gap = 0.0;
};

struct LaneChangeCommand {
    int vehicle_id = 0;
    int direction = 0;  // +1 left, -1 right
};

struct StepOutput {
    std::int64_t step = 0;
    std::vector<AgentStep> agent_steps;
    std::vector<EpisodeMetrics> closed_episodes;
    std::vector<Fault> faults;
    double min_gap = std::numeric_limits<double>::infinity();
};

/// Neighbor in a lane relative to a reference station.
struct NeighborRef {
    const VehicleState* vehicle = nullptr;
    double gap = 0.0;  // bumper-to-bumper, m
};

/// The highway simulator. Vehicles are kept ordered by id, and all accelerations
/// of a step are computed from the pre-step snapshot.
class World {
public:
    static constexpr int kOffRoad = -1;

    World(WorldConfig config, std::uint64_t master_seed);
    World(WorldConfig config, RngStream spawn_rng, RngStream trigger_rng);

    StepOutput step(LateralPolicy& policy);

    /// Enters new vehicles whose departure time has elapsed and whose entry zone is clear.
    void spawn_traffic();
    /// Draws lane-change commands for middle-lane keepers passing the trigger station.
    std::vector<LaneChangeCommand> lane_change_trigger();

    /// Queues a lane-change command; it starts once the target gap is acceptable.
    void command_lane_change(int vehicle_id, int direction);
    /// Inserts a vehicle directly (tests and scripted scenarios). Returns its id.
    int add_vehicle(VehicleState state);
    void set_spawning(bool enabled) { spawning_ = enabled; }

    RlState build_rl_state(const VehicleState& ego) const;

    /// Lane occupied by the vehicle for car-following purposes; kOffRoad once a maneuvering
    /// vehicle has left the paved width (it then interacts with nobody).
    int occupancy_lane(const VehicleState& v) const;
    /// Whether a maneuvering vehicle's lateral center has crossed into its target lane.
    bool committed(const VehicleState& v) const;

    std::optional<NeighborRef> leader_in_lane(int lane, const VehicleState& ego) const;
    std::optional<NeighborRef> follower_in_lane(int lane, const VehicleState& ego) const;

    const WorldConfig& config() const { return config_; }
    const std::vector<VehicleState>& vehicles() const { return vehicles_; }
    const VehicleState* find(int vehicle_id) const;
    VehicleState* find_mut(int vehicle_id);
    double time() const { return time_; }
    std::int64_t step_index() const { return step_index_; }
    std::size_t open_episodes() const { return episodes_.size(); }

private:
    struct OpenEpisode {
        EpisodeMetrics metrics;
    };
    struct PendingCommand {
        int direction = 0;
        std::int64_t issued_step = 0;
    };

    double longitudinal_command(const VehicleState& v, std::vector<Fault>& faults) const;
    std::optional<longitudinal::Leader> sensed_leader(int lane, const VehicleState& ego,
                                                      std::vector<Fault>& faults) const;
    void start_pending_changes();
    void retire(int vehicle_id);
    double min_gap_and_faults(std::vector<Fault>& faults) const;

    WorldConfig config_;
    RngStream spawn_rng_;
    RngStream trigger_rng_;
    std::vector<VehicleState> vehicles_;
    std::map<int, OpenEpisode> episodes_;
    std::map<int, PendingCommand> pending_;
    std::vector<double> next_departure_;
    int next_id_ = 0;
    double time_ = 0.0;
    std::int64_t step_index_ = 0;
    bool spawning_ = true;
};

}  // namespace nafdrive::sim
