#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "nafdrive/nafq.hpp"
#include "nafdrive/netcore.hpp"
#include "nafdrive/rng.hpp"
#include "nafdrive/simworld.hpp"

namespace nafdrive::learn {

using nafq::NafParams;
using nafq::RlState;

struct Transition {
    RlState s;
    double a = 0.0;
    RlState s_next;
    double r = 0.0;
    bool terminal = false;

    bool valid() const;
};

/// Fixed-capacity ring of transitions; the oldest entry is overwritten first.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(const Transition& t);
    /// n draws uniformly with replacement.
    std::vector<Transition> sample(std::size_t n, RngStream& rng) const;

    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    /// i-th entry in insertion order, 0 = oldest.
    const Transition& at(std::size_t i) const;

private:
    std::size_t capacity_;
    std::vector<Transition> items_;
    std::size_t cursor_ = 0;
};

enum class Stage { pretrain, joint };

struct TrainConfig {
    double learning_rate = 0.0005;
    double gamma = 0.95;
    std::size_t batch_size = 64;
    std::int64_t target_sync_every = 1000;
    std::int64_t pretrain_steps = 200000;
    std::int64_t total_steps = 400000;
    std::vector<std::int64_t> checkpoint_schedule;
    double sigma_start = 0.1;  // rad/s^2
    double sigma_end = 0.01;
    std::size_t buffer_capacity = 100000;
    std::int64_t loss_log_every = 20;
    std::int64_t max_sim_steps = 0;  // 0 = unlimited; guards runs that never fill the buffer
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

/// r + gamma * V(s'; target) for non-terminal transitions, r otherwise.
/// The max over a' of the quadratic Q is V(s') because curvature is negative.
double td_target(const Transition& t, const NafParams& target_params, double gamma);

struct BatchLoss {
    double loss = 0.0;
    std::vector<double> errors;  // target_i - Q(s_i, a_i)
};

BatchLoss batch_loss(std::span<const Transition> batch, const NafParams& params, const NafParams& target_params,
                     double gamma);

/// d(batch loss)/d(theta) with the targets held constant.
nafq::QGradients batch_loss_gradients(std::span<const Transition> batch, const NafParams& params,
                                      const NafParams& target_params, double gamma, bool include_mu);

using OptStates = std::array<net::AdamState, nafq::kHeadCount>;
OptStates make_opt_states(const NafParams& params);

/// One gradient step on the batch loss. In the pretrain stage the greedy heads are left untouched.
/// Returns the loss evaluated before the update.
double train_step(NafParams& params, const NafParams& target_params, std::span<const Transition> batch, Stage stage,
                  OptStates& opt_states, double lr, double gamma);

void sync_target(const NafParams& params, NafParams& target_params);

/// Linear decay from sigma_start at step 0 to sigma_end at total_steps.
double exploration_sigma(const TrainConfig& cfg, std::int64_t train_step);

struct LossRow {
    std::int64_t step = 0;  // training step (gradient updates so far)
    double loss = 0.0;
};

struct EpisodeRow {
    sim::EpisodeMetrics metrics;
};

/// Parameters and optimizer state saved at one training step.
struct TrainerSnapshot {
    std::int64_t step = 0;
    NafParams params;
    NafParams target_params;
    OptStates opt_states;
    std::string exploration_rng;
    std::string replay_rng;
};

struct TrainingResult {
    std::vector<LossRow> loss_log;
    std::vector<sim::EpisodeMetrics> episode_log;
    std::vector<TrainerSnapshot> checkpoints;
    std::int64_t sim_steps = 0;
    std::size_t faults = 0;
};

/// Optional streaming hooks; each is called as soon as its record exists.
struct TrainingHooks {
    std::function<void(const LossRow&)> on_loss;
    std::function<void(const sim::EpisodeMetrics&)> on_episode;
    std::function<void(const TrainerSnapshot&)> on_checkpoint;
};

/// Warm-start state: parameters, target, optimizer moments and the training-step counter.
struct WarmStart {
    std::int64_t step = 0;
    NafParams params;
    NafParams target_params;
    OptStates opt_states;
};

/// Interleaved simulate-then-train loop. Schedules (stage switch, target sync, loss logging,
/// checkpoints, exploration decay) count gradient updates; the simulation keeps stepping
/// until total_steps updates have run.
TrainingResult run_training(const TrainConfig& train_config, const sim::WorldConfig& world_config,
                            const nafq::NafConstants& naf_constants, const TrainingHooks& hooks = {},
                            const std::optional<WarmStart>& warm_start = std::nullopt);

}  // namespace nafdrive::learn
