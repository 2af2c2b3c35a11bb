#include "nafdrive/learner.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nafdrive/error.hpp"

namespace nafdrive::learn {

bool Transition::valid() const {
    return s.valid() && s_next.valid() && std::isfinite(a) && std::isfinite(r) && r <= 0.0;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) {
        throw ConfigError("replay buffer capacity must be positive");
    }
    items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(const Transition& t) {
    if (!t.valid()) {
        throw ContractError("ReplayBuffer::push: transition must be finite with r <= 0");
    }
    if (items_.size() < capacity_) {
        items_.push_back(t);
        return;
    }
    items_[cursor_] = t;
    cursor_ = (cursor_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
    if (i >= items_.size()) {
        throw ContractError("ReplayBuffer::at: index out of range");
    }
    return items_[(cursor_ + i) % items_.size()];
}

std::vector<Transition> ReplayBuffer::sample(std::size_t n, RngStream& rng) const {
    if (items_.empty()) {
        throw ContractError("ReplayBuffer::sample: buffer is empty");
    }
    if (n == 0) {
        throw ContractError("ReplayBuffer::sample: n must be >= 1");
    }
    std::vector<Transition> batch;
    batch.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        batch.push_back(items_[rng.index(items_.size())]);
    }
    return batch;
}

void TrainConfig::validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) {
        throw ConfigError("train.gamma must be in [0, 1)");
    }
    if (!(learning_rate >= 0.0)) {
        throw ConfigError("train.learning_rate must be >= 0");
    }
    if (batch_size == 0 || target_sync_every <= 0 || pretrain_steps < 0 || total_steps <= 0 ||
        buffer_capacity == 0 || loss_log_every <= 0 || max_sim_steps < 0) {
        throw ConfigError("train counts must be positive");
    }
    if (!(sigma_start >= sigma_end && sigma_end >= 0.0)) {
        throw ConfigError("train requires sigma_start >= sigma_end >= 0");
    }
    for (std::size_t i = 0; i < checkpoint_schedule.size(); ++i) {
        if (checkpoint_schedule[i] <= 0 || checkpoint_schedule[i] > total_steps ||
            (i > 0 && checkpoint_schedule[i] <= checkpoint_schedule[i - 1])) {
            throw ConfigError("train.checkpoint_schedule must be increasing and within (0, total_steps]");
        }
    }
}

double td_target(const Transition& t, const NafParams& target_params, double gamma) {
    if (t.terminal) {
        return t.r;
    }
    return t.r + gamma * nafq::v_value(t.s_next, target_params);
}

namespace {

std::vector<double> batch_targets(std::span<const Transition> batch, const NafParams& target_params, double gamma) {
    std::vector<RlState> next;
    next.reserve(batch.size());
    for (const auto& t : batch) {
        next.push_back(t.s_next);
    }
    const Eigen::VectorXd v_next = nafq::v_values_batch(target_params, next);
    std::vector<double> targets(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        targets[i] = batch[i].terminal ? batch[i].r : batch[i].r + gamma * v_next(static_cast<Eigen::Index>(i));
    }
    return targets;
}

struct LossEvaluation {
    nafq::BatchEvaluation eval;
    std::vector<double> targets;
    double loss = 0.0;
};

LossEvaluation evaluate_loss(std::span<const Transition> batch, const NafParams& params,
                             const NafParams& target_params, double gamma) {
    if (batch.empty()) {
        throw ContractError("batch_loss: empty batch");
    }
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (!batch[i].valid()) {
            throw ContractError("batch_loss: transition " + std::to_string(i) + " is not valid (non-finite or r > 0)");
        }
    }
    std::vector<RlState> states;
    std::vector<double> actions;
    states.reserve(batch.size());
    actions.reserve(batch.size());
    for (const auto& t : batch) {
        states.push_back(t.s);
        actions.push_back(t.a);
    }
    LossEvaluation le;
    le.targets = batch_targets(batch, target_params, gamma);
    le.eval = nafq::evaluate_batch(params, states, actions);
    double sum = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const double e = le.targets[i] - le.eval.q(static_cast<Eigen::Index>(i));
        sum += e * e;
    }
    le.loss = sum / static_cast<double>(batch.size());
    return le;
}

nafq::QGradients loss_gradients(const LossEvaluation& le, const NafParams& params, bool include_mu) {
    const double n = static_cast<double>(le.targets.size());
    std::vector<double> weights(le.targets.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        weights[i] = 2.0 / n * (le.eval.q(static_cast<Eigen::Index>(i)) - le.targets[i]);
    }
    return nafq::backward_batch(params, le.eval, weights, include_mu);
}

}  // namespace

BatchLoss batch_loss(std::span<const Transition> batch, const NafParams& params, const NafParams& target_params,
                     double gamma) {
    const auto le = evaluate_loss(batch, params, target_params, gamma);
    BatchLoss out;
    out.loss = le.loss;
    out.errors.resize(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        out.errors[i] = le.targets[i] - le.eval.q(static_cast<Eigen::Index>(i));
    }
    return out;
}

nafq::QGradients batch_loss_gradients(std::span<const Transition> batch, const NafParams& params,
                                      const NafParams& target_params, double gamma, bool include_mu) {
    return loss_gradients(evaluate_loss(batch, params, target_params, gamma), params, include_mu);
}

OptStates make_opt_states(const NafParams& params) {
    OptStates states;
    for (nafq::Head h : nafq::kAllHeads) {
        states[static_cast<std::size_t>(h)] = net::AdamState::for_network(params[h]);
    }
    return states;
}

double train_step(NafParams& params, const NafParams& target_params, std::span<const Transition> batch, Stage stage,
                  OptStates& opt_states, double lr, double gamma) {
    const auto le = evaluate_loss(batch, params, target_params, gamma);
    if (!std::isfinite(le.loss)) {
        throw NumericError("train_step: non-finite loss");
    }
    const bool joint = stage == Stage::joint;
    const auto grads = loss_gradients(le, params, joint);
    for (nafq::Head h : nafq::kAllHeads) {
        const bool is_mu = h == nafq::Head::amax || h == nafq::Head::beta || h == nafq::Head::ttrans;
        if (is_mu && !joint) {
            continue;
        }
        const auto idx = static_cast<std::size_t>(h);
        net::adaptive_update(params[h], grads[h], opt_states[idx], lr);
    }
    return le.loss;
}

void sync_target(const NafParams& params, NafParams& target_params) { target_params = params; }

double exploration_sigma(const TrainConfig& cfg, std::int64_t train_step) {
    const double frac = std::clamp(static_cast<double>(train_step) / static_cast<double>(cfg.total_steps), 0.0, 1.0);
    return (1.0 - frac) * cfg.sigma_start + frac * cfg.sigma_end;
}

TrainingResult run_training(const TrainConfig& train_config, const sim::WorldConfig& world_config,
                            const nafq::NafConstants& naf_constants, const TrainingHooks& hooks,
                            const std::optional<WarmStart>& warm_start) {
    train_config.validate();
    world_config.validate();
    naf_constants.validate();

    SeedStreams streams(train_config.seed);
    NafParams params = warm_start ? warm_start->params : nafq::naf_init(naf_constants, streams.init);
    NafParams target = warm_start ? warm_start->target_params : params;
    OptStates opt = warm_start ? warm_start->opt_states : make_opt_states(params);
    std::int64_t step = warm_start ? warm_start->step : 0;
    params.validate();
    target.validate();

    sim::World world(world_config, streams.spawn, streams.trigger);
    ReplayBuffer buffer(train_config.buffer_capacity);
    sim::NafPolicy policy(params, exploration_sigma(train_config, step), streams.exploration);

    TrainingResult result;
    auto next_checkpoint = std::upper_bound(train_config.checkpoint_schedule.begin(),
                                            train_config.checkpoint_schedule.end(), step);

    while (step < train_config.total_steps) {
        if (train_config.max_sim_steps > 0 && result.sim_steps >= train_config.max_sim_steps) {
            throw SimulationError("run_training: reached max_sim_steps after " + std::to_string(step) +
                                  " training steps");
        }
        policy.set_sigma(exploration_sigma(train_config, step));
        const auto out = world.step(policy);
        result.sim_steps += 1;
        result.faults += out.faults.size();
        for (const auto& a : out.agent_steps) {
            buffer.push(Transition{a.s, a.a, a.s_next, a.reward.r, a.terminal});
        }
        for (const auto& e : out.closed_episodes) {
            result.episode_log.push_back(e);
            if (hooks.on_episode) {
                hooks.on_episode(e);
            }
        }
        if (buffer.size() < train_config.batch_size) {
            continue;
        }

        const auto batch = buffer.sample(train_config.batch_size, streams.replay);
        const Stage stage = step < train_config.pretrain_steps ? Stage::pretrain : Stage::joint;
        const double loss =
            train_step(params, target, batch, stage, opt, train_config.learning_rate, train_config.gamma);
        step += 1;

        if (step % train_config.target_sync_every == 0) {
            sync_target(params, target);
        }
        if (step % train_config.loss_log_every == 0) {
            result.loss_log.push_back(LossRow{step, loss});
            if (hooks.on_loss) {
                hooks.on_loss(result.loss_log.back());
            }
        }
        if (next_checkpoint != train_config.checkpoint_schedule.end() && *next_checkpoint == step) {
            ++next_checkpoint;
            result.checkpoints.push_back(TrainerSnapshot{step, params, target, opt, streams.exploration.serialize(),
                                                         streams.replay.serialize()});
            if (hooks.on_checkpoint) {
                hooks.on_checkpoint(result.checkpoints.back());
            }
        }
    }
    return result;
}

}  // namespace nafdrive::learn
