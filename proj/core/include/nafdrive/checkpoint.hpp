#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "nafdrive/learner.hpp"

namespace nafdrive {

inline constexpr int kCheckpointFormatVersion = 1;

/// Saved trainer state: online and target parameters, optimizer moments,
/// random-stream states and the digest of the physics configuration it was trained under.
struct Checkpoint {
    int format_version = kCheckpointFormatVersion;
    std::int64_t step = 0;
    nafq::NafParams params;
    nafq::NafParams target_params;
    learn::OptStates opt_states;
    std::string exploration_rng;
    std::string replay_rng;
    std::string config_digest;
};

Checkpoint make_checkpoint(const learn::TrainerSnapshot& snapshot, const std::string& config_digest);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws ConfigError when the checkpoint was trained under different physics, unless `force`.
void check_digest(const Checkpoint& ckpt, const std::string& expected_digest, bool force);

/// "checkpoint_00040000.json"
std::string checkpoint_filename(std::int64_t step);

}  // namespace nafdrive
