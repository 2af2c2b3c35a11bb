#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "nafdrive/learner.hpp"
#include "nafdrive/nafq.hpp"
#include "nafdrive/simworld.hpp"

namespace nafdrive {

/// Everything a run needs. Every field must be present in the JSON file.
struct RunConfig {
    learn::TrainConfig train;
    sim::WorldConfig world;
    nafq::NafConstants naf;
    std::string output_dir;

    void validate() const;
    bool operator==(const RunConfig&) const = default;
};

/// Parses and validates a run configuration. Missing, mistyped or unknown
/// fields raise ConfigError naming the dotted field path.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical JSON (sorted keys, two-space indent).
std::string serialize_run_config(const RunConfig& config);

/// Hex FNV-1a digest over the canonical physics subset (world + nafq constants).
/// Training hyperparameters, seed and output paths do not contribute.
std::string physics_digest(const RunConfig& config);

}  // namespace nafdrive
