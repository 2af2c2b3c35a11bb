#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "nafdrive/nafq.hpp"
#include "nafdrive/simworld.hpp"

namespace nafdrive::cli {

// ---------------------------------------------------------------------------
// Library-level evaluation, shared by the commands and the acceptance suite.

struct EpisodeAverages {
    std::size_t episodes = 0;
    double duration = 0.0;
    double R = 0.0;
    double R_acce = 0.0;
    double R_rate = 0.0;
    double R_dev = 0.0;
};

EpisodeAverages average(const std::vector<sim::EpisodeMetrics>& episodes);

struct EvalResult {
    std::vector<sim::EpisodeMetrics> episodes;
    EpisodeAverages summary;
};

/// Runs the greedy policy with frozen parameters until `episodes` lane changes have closed.
/// Throws SimulationError if that takes more than `max_sim_steps` steps.
EvalResult evaluate_policy(const nafq::NafParams& params, const sim::WorldConfig& world, std::size_t episodes,
                           std::uint64_t seed, std::int64_t max_sim_steps = 0);

struct TraceRow {
    int step = 0;
    double t = 0.0;
    double a_yaw = 0.0;
    double omega = 0.0;
    double theta = 0.0;
    double d = 0.0;
    double delta_d_lat = 0.0;
    double r = 0.0;
    double r_acce = 0.0;
    double r_rate = 0.0;
    double r_dev = 0.0;
};

struct Trace {
    int vehicle_id = 0;
    std::vector<TraceRow> rows;
    sim::EpisodeMetrics metrics;
};

/// Follows the first lane change that starts in a greedy simulation with the given seed.
Trace trace_episode(const nafq::NafParams& params, const sim::WorldConfig& world, std::uint64_t seed,
                    std::int64_t max_sim_steps = 20000);

// ---------------------------------------------------------------------------
// Commands. Each returns a process exit status and reports on the given streams.

struct TrainOptions {
    std::filesystem::path config;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::filesystem::path> warm_checkpoint;
};

struct EvalOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path config;
    std::size_t episodes = 100;
    std::uint64_t seed = 0;
    std::filesystem::path out;
    bool force = false;
};

struct TraceOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path config;
    std::uint64_t seed = 0;
    std::filesystem::path out;
    bool force = false;
};

struct CheckgradOptions {
    std::uint64_t seed = 0;
    bool inject_fault = false;
    double threshold = 1e-4;
};

int cmd_train(const TrainOptions& options, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& options, std::ostream& out, std::ostream& err);
int cmd_trace(const TraceOptions& options, std::ostream& out, std::ostream& err);
int cmd_checkgrad(const CheckgradOptions& options, std::ostream& out, std::ostream& err);

inline const std::vector<std::string> kLossColumns{"step", "loss"};
inline const std::vector<std::string> kEpisodeColumns{"vehicle_id", "start_step", "end_step", "duration_s", "R",
                                                      "R_acce",     "R_rate",     "R_dev",    "outcome"};
inline const std::vector<std::string> kTraceColumns{"step",        "t", "a_yaw",  "omega",  "theta", "d",
                                                    "delta_d_lat", "r", "r_acce", "r_rate", "r_dev"};

}  // namespace nafdrive::cli
