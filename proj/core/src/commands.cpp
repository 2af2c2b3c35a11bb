#include "nafdrive/commands.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <string>

#include "nafdrive/checkpoint.hpp"
#include "nafdrive/config.hpp"
#include "nafdrive/error.hpp"
#include "nafdrive/gradcheck.hpp"
#include "nafdrive/io.hpp"
#include "nafdrive/learner.hpp"

namespace nafdrive::cli {

namespace {

using io::format_double;

std::vector<std::string> episode_fields(const sim::EpisodeMetrics& e) {
    return {std::to_string(e.vehicle_id),  std::to_string(e.start_step), std::to_string(e.end_step),
            format_double(e.duration),     format_double(e.R()),         format_double(e.R_acce),
            format_double(e.R_rate),       format_double(e.R_dev),       std::string(sim::outcome_name(e.outcome))};
}

std::int64_t eval_step_budget(std::size_t episodes) { return 5000 + static_cast<std::int64_t>(episodes) * 3000; }

}  // namespace

EpisodeAverages average(const std::vector<sim::EpisodeMetrics>& episodes) {
    EpisodeAverages a;
    a.episodes = episodes.size();
    if (episodes.empty()) {
        return a;
    }
    for (const auto& e : episodes) {
        a.duration += e.duration;
        a.R += e.R();
        a.R_acce += e.R_acce;
        a.R_rate += e.R_rate;
        a.R_dev += e.R_dev;
    }
    const double n = static_cast<double>(episodes.size());
    a.duration /= n;
    a.R /= n;
    a.R_acce /= n;
    a.R_rate /= n;
    a.R_dev /= n;
    return a;
}

EvalResult evaluate_policy(const nafq::NafParams& params, const sim::WorldConfig& world_config, std::size_t episodes,
                           std::uint64_t seed, std::int64_t max_sim_steps) {
    if (episodes == 0) {
        throw ContractError("evaluate_policy: episodes must be >= 1");
    }
    if (max_sim_steps <= 0) {
        max_sim_steps = eval_step_budget(episodes);
    }
    sim::World world(world_config, seed);
    sim::NafPolicy policy(params);
    EvalResult result;
    while (result.episodes.size() < episodes) {
        if (world.step_index() >= max_sim_steps) {
            throw SimulationError("evaluation closed only " + std::to_string(result.episodes.size()) + " of " +
                                  std::to_string(episodes) + " episodes within " + std::to_string(max_sim_steps) +
                                  " steps");
        }
        const auto out = world.step(policy);
        for (const auto& e : out.closed_episodes) {
            if (result.episodes.size() < episodes) {
                result.episodes.push_back(e);
            }
        }
    }
    result.summary = average(result.episodes);
    return result;
}

Trace trace_episode(const nafq::NafParams& params, const sim::WorldConfig& world_config, std::uint64_t seed,
                    std::int64_t max_sim_steps) {
    sim::World world(world_config, seed);
    sim::NafPolicy policy(params);
    std::optional<int> ego;
    Trace trace;
    while (world.step_index() < max_sim_steps) {
        const auto out = world.step(policy);
        for (const auto& a : out.agent_steps) {
            if (!ego) {
                ego = a.vehicle_id;
                trace.vehicle_id = a.vehicle_id;
            }
            if (a.vehicle_id != *ego) {
                continue;
            }
            TraceRow row;
            row.step = static_cast<int>(trace.rows.size());
            row.t = row.step * world_config.dt;
            row.a_yaw = a.a;
            row.omega = a.after.omega;
            row.theta = a.after.theta;
            row.d = a.after.d;
            row.delta_d_lat = a.s_next.delta_d_lat;
            row.r = a.reward.r;
            row.r_acce = a.reward.r_acce;
            row.r_rate = a.reward.r_rate;
            row.r_dev = a.reward.r_dev;
            trace.rows.push_back(row);
        }
        if (ego) {
            for (const auto& e : out.closed_episodes) {
                if (e.vehicle_id == *ego) {
                    trace.metrics = e;
                    return trace;
                }
            }
        }
    }
    throw SimulationError(ego ? "traced lane change did not finish within " + std::to_string(max_sim_steps) + " steps"
                              : "no lane change occurred within " + std::to_string(max_sim_steps) + " steps");
}

int cmd_train(const TrainOptions& options, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    try {
        cfg = load_run_config(options.config);
        if (options.seed) {
            cfg.train.seed = *options.seed;
        }
    } catch (const ConfigError& e) {
        err << "invalid config: " << e.what() << '\n';
        return 2;
    }
    const std::filesystem::path dir = options.out_dir ? *options.out_dir : std::filesystem::path(cfg.output_dir);
    const std::string digest = physics_digest(cfg);

    std::optional<learn::WarmStart> warm;
    if (options.warm_checkpoint) {
        try {
            auto ckpt = load_checkpoint(*options.warm_checkpoint);
            check_digest(ckpt, digest, false);
            warm = learn::WarmStart{ckpt.step, ckpt.params, ckpt.target_params, ckpt.opt_states};
        } catch (const std::exception& e) {
            err << "cannot warm start: " << e.what() << '\n';
            return 2;
        }
    }

    try {
        std::filesystem::create_directories(dir);
        io::write_file_atomic(dir / "config.json", serialize_run_config(cfg));
        io::CsvWriter loss_csv(dir / "loss.csv", kLossColumns);
        io::CsvWriter episode_csv(dir / "episodes.csv", kEpisodeColumns);

        learn::TrainingHooks hooks;
        hooks.on_loss = [&](const learn::LossRow& row) {
            loss_csv.row({std::to_string(row.step), format_double(row.loss)});
        };
        hooks.on_episode = [&](const sim::EpisodeMetrics& e) { episode_csv.row(episode_fields(e)); };
        hooks.on_checkpoint = [&](const learn::TrainerSnapshot& snap) {
            save_checkpoint(dir / checkpoint_filename(snap.step), make_checkpoint(snap, digest));
            out << "checkpoint step " << snap.step << '\n';
        };

        int status = 0;
        try {
            const auto result = learn::run_training(cfg.train, cfg.world, cfg.naf, hooks, warm);
            out << "trained " << cfg.train.total_steps << " steps over " << result.sim_steps
                << " simulation steps; " << result.episode_log.size() << " lane changes; " << result.faults
                << " overlap faults\n";
        } catch (const std::exception& e) {
            err << "training aborted: " << e.what() << '\n';
            status = 1;
        }
        loss_csv.commit();
        episode_csv.commit();
        return status;
    } catch (const std::exception& e) {
        err << "train failed: " << e.what() << '\n';
        return 1;
    }
}

int cmd_eval(const EvalOptions& options, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    Checkpoint ckpt;
    try {
        cfg = load_run_config(options.config);
    } catch (const ConfigError& e) {
        err << "invalid config: " << e.what() << '\n';
        return 2;
    }
    try {
        ckpt = load_checkpoint(options.checkpoint);
        check_digest(ckpt, physics_digest(cfg), options.force);
    } catch (const std::exception& e) {
        err << "cannot use checkpoint: " << e.what() << '\n';
        return 2;
    }
    try {
        const auto result = evaluate_policy(ckpt.params, cfg.world, options.episodes, options.seed);
        io::CsvWriter csv(options.out, kEpisodeColumns);
        for (const auto& e : result.episodes) {
            csv.row(episode_fields(e));
        }
        const auto& s = result.summary;
        csv.row({"mean", "", "", format_double(s.duration), format_double(s.R), format_double(s.R_acce),
                 format_double(s.R_rate), format_double(s.R_dev), "summary"});
        csv.commit();
        out << "step " << ckpt.step << ": " << s.episodes << " episodes, averaged R = " << format_double(s.R) << '\n';
        return 0;
    } catch (const std::exception& e) {
        err << "eval failed: " << e.what() << '\n';
        return 1;
    }
}

int cmd_trace(const TraceOptions& options, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    Checkpoint ckpt;
    try {
        cfg = load_run_config(options.config);
    } catch (const ConfigError& e) {
        err << "invalid config: " << e.what() << '\n';
        return 2;
    }
    try {
        ckpt = load_checkpoint(options.checkpoint);
        check_digest(ckpt, physics_digest(cfg), options.force);
    } catch (const std::exception& e) {
        err << "cannot use checkpoint: " << e.what() << '\n';
        return 2;
    }
    try {
        const auto trace = trace_episode(ckpt.params, cfg.world, options.seed);
        io::CsvWriter csv(options.out, kTraceColumns);
        for (const auto& r : trace.rows) {
            csv.row({std::to_string(r.step), format_double(r.t), format_double(r.a_yaw), format_double(r.omega),
                     format_double(r.theta), format_double(r.d), format_double(r.delta_d_lat), format_double(r.r),
                     format_double(r.r_acce), format_double(r.r_rate), format_double(r.r_dev)});
        }
        csv.commit();
        out << "vehicle " << trace.vehicle_id << ": " << trace.rows.size() << " steps, outcome "
            << sim::outcome_name(trace.metrics.outcome) << '\n';
        return 0;
    } catch (const std::exception& e) {
        err << "trace failed: " << e.what() << '\n';
        return 1;
    }
}

int cmd_checkgrad(const CheckgradOptions& options, std::ostream& out, std::ostream& err) {
    gradcheck::GradcheckOptions g;
    g.seed = options.seed;
    g.inject_fault = options.inject_fault;
    std::vector<std::string> offenders;
    for (const auto& r : gradcheck::run_suites(g)) {
        out << std::left << std::setw(12) << r.name << " max_rel_error " << std::scientific << std::setprecision(3)
            << r.max_rel_error << std::defaultfloat << '\n';
        if (!(r.max_rel_error < options.threshold)) {
            offenders.push_back(r.name);
        }
    }
    if (!offenders.empty()) {
        err << "gradient check failed:";
        for (const auto& o : offenders) {
            err << ' ' << o;
        }
        err << '\n';
        return 1;
    }
    return 0;
}

}  // namespace nafdrive::cli
