#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "nafdrive/commands.hpp"

int main(int argc, char** argv) {
    using namespace nafdrive::cli;

    CLI::App app{"Quadratic Q-learning lane-change controller: training, evaluation and diagnostics"};
    app.require_subcommand(1);

    TrainOptions train;
    std::string train_seed, train_out, warm;
    auto* train_cmd = app.add_subcommand("train", "train a controller and write loss/episode logs and checkpoints");
    train_cmd->add_option("--config", train.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--seed", train_seed, "override the master seed");
    train_cmd->add_option("--out", train_out, "output directory (defaults to output_dir in the config)");
    train_cmd->add_option("--checkpoint", warm, "warm start from this checkpoint");

    EvalOptions eval;
    auto* eval_cmd = app.add_subcommand("eval", "greedy evaluation of a checkpoint over N lane changes");
    eval_cmd->add_option("--checkpoint", eval.checkpoint)->required();
    eval_cmd->add_option("--config", eval.config)->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--episodes", eval.episodes)->check(CLI::PositiveNumber);
    eval_cmd->add_option("--seed", eval.seed);
    eval_cmd->add_option("--out", eval.out, "output CSV")->required();
    eval_cmd->add_flag("--force", eval.force, "accept a checkpoint whose physics digest differs");

    TraceOptions trace;
    auto* trace_cmd = app.add_subcommand("trace", "record one greedy lane change step by step");
    trace_cmd->add_option("--checkpoint", trace.checkpoint)->required();
    trace_cmd->add_option("--config", trace.config)->required()->check(CLI::ExistingFile);
    trace_cmd->add_option("--seed", trace.seed);
    trace_cmd->add_option("--out", trace.out, "output CSV")->required();
    trace_cmd->add_flag("--force", trace.force, "accept a checkpoint whose physics digest differs");

    CheckgradOptions grad;
    auto* grad_cmd = app.add_subcommand("checkgrad", "compare analytic gradients with central finite differences");
    grad_cmd->add_option("--seed", grad.seed);
    grad_cmd->add_flag("--inject-fault", grad.inject_fault, "test mode: corrupt one analytic gradient per suite");

    CLI11_PARSE(app, argc, argv);

    if (*train_cmd) {
        if (!train_seed.empty()) {
            try {
                train.seed = std::stoull(train_seed);
            } catch (const std::exception&) {
                std::cerr << "--seed: not an unsigned integer: " << train_seed << '\n';
                return 2;
            }
        }
        if (!train_out.empty()) {
            train.out_dir = train_out;
        }
        if (!warm.empty()) {
            train.warm_checkpoint = warm;
        }
        return cmd_train(train, std::cout, std::cerr);
    }
    if (*eval_cmd) {
        return cmd_eval(eval, std::cout, std::cerr);
    }
    if (*trace_cmd) {
        return cmd_trace(trace, std::cout, std::cerr);
    }
    return cmd_checkgrad(grad, std::cout, std::cerr);
}
