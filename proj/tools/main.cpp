#include <CLI11.hpp>

#include "svperturb/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"svperturb: singular-vector perturbation bounds, Monte Carlo "
                 "verification, and MPSK classification"};
    app.set_version_flag("--version", svp::cli::kToolVersion);
    app.require_subcommand(1);

    svp::cli::CommonOptions options;
    std::uint64_t seed_value = 0;
    int trials_value = 0;

    auto add_common = [&](CLI::App* cmd, bool with_trials) {
        cmd->add_option("--config", options.config_path, "Path to the run's config file")
            ->required();
        cmd->add_option("--out", options.out_dir, "Output directory");
        cmd->add_option("--format", options.format, "Output format: json, csv, or both");
        cmd->add_option("--jobs", options.jobs, "Parallel worker count");
        cmd->add_option("--seed", seed_value, "Seed override");
        if (with_trials) {
            cmd->add_option("--trials", trials_value, "Trial count override");
        }
    };

    auto* bound = app.add_subcommand("bound", "Evaluate the deviation bound for one setting");
    add_common(bound, false);
    auto* verify = app.add_subcommand("verify", "Run seeded Monte Carlo trials and coverage");
    add_common(verify, true);
    auto* plan = app.add_subcommand("plan", "Feasibility planning for a noise or MPSK setting");
    add_common(plan, false);
    auto* classify = app.add_subcommand("classify", "Classify one synthetic MPSK capture");
    add_common(classify, false);
    auto* sweep = app.add_subcommand("sweep", "Success-rate table over an SNR grid");
    add_common(sweep, false);

    CLI11_PARSE(app, argc, argv);

    CLI::App* active = app.get_subcommands().front();
    if (active->count("--seed") > 0) {
        options.seed = seed_value;
    }
    if (active->get_option_no_throw("--trials") != nullptr && active->count("--trials") > 0) {
        options.trials = trials_value;
    }

    if (active == bound) {
        return svp::cli::run_bound(options);
    }
    if (active == verify) {
        return svp::cli::run_verify(options);
    }
    if (active == plan) {
        return svp::cli::run_plan(options);
    }
    if (active == classify) {
        return svp::cli::run_classify(options);
    }
    return svp::cli::run_sweep(options);
}
