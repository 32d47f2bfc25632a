// Command-line entry point: scenario execution, benchmark sweeps, theorem
// checks, and timing studies. Flag precedence is defaults < config file <
// flags.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "brne/commands.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    int trials = 0;
    std::string mode;
    int threads = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "Config file (key = value with [sections])");
    cmd->add_option("--out", flags.out_dir, "Output directory");
    cmd->add_option("--seed", flags.seed, "Base seed; trial k uses base_seed + k");
    cmd->add_option("--trials", flags.trials, "Number of trials");
    cmd->add_option("--mode", flags.mode, "Solver mode: is | rs")
        ->check(CLI::IsMember({"is", "rs"}));
    cmd->add_option("--threads", flags.threads, "Worker threads (0 = hardware)");
}

brne::RunConfig resolve_config(const CommonFlags& flags) {
    brne::RunConfig config;
    if (!flags.config_path.empty()) config = brne::load_config(flags.config_path, config);
    if (!flags.out_dir.empty()) config.out_dir = flags.out_dir;
    if (flags.seed != 0) config.base_seed = flags.seed;
    if (flags.trials != 0) config.trials = flags.trials;
    if (flags.threads >= 0) config.threads = flags.threads;
    if (flags.mode == "is") config.solver.mode = brne::SolveMode::kImportanceSampling;
    if (flags.mode == "rs") config.solver.mode = brne::SolveMode::kRejectionSampling;
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"BRNE: mixed-strategy Nash equilibrium crowd navigation"};
    app.require_subcommand(1);

    CommonFlags multiagent_flags, crowdnav_flags, verify_flags, bench_flags;
    CLI::App* multiagent = app.add_subcommand(
        "multiagent", "Joint planning circle benchmark (all agents solved together)");
    add_common(multiagent, multiagent_flags);
    CLI::App* crowdnav = app.add_subcommand(
        "crowdnav", "Robot vs. reactive or playback pedestrians, model-predictive loop");
    add_common(crowdnav, crowdnav_flags);

    CLI::App* verify = app.add_subcommand("verify", "Theorem and convergence property checks");
    add_common(verify, verify_flags);
    brne::VerifyOptions verify_options;
    verify->add_option("--games", verify_options.games, "Number of random discrete games");
    verify
        ->add_flag("--inject-sign-flip", verify_options.inject_sign_flip,
                   "Flip the posterior exponent sign (sanity hook; the descent check must fail)")
        ->group("");  // hidden

    CLI::App* bench = app.add_subcommand("bench", "Solve-time scaling sweeps");
    add_common(bench, bench_flags);
    brne::BenchOptions bench_options;
    bench->add_option("--reps", bench_options.reps, "Warm repetitions per timing point");

    CLI11_PARSE(app, argc, argv);

    try {
        if (multiagent->parsed()) return brne::run_multiagent_command(resolve_config(multiagent_flags));
        if (crowdnav->parsed()) return brne::run_crowdnav_command(resolve_config(crowdnav_flags));
        if (verify->parsed())
            return brne::run_verify_command(resolve_config(verify_flags), verify_options);
        if (bench->parsed()) return brne::run_bench_command(resolve_config(bench_flags), bench_options);
    } catch (const std::exception& error) {
        std::cerr << "error: " << error.what() << "\n";
        return 2;
    }
    return 0;
}
