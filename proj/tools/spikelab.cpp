// spikelab <task> --config <file> [--out <dir>] [--seed <u64>]
//
// Tasks: ground-state, constants, landscape, predict, verify-expansion,
// verify-proposition, verify-gradient.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "spikelab/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"spikelab: boundary spike concentration predictor and "
                 "energy-expansion verifier"};
    app.footer(spikelab::cli::grammar_help);

    static const std::vector<std::string> tasks = {
        "ground-state",       "constants",       "landscape", "predict",
        "verify-expansion", "verify-proposition", "verify-gradient"};

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;

    bool any = false;
    for (const std::string& t : tasks) {
        CLI::App* sub = app.add_subcommand(
            t, "run the '" + t + "' task from a JSON config");
        sub->add_option("--config", config_path, "JSON config file")
            ->required();
        sub->add_option("--out", out_dir, "output directory (overrides "
                                          "config)");
        sub->add_option("--seed", seed, "RNG seed (overrides config)")
            ->each([&](const std::string&) { seed_set = true; });
        sub->callback([&any]() { any = true; });
    }
    app.require_subcommand(0, 1);

    CLI11_PARSE(app, argc, argv);
    if (!any) {
        std::cout << app.help() << std::endl;
        return 0;
    }
    std::string task;
    for (const auto* sub : app.get_subcommands()) task = sub->get_name();

    std::optional<std::string> out_opt;
    if (!out_dir.empty()) out_opt = out_dir;
    std::optional<std::uint64_t> seed_opt;
    if (seed_set) seed_opt = seed;
    return spikelab::cli::run_task(config_path, out_opt, seed_opt, task,
                                   std::cout);
}
