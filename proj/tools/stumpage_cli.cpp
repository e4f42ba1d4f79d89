// Command-line front end: one subcommand per pipeline stage, all driven by a
// JSON config file. --seed and --threads override the config keys.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "stumpage/cli_commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"structural timber-auction pipeline: harvesting DP, estimators, "
                 "bid solver, counterfactual revenue, Monte Carlo study"};
    app.require_subcommand(1);

    struct Args {
        std::string config;
        std::int64_t seed = -1;
        int threads = -1;
    };
    std::map<std::string, Args> args;

    for (const std::string name :
         {"solve-dp", "estimate", "solve-bids", "counterfactual", "montecarlo"}) {
        CLI::App* sub = app.add_subcommand(name);
        auto& a = args[name];
        sub->add_option("-c,--config", a.config, "JSON config file")->required();
        sub->add_option("--seed", a.seed, "override config seed");
        sub->add_option("--threads", a.threads, "override config parallelism degree");
    }

    CLI11_PARSE(app, argc, argv);

    const std::string name = app.get_subcommands().front()->get_name();
    const Args& a = args[name];
    try {
        nlohmann::json config = stumpage::cli::load_config(a.config);
        if (a.seed >= 0) config["seed"] = static_cast<std::uint64_t>(a.seed);
        if (a.threads >= 1) config["threads"] = static_cast<unsigned>(a.threads);
        return stumpage::cli::run_command(name, config);
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"command", name}}.dump() << std::endl;
        return 1;
    }
}
