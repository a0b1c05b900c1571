#include "commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace rdkin::cli;

    CLI::App app{"rdkin: reaction-diffusion kinetics on finite Markov generators"};
    app.require_subcommand(1);

    Options opts;
    std::string scenario;
    std::uint64_t seed = 0;
    std::string param;
    std::vector<double> values;

    auto common = [&](CLI::App* sub) {
        sub->add_option("scenario", scenario, "scenario YAML file")->required();
        sub->add_option("--seed", seed, "override the scenario seed");
        sub->add_flag("--quiet", opts.quiet, "suppress normal output");
    };

    auto* run = app.add_subcommand("run", "solve a scenario, write trajectory.csv and report.json");
    common(run);
    run->add_option("--out", opts.out, "output directory");
    run->add_option("--verify", opts.verify, "fast or oracle")->check(CLI::IsMember({"fast", "oracle"}));
    run->add_option("--golden", opts.golden, "golden trajectory CSV to compare against");

    auto* verify = app.add_subcommand("verify", "run the full check battery and print a pass/fail table");
    common(verify);
    verify->add_option("--out", opts.out, "directory for verify.json");
    verify->add_option("--verify", opts.verify, "fast or oracle")->check(CLI::IsMember({"fast", "oracle"}));
    verify->add_option("--golden", opts.golden, "golden trajectory CSV to compare against");

    auto* sweep = app.add_subcommand("sweep", "run a parameter ladder and print a convergence table");
    common(sweep);
    sweep->add_option("--param", param, "dt, epsilon, lambda or gamma")->required();
    sweep->add_option("--values", values, "comma-separated ladder")->required()->delimiter(',');
    sweep->add_option("--out", opts.out, "directory for sweep.csv");

    auto* golden = app.add_subcommand("golden", "write the oracle trajectory and its checksum");
    common(golden);
    golden->add_option("--out", opts.out, "CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kPass : kError;
    }

    for (auto* sub : {run, verify, sweep, golden})
        if (sub->count("--seed")) opts.seed = seed;

    if (*run) return cmd_run(scenario, opts, std::cout, std::cerr);
    if (*verify) return cmd_verify(scenario, opts, std::cout, std::cerr);
    if (*sweep) return cmd_sweep(scenario, param, values, opts, std::cout, std::cerr);
    return cmd_golden(scenario, opts, std::cout, std::cerr);
}
