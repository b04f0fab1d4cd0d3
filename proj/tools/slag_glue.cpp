// slag-glue — experiment driver for the special-Lagrangian gluing model.
//
//   slag-glue run <config-file> [--output-dir DIR] [--seed N] [--experiment NAME]
//
// Exit codes: 0 success, 1 invariant-suite failure, 2 invalid config.

#include <slag/experiments.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"special-Lagrangian gluing experiments"};
    app.require_subcommand(1);

    std::string config_path, output_dir, experiment;
    long long seed = -1;
    CLI::App* run = app.add_subcommand("run", "run one experiment from a config file");
    run->add_option("config", config_path, "experiment config file")->required();
    run->add_option("--output-dir", output_dir, "override output directory");
    run->add_option("--seed", seed, "override RNG seed");
    run->add_option("--experiment", experiment, "override experiment name");

    CLI11_PARSE(app, argc, argv);

    slag::ExperimentConfig cfg;
    try {
        cfg = slag::parse_config_file(config_path);
        if (!output_dir.empty()) cfg.output_dir = output_dir;
        if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
        if (!experiment.empty()) {
            auto kind = slag::experiment_from_name(experiment);
            if (!kind) throw slag::ConfigError("unknown experiment '" + experiment + "'");
            cfg.experiment = *kind;
        }
        cfg.validate();
    } catch (const slag::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }

    try {
        slag::RunReport rep = slag::run_experiment(cfg);
        for (const auto& iv : rep.invariants)
            std::printf("[%s] %s%s%s\n", iv.pass ? "PASS" : "FAIL", iv.name.c_str(),
                        iv.detail.empty() ? "" : ": ", iv.detail.c_str());
        if (rep.exit_code != 0) std::fprintf(stderr, "invariant suite failed\n");
        return rep.exit_code;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "run failed: %s\n", e.what());
        return 1;
    }
}
