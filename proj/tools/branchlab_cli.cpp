#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "branchlab/error.hpp"
#include "branchlab/harness.hpp"

using namespace branchlab;

namespace {

constexpr int kConfigError = 2;
constexpr int kDownstreamError = 3;
constexpr int kCheckBreach = 4;

void print_row(const ResultRow& r) {
    std::printf("%-14s param=%-10g estimate=%-14.8g stderr=%-12.4g target=%-14.8g gap_sigmas=%-8.3g %.2fs\n",
                r.experiment.c_str(), r.param, r.estimate, r.std_error, r.target, r.gap_sigmas, r.runtime_s);
    std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"branchlab: critical branching Levy systems, Monte Carlo and limit PDE"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::optional<std::string> out;
    bool check = false;
    bool no_plot = false;

    auto* run_cmd = app.add_subcommand("run", "run an experiment config");
    run_cmd->add_option("config", config_path, "experiment JSON")->required();
    run_cmd->add_option("--seed", seed, "master seed (overrides the file and BRANCHLAB_SEED)");
    run_cmd->add_option("--workers", workers, "worker threads (0: available parallelism)");
    run_cmd->add_option("--out", out, "output prefix (writes .csv, .json and plot series)");
    run_cmd->add_flag("--check", check, "exit 4 when a row breaches the config's gap check");
    run_cmd->add_flag("--no-plot", no_plot, "skip the plot series files");

    auto* validate_cmd = app.add_subcommand("validate", "parse and validate a config");
    validate_cmd->add_option("config", config_path, "experiment JSON")->required();

    app.add_subcommand("presets", "list function presets, drivers and experiments");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("presets")) {
            std::cout << "functions:";
            for (const auto& p : preset_catalog()) std::cout << ' ' << p;
            std::cout << "\ndrivers: brownian compound_poisson jump_diffusion\nexperiments:";
            for (auto e : {Experiment::thm1, Experiment::thm2, Experiment::thm3_vague, Experiment::thm3_weak,
                           Experiment::survival, Experiment::m_tail, Experiment::llt, Experiment::pde_only,
                           Experiment::scaled_vs_limit})
                std::cout << ' ' << to_string(e);
            std::cout << '\n';
            return 0;
        }

        ExperimentConfig config = load_config(config_path);
        if (app.got_subcommand("validate")) {
            std::cout << config_to_json(config) << '\n';
            return 0;
        }

        if (seed) config.master_seed = *seed;
        if (workers) config.workers = *workers;
        if (out) config.output = *out;
        validate(config);
        const auto rows = run(config, print_row);
        for (const auto& path : emit(rows, config.output, !no_plot)) std::cout << "wrote " << path << '\n';
        if (check) {
            int breaches = 0;
            for (const auto& r : rows)
                if (r.breaches(config.check)) {
                    ++breaches;
                    std::cerr << "gap breach: " << r.experiment << " param " << r.param << " gap " << r.gap
                              << '\n';
                }
            if (breaches > 0) return kCheckBreach;
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDownstreamError;
    }
}
