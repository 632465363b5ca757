#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "branchlab/functions.hpp"
#include "branchlab/levy.hpp"
#include "branchlab/offspring.hpp"
#include "branchlab/pde.hpp"

namespace branchlab {

enum class Experiment { thm1, thm2, thm3_vague, thm3_weak, survival, m_tail, llt, pde_only, scaled_vs_limit };

std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& name);

struct LawBlock {
    std::string family = "slack";  // "slack" or "vector"
    double alpha = 2.0;
    double c = 0.5;
    std::vector<double> probabilities;
    std::optional<double> tail_exponent;

    OffspringLaw build() const;
};

struct DriverBlock {
    // A named preset ("brownian", "compound_poisson", "jump_diffusion"), or
    // an explicit spec when `explicit_spec` is set.
    std::string preset = "brownian";
    std::optional<DriverSpec> explicit_spec;

    LevyDriver build() const;
};

struct GridBlock {
    double half_width = 10.0;
    std::size_t points = 4096;
    double r0 = 1e-3;
    int levels = 400;
    double grading = 2.0;

    PdeSettings settings() const;
};

// Row breaches the check when |gap| > max(sigmas * stderr, relative * |target|).
struct CheckBlock {
    double sigmas = 3.0;
    double relative = 0.0;
};

struct ExperimentConfig {
    Experiment experiment = Experiment::survival;
    LawBlock law;
    DriverBlock driver;
    double beta = 1.0;
    double y = 0.0;
    // Ladder of t for every experiment except m-tail (x_grid) and pde-only (r = 1).
    std::vector<double> t_ladder;
    std::vector<double> theta_ladder{4, 16, 64, 256};
    std::vector<double> x_grid;  // m-tail levels
    std::uint64_t replicas = 1000;
    std::uint64_t master_seed = 1;
    std::uint64_t event_cap = 100'000'000;
    GridBlock grid;
    Interval a{-1.0, 1.0};
    std::string g = "zero";
    std::string h = "zero";
    std::string f = "triangle";
    std::string output = "results/run";
    unsigned workers = 0;
    CheckBlock check;
};

// Parses and validates; ConfigError on any problem.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& config);
void validate(const ExperimentConfig& config);

struct ResultRow {
    std::string experiment;
    double param = 0.0;
    double estimate = 0.0;
    double std_error = 0.0;
    double target = 0.0;  // NaN when there is no target
    double gap = 0.0;
    double gap_sigmas = 0.0;  // NaN when stderr == 0
    double runtime_s = 0.0;
    std::uint64_t exploded = 0;
    std::uint64_t seed = 0;

    bool breaches(const CheckBlock& check) const;
};

ResultRow make_row(std::string experiment, double param, double estimate, double std_error, double target,
                   double runtime_s, std::uint64_t exploded, std::uint64_t seed);

// A downstream typed error, annotated with the ladder point that raised it.
class ExperimentError : public std::runtime_error {
public:
    ExperimentError(const std::string& experiment, double param, const std::string& what)
        : std::runtime_error(experiment + " at param " + std::to_string(param) + ": " + what) {}
};

using RowSink = std::function<void(const ResultRow&)>;

// Runs the experiment over its ladder; rows are passed to `sink` as produced.
std::vector<ResultRow> run(const ExperimentConfig& config, const RowSink& sink = {});

inline constexpr const char* kCsvHeader =
    "experiment,param,estimate,stderr,target,gap,gap_sigmas,runtime_s,exploded,seed";

std::string rows_to_csv(const std::vector<ResultRow>& rows);
std::string rows_to_json(const std::vector<ResultRow>& rows);
std::vector<ResultRow> rows_from_json(const std::string& text);

// Writes <prefix>.csv, <prefix>.json and, with plot_data, one
// <prefix>.<label>.dat series file (param estimate stderr target) per label.
std::vector<std::string> emit(const std::vector<ResultRow>& rows, const std::string& prefix, bool plot_data);

}  // namespace branchlab
