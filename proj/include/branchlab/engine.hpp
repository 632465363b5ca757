#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "branchlab/functions.hpp"
#include "branchlab/levy.hpp"
#include "branchlab/offspring.hpp"
#include "branchlab/rng.hpp"

namespace branchlab {

// Horizon sentinel: every particle runs until it dies.
inline constexpr double kRunToExtinction = std::numeric_limits<double>::infinity();

struct Realization {
    std::vector<double> positions;  // alive particles at the horizon
    bool survived = false;
    double max_t = -std::numeric_limits<double>::infinity();
    double min_t = std::numeric_limits<double>::infinity();
    // Running sup over all particles and times up to the horizon; the exact
    // all-time maximum in run-to-extinction mode.
    double sup_all_time = 0.0;
    std::uint64_t events = 0;
    std::uint64_t seed_id = 0;
    // Set when the run stopped because sup_all_time reached the stop level.
    bool stopped_at_level = false;
};

struct SimulationOptions {
    bool track_extremes = true;
    // Abort the traversal as soon as sup_all_time >= stop_level (positions are
    // then incomplete). Used by the all-time maximum tail experiment.
    std::optional<double> stop_level;
};

// Exact-law draw of Z_t started from one particle at x0. Depth-first, memory
// proportional to tree depth. Throws ExplosionError past the event cap.
Realization simulate(const BranchingConfig& config, const LevyDriver& driver, double x0, double t,
                     Rng& rng, const SimulationOptions& options = {});

Realization simulate_replica(const BranchingConfig& config, const LevyDriver& driver, double x0,
                             double t, std::uint64_t master_seed, std::uint64_t replica_index,
                             const SimulationOptions& options = {});

struct Functionals {
    double sum_h = 0.0;
    double sum_g = 0.0;
    std::uint64_t count_a = 0;
    bool hit_a = false;
};

using RealFunction = std::function<double(double)>;

// (sum h(x_i), sum g(x_i / sqrt t), Z_t(A), Z_t(A) > 0).
Functionals functionals(const Realization& r, double t, const RealFunction& h,
                        const RealFunction& g, const IntervalSet& a);

}  // namespace branchlab
