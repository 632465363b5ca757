#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "branchlab/engine.hpp"
#include "branchlab/functions.hpp"
#include "branchlab/levy.hpp"
#include "branchlab/offspring.hpp"

namespace branchlab {

struct EstimateRecord {
    double value = 0.0;
    double std_error = 0.0;
    std::uint64_t replicas = 0;   // replicas that entered the estimate
    std::uint64_t exploded = 0;   // replicas aborted at the event cap (excluded)
    std::uint64_t master_seed = 0;
    std::string label;
};

struct McOptions {
    std::uint64_t replicas = 1000;
    std::uint64_t seed = 1;
    unsigned workers = 0;  // 0: available parallelism
};

// t^{1/(alpha-1)} computed in extended precision.
long double scaling_power(double t, double alpha);

// Fraction of replicas alive at t (binomial standard error).
EstimateRecord estimate_survival(const BranchingConfig& config, const LevyDriver& driver, double t,
                                 const McOptions& mc);

// t^p (1 - E_{sqrt(t) y} exp{-t^{-(p-1/2)} sum h(x_i) - t^{-p} sum g(x_i/sqrt t)}), p = 1/(alpha-1).
EstimateRecord estimate_thm1_lhs(const BranchingConfig& config, const LevyDriver& driver, double y,
                                 double t, const Preset& h, const Preset& g, const McOptions& mc);

// t^p P_{sqrt(t) y}(Z_t(A) > 0).
EstimateRecord estimate_thm2_lhs(const BranchingConfig& config, const LevyDriver& driver, double y,
                                 double t, const IntervalSet& a, const McOptions& mc);

enum class ConditionalMode { vague, weak };

// E[exp{-F} | Z_t(A) > 0] with F = t^{-(p-1/2)} sum f(x_i) (vague) or
// F = t^{-p} sum f(x_i / sqrt t) (weak); ratio estimator, delta-method error.
EstimateRecord estimate_conditional(const BranchingConfig& config, const LevyDriver& driver,
                                    double y, double t, const IntervalSet& a, const Preset& f,
                                    ConditionalMode mode, const McOptions& mc);

struct MTailPoint {
    double x = 0.0;
    EstimateRecord probability;  // P(M >= x)
    std::uint64_t exceedances = 0;
};

struct MTailResult {
    double slope = 0.0;
    double slope_std_error = 0.0;
    double intercept = 0.0;
    std::vector<MTailPoint> points;
    std::uint64_t replicas = 0;
    std::uint64_t exploded = 0;
    double cap_exceedance_rate = 0.0;
};

// P(M >= x) on the grid from run-to-extinction replicas started at 0, and the
// least-squares slope of log P against log x.
MTailResult estimate_m_tail(const BranchingConfig& config, const LevyDriver& driver,
                            const std::vector<double>& x_grid, const McOptions& mc);

}  // namespace branchlab
