#pragma once

#include <complex>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "branchlab/grid.hpp"
#include "branchlab/rng.hpp"

namespace branchlab {

enum class DriverKind { brownian, compound_poisson, jump_diffusion };

std::string to_string(DriverKind kind);
DriverKind driver_kind_from_string(const std::string& name);

struct DriverSpec {
    DriverKind kind = DriverKind::brownian;
    double sigma = 1.0;
    double jump_rate = 0.0;
    double jump_half_width = 0.0;
    // "uniform" is the only accepted jump law; lattice laws such as
    // "two_point" are recognized and rejected.
    std::string jump_law = "uniform";
};

// Zero-mean, unit-variance Levy process: sigma B_t plus a compound Poisson
// process with rate lambda and jumps uniform on [-a, a].
class LevyDriver {
public:
    static LevyDriver brownian();
    static LevyDriver compound_poisson();
    static LevyDriver jump_diffusion();

    DriverKind kind() const noexcept { return kind_; }
    double sigma() const noexcept { return sigma_; }
    double jump_rate() const noexcept { return jump_rate_; }
    double jump_half_width() const noexcept { return half_width_; }

    double mean() const noexcept { return 0.0; }
    double variance() const noexcept;
    // E|xi_1|^{2+delta} is finite for every delta: uniform jumps are bounded.
    double moment_order() const noexcept { return std::numeric_limits<double>::infinity(); }
    // r_0 > 2 alpha / (alpha - 1)?
    bool satisfies_h4_prime(double alpha) const noexcept;

    // Psi(u) with E exp(i u xi_s) = exp(-s Psi(u)); real because the law is symmetric.
    double exponent(double u) const noexcept;

    // xi^{(t)}_r = xi_{tr} / sqrt(t): same sigma, rate t*lambda, half width a/sqrt(t).
    LevyDriver scaled(double t) const;

    // Displacement over `duration` (no path information).
    double displacement(double duration, Rng& rng) const;
    // Displacement plus running max/min of the path relative to its start.
    void displacement_with_extremes(double duration, Rng& rng, double& displacement,
                                    double& path_max, double& path_min) const;

    bool operator==(const LevyDriver&) const = default;

private:
    friend LevyDriver make_driver(const DriverSpec& spec);
    LevyDriver(DriverKind kind, double sigma, double rate, double half_width)
        : kind_(kind), sigma_(sigma), jump_rate_(rate), half_width_(half_width) {}

    DriverKind kind_;
    double sigma_;
    double jump_rate_;
    double half_width_;
};

LevyDriver make_driver(const DriverSpec& spec);

struct SegmentSample {
    double duration = 0.0;
    double displacement = 0.0;
    double path_max = 0.0;
    double path_min = 0.0;
    std::vector<std::pair<double, double>> jump_skeleton;  // (time, jump)
};

SegmentSample sample_segment(const LevyDriver& driver, double duration, Rng& rng,
                             bool want_extremes);

// Transition weights w_k with (P_s f)(y_i) = sum_k w_k f(y_{i+k}), stored
// circularly in a vector of length 2N.
//   trapezoid: the density sampled through exp(-s Psi) (resolved on the grid)
//   lattice:   continuous-time random walk on the grid with the same variance
//              per unit time (s too small for the grid; positive, exact semigroup)
//   hat:       E Lambda(xi_s/dy - k) with the hat function Lambda (pure jumps)
//   multiplier: exp(-s Psi) without positivity repair, for smooth data only
enum class KernelKind { trapezoid, lattice, hat, multiplier };

struct SemigroupKernel {
    std::vector<double> weights;
    KernelKind kind = KernelKind::trapezoid;
    double atom = 0.0;         // mass of xi_s at 0 (pure compound Poisson)
    double outer_mass = 0.0;   // kernel mass beyond the grid half width
    std::size_t band_nodes = 0;  // f must be constant on this many nodes at each edge
    std::vector<std::complex<double>> spectrum;  // DFT of the weights
};

SemigroupKernel semigroup_kernel(const LevyDriver& driver, double s, const Grid1D& grid);
// Band-limited flow exp(-s Psi) of the trigonometric interpolant; accurate for
// smooth data at any s but not positivity preserving.
SemigroupKernel multiplier_kernel(const LevyDriver& driver, double s, const Grid1D& grid);

// y -> E_y f(xi_s) on the grid; f is extended by its edge values outside it.
std::vector<double> semigroup_apply(const LevyDriver& driver, double s,
                                    const std::vector<double>& f, const Grid1D& grid);
// Same, reusing a kernel built for this grid.
std::vector<double> semigroup_apply(const SemigroupKernel& kernel, const std::vector<double>& f,
                                    const Grid1D& grid);

// sup_x |sqrt(t) E_x h(xi_t) - l(h) phi(x / sqrt(t))| over the grid nodes.
double llt_error(const LevyDriver& driver, double t, const std::vector<double>& h,
                 const Grid1D& grid);

}  // namespace branchlab
