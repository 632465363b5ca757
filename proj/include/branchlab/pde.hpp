#pragma once

#include <map>
#include <string>
#include <vector>

#include "branchlab/functions.hpp"
#include "branchlab/grid.hpp"
#include "branchlab/levy.hpp"
#include "branchlab/offspring.hpp"

namespace branchlab {

// Graded levels r_j = r0 + (r_max - r0)(j/J)^gamma, j = 0..J.
class TimeMesh {
public:
    TimeMesh(double r0, double r_max, int levels, double grading = 2.0);

    double r0() const noexcept { return r0_; }
    double r_max() const noexcept { return r_max_; }
    int levels() const noexcept { return levels_; }
    double grading() const noexcept { return grading_; }
    const std::vector<double>& nodes() const noexcept { return nodes_; }

private:
    double r0_, r_max_;
    int levels_;
    double grading_;
    std::vector<double> nodes_;
};

struct FieldMeta {
    std::string mode;  // "limit" or "scaled"
    double alpha = 2.0;
    double cee = 0.5;
    double h_mass = 0.0;
    double t = 0.0;    // scaled mode only
    std::string g;
    std::string h;
};

// v(r_j, y_i) on the mesh levels.
struct Field {
    Grid1D grid;
    std::vector<double> r;
    std::vector<std::vector<double>> v;
    FieldMeta meta;

    // Value at a mesh level (within 1e-12 relative) and y, by 6-point interpolation.
    double at(double r_level, double y) const;
    const std::vector<double>& level(double r_level) const;
};

// Columnar (r, y, v) text with a one-line JSON header.
void write_field(const Field& field, const std::string& path, std::size_t stride = 1);

double normal_density(double x) noexcept;
// phi(y / sqrt(r)) / sqrt(r)
double heat_kernel(double r, double y) noexcept;
// Exact flow of v' = -cee v^alpha over duration dt.
double nonlinear_flow(double v, double alpha, double cee, double dt) noexcept;

struct SimilarityOptions {
    double xi_half_width = 16.0;
    std::size_t xi_points = 1024;
    // Base step; steps grow by powers of two (up to 16x) while the
    // nonlinearity is weak.
    double dtau = 0.005;
    // Initial layer: relative nonlinear mass defect allowed at the start time.
    double start_defect = 1e-7;
    double latest_start = 1e-4;
};

// Dirac data l * delta_0 in self-similar variables w(tau, xi) = r^p v(r, xi sqrt r),
// tau = log r, p = 1/(alpha-1). Strang splitting: exact nonlinear half flows
// around a heat step of variance e^dtau - 1 followed by a dilation.
class SimilaritySolver {
public:
    SimilaritySolver(double alpha, double cee, double mass, SimilarityOptions options = {});

    double r() const noexcept;
    double start_time() const noexcept { return r_start_; }
    void advance_to(double r);
    const Grid1D& xi_grid() const noexcept { return xi_grid_; }
    const std::vector<double>& profile() const noexcept { return w_; }
    // v(r, y) at the current time.
    double value(double y) const;
    std::vector<double> sample(const Grid1D& grid) const;

private:
    void step(double dtau);

    double alpha_, cee_, mass_, p_;
    SimilarityOptions opt_;
    Grid1D xi_grid_;
    double tau_;
    double r_start_;
    std::vector<double> w_;
    double adaptive_step() const;

    struct StepCache {
        SemigroupKernel kernel;
        // 6-point interpolation stencils of the dilation, per node
        std::vector<std::size_t> base;
        std::vector<double> weights;
    };
    const StepCache& cache_for(double dtau);

    std::map<double, StepCache> cache_;
};

struct LimitSolverOptions {
    SimilarityOptions similarity;
    // Verify the mild-equation residual at r in {1/4, 1/2, 1} from r = 1/8.
    bool check_residual = false;
    double residual_tolerance = 1e-4;
};

// Limiting mild equation with data h_mass * delta_0 + g dx.
Field solve_limit_field(double alpha, double cee, const std::vector<double>& g, double h_mass,
                        const Grid1D& grid, const TimeMesh& mesh, const LimitSolverOptions& options = {});

// sup over the grid, at the given levels, of |v - mild right-hand side| with
// the Duhamel integral started at r_from.
double mild_residual(const Field& field, double r_from, const std::vector<double>& r_check);

// Finite-t scaled integral equation driven by xi^{(t)} and psi^{(t)}.
Field solve_scaled_field(double t, const LevyDriver& driver, const OffspringLaw& law, double beta,
                         const std::vector<double>& g, const std::vector<double>& h_scaled,
                         const Grid1D& grid, const TimeMesh& mesh);
// h is a preset in the original variable: data uses h(sqrt(t) y).
Field solve_scaled_field(double t, const LevyDriver& driver, const OffspringLaw& law, double beta,
                         const Preset& g, const Preset& h, const Grid1D& grid, const TimeMesh& mesh);

struct PdeSettings {
    double half_width = 10.0;
    std::size_t points = 4096;
    double r0 = 1e-3;
    int levels = 400;
    double grading = 2.0;
    SimilarityOptions similarity;

    Grid1D grid() const { return Grid1D(half_width, points); }
    TimeMesh mesh(double r_max = 1.0) const { return TimeMesh(r0, r_max, levels, grading); }
};

// -log E_{delta_y} exp{-h_mass Y_1(0) - X_1(g)} = v(1, y).
double thm1_rhs(double alpha, double cee, const Preset& g, double h_mass, double y,
                const PdeSettings& settings = {});

struct PowerLawFit {
    double limit = 0.0;
    double a = 0.0;
    double b = 0.0;
};

// v_inf - a theta^{-b} through three points.
PowerLawFit fit_power_tail(const std::vector<double>& theta, const std::vector<double>& values);

struct ThetaLadder {
    std::vector<double> theta;
    std::vector<double> values;  // v_theta(1, y)
    PowerLawFit fit;
    // v(1, y) of the very singular solution from a long run of the similarity
    // solver until stationary; a cross-check of the extrapolation (NaN when
    // not computed).
    double long_run = 0.0;
};

// theta -> infinity limit of v(1, y) for data theta delta_0 + g.
ThetaLadder theta_ladder(double alpha, double cee, const Preset& g, double y,
                         const std::vector<double>& thetas, const PdeSettings& settings = {},
                         bool with_long_run = true);

// -log P_{delta_y}(Y_1(0) = 0).
double thm2_rhs(double alpha, double cee, double y,
                const std::vector<double>& thetas = {4, 16, 64, 256},
                const PdeSettings& settings = {});

// max over r in rs and grid y of |v(r,y) - r^{-p} v(1, y/sqrt r)| / v(1,0) for the
// extrapolated theta -> infinity field.
double self_similarity_defect(double alpha, double cee, const std::vector<double>& rs,
                              const std::vector<double>& thetas = {4, 16, 64, 256},
                              const PdeSettings& settings = {});

struct Thm3Targets {
    double extinction = 0.0;     // -log P(Y_1(0) = 0)
    double local_mass = 0.0;     // -log E exp{-l(f) Y_1(0)}
    double with_g = 0.0;         // -log E[exp{-X_1(g)} 1{Y_1(0) = 0}]
    double g_only = 0.0;         // -log E exp{-X_1(g)}
    double vague_ratio() const;  // 1 - log E[e^{-l(f)Y}] / log P(Y=0)
    double weak_ratio() const;
};

Thm3Targets thm3_targets(double alpha, double cee, const Preset& f, const Preset& g, double y,
                         const std::vector<double>& thetas = {4, 16, 64, 256},
                         const PdeSettings& settings = {});

}  // namespace branchlab
