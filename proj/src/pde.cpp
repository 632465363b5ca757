#include "branchlab/pde.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include <nlohmann/json.hpp>

#include "branchlab/error.hpp"

namespace branchlab {

namespace {

constexpr double kBoundaryMass = 1e-8;
constexpr double kInnerStart = 1e-3;
constexpr int kInnerSteps = 100;

// 6-point Lagrange stencil on a uniform grid; constant outside it.
std::size_t stencil6(const Grid1D& grid, double x, double* w) {
    const double s = (x + grid.half_width()) / grid.spacing();
    const auto n = static_cast<std::ptrdiff_t>(grid.points());
    std::fill(w, w + 6, 0.0);
    if (s <= 0.0) {
        w[0] = 1.0;
        return 0;
    }
    if (s >= static_cast<double>(n - 1)) {
        w[5] = 1.0;
        return static_cast<std::size_t>(n - 6);
    }
    auto base = static_cast<std::ptrdiff_t>(std::floor(s)) - 2;
    base = std::clamp<std::ptrdiff_t>(base, 0, n - 6);
    const double u = s - static_cast<double>(base);
    for (int i = 0; i < 6; ++i) {
        double c = 1.0;
        for (int j = 0; j < 6; ++j)
            if (j != i) c *= (u - j) / static_cast<double>(i - j);
        w[i] = c;
    }
    return static_cast<std::size_t>(base);
}

double lagrange6(const std::vector<double>& values, const Grid1D& grid, double x) {
    double w[6];
    const std::size_t base = stencil6(grid, x, w);
    double acc = 0.0;
    for (int i = 0; i < 6; ++i) acc += w[i] * values[base + static_cast<std::size_t>(i)];
    return acc;
}

double data_support_radius(const std::vector<double>& g, const Grid1D& grid) {
    const double edge = g.front();
    double scale = 1.0;
    for (double x : g) scale = std::max(scale, std::abs(x));
    double radius = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (std::abs(g[i] - edge) > 1e-12 * scale) radius = std::max(radius, std::abs(grid.node(i)));
    return radius;
}

void check_grid(const Grid1D& grid, const TimeMesh& mesh, const std::vector<double>& data) {
    if (data.size() != grid.points()) throw ParameterError("data does not match the grid");
    if (grid.spacing() > 0.05 + 1e-15) throw GridError("grid spacing above 0.05");
    const double need = 8.0 * std::sqrt(mesh.r_max()) + data_support_radius(data, grid);
    if (grid.half_width() < need)
        throw GridError("grid half width " + std::to_string(grid.half_width()) + " below 8 sqrt(r_max) + support radius = " +
                        std::to_string(need));
}

// Mass within the outer sixteenth of the grid on each side (compact data only).
void check_boundary(const std::vector<double>& v, const Grid1D& grid) {
    const std::size_t band = grid.points() / 16;
    double mass = 0.0;
    for (std::size_t i = 0; i < band; ++i) mass += std::abs(v[i]) + std::abs(v[v.size() - 1 - i]);
    mass *= grid.spacing();
    if (mass > kBoundaryMass)
        throw GridError("solution mass " + std::to_string(mass) + " near the grid boundary; widen the grid");
}

// w' = -C[(u + w)^alpha - u^alpha] with u frozen.
double coupled_flow(double w, double u, double alpha, double cee, double h) {
    if (w <= 0.0) return 0.0;
    if (alpha == 2.0) {
        const double a = 2.0 * cee * u;
        const double decay = std::exp(-a * h);
        const double growth = a > 0.0 ? -std::expm1(-a * h) / a : h;
        return w * decay / (1.0 + cee * w * growth);
    }
    const double rate = alpha * cee * std::pow(u + w, alpha - 1.0);
    const int m = std::max(1, static_cast<int>(std::ceil(10.0 * h * rate)));
    const double dt = h / m;
    const double ua = std::pow(u, alpha);
    auto f = [&](double x) { return -cee * (std::pow(u + std::max(x, 0.0), alpha) - ua); };
    for (int k = 0; k < m; ++k) {
        const double k1 = f(w), k2 = f(w + 0.5 * dt * k1), k3 = f(w + 0.5 * dt * k2), k4 = f(w + dt * k3);
        w = std::max(0.0, w + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0);
    }
    return w;
}

// Transition step for a state of the given age (time since rough data). Once
// the diffusion has smoothed the state below the grid scale, short steps use
// the band-limited multiplier instead of the positive lattice walk.
std::vector<double> heat_step(const LevyDriver& driver, double dt, double age, const std::vector<double>& v,
                              const Grid1D& grid) {
    const double sigma2 = driver.sigma() * driver.sigma();
    const double k = std::numbers::pi / grid.spacing();
    const double resolved = 32.3;
    if (sigma2 > 0.0 && 0.5 * age * sigma2 * k * k >= resolved && 0.5 * dt * sigma2 * k * k < resolved)
        return semigroup_apply(multiplier_kernel(driver, dt, grid), v, grid);
    return semigroup_apply(driver, dt, v, grid);
}

template <class Nonlinear>
void strang_march(std::vector<double>& v, double dt, double age, const LevyDriver& driver, const Grid1D& grid,
                  Nonlinear&& half_flow) {
    half_flow(v, 0.5 * dt);
    v = heat_step(driver, dt, age, v, grid);
    half_flow(v, 0.5 * dt);
}

}  // namespace

TimeMesh::TimeMesh(double r0, double r_max, int levels, double grading)
    : r0_(r0), r_max_(r_max), levels_(levels), grading_(grading) {
    if (!(r0 > 0.0 && r0 <= 1e-3)) throw ParameterError("time mesh: r0 must lie in (0, 1e-3]");
    if (!(r_max > r0)) throw ParameterError("time mesh: r_max must exceed r0");
    if (levels < 1) throw ParameterError("time mesh: need at least one step");
    if (!(grading >= 2.0)) throw ParameterError("time mesh: grading exponent must be >= 2");
    nodes_.resize(static_cast<std::size_t>(levels) + 1);
    for (int j = 0; j <= levels; ++j)
        nodes_[static_cast<std::size_t>(j)] =
            r0 + (r_max - r0) * std::pow(static_cast<double>(j) / levels, grading);
    nodes_.back() = r_max;
}

const std::vector<double>& Field::level(double r_level) const {
    auto it = std::min_element(r.begin(), r.end(),
                               [&](double a, double b) { return std::abs(a - r_level) < std::abs(b - r_level); });
    if (it == r.end() || std::abs(*it - r_level) > 1e-12 * std::max(1.0, r_level))
        throw DomainError("field has no mesh level at r = " + std::to_string(r_level));
    return v[static_cast<std::size_t>(it - r.begin())];
}

double Field::at(double r_level, double y) const { return lagrange6(level(r_level), grid, y); }

void write_field(const Field& field, const std::string& path, std::size_t stride) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    nlohmann::json header = {{"mode", field.meta.mode},
                             {"alpha", field.meta.alpha},
                             {"cee", field.meta.cee},
                             {"h_mass", field.meta.h_mass},
                             {"t", field.meta.t},
                             {"g", field.meta.g},
                             {"h", field.meta.h},
                             {"grid", {{"half_width", field.grid.half_width()}, {"points", field.grid.points()}}},
                             {"levels", field.r.size()},
                             {"stride", stride}};
    out << "# " << header.dump() << "\n";
    out << "r,y,v\n";
    out.precision(17);
    for (std::size_t j = 0; j < field.r.size(); ++j)
        for (std::size_t i = 0; i < field.grid.points(); i += std::max<std::size_t>(stride, 1))
            out << field.r[j] << "," << field.grid.node(i) << "," << field.v[j][i] << "\n";
    if (!out) throw std::runtime_error("write failed for " + path);
}

double normal_density(double x) noexcept {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double heat_kernel(double r, double y) noexcept { return normal_density(y / std::sqrt(r)) / std::sqrt(r); }

double nonlinear_flow(double v, double alpha, double cee, double dt) noexcept {
    if (v <= 0.0 || cee == 0.0) return std::max(v, 0.0);
    if (alpha == 2.0) return v / (1.0 + cee * dt * v);
    return v * std::pow(1.0 + (alpha - 1.0) * cee * dt * std::pow(v, alpha - 1.0), -1.0 / (alpha - 1.0));
}

SimilaritySolver::SimilaritySolver(double alpha, double cee, double mass, SimilarityOptions options)
    : alpha_(alpha), cee_(cee), mass_(mass), p_(1.0 / (alpha - 1.0)), opt_(options),
      xi_grid_(options.xi_half_width, options.xi_points) {
    if (!(alpha > 1.0 && alpha <= 2.0)) throw ParameterError("similarity solver: alpha must lie in (1, 2]");
    if (!(cee >= 0.0)) throw ParameterError("similarity solver: cee must be >= 0");
    if (!(mass > 0.0 && std::isfinite(mass))) throw ParameterError("similarity solver: mass must be positive");
    if (!(options.dtau > 0.0)) throw ParameterError("similarity solver: dtau must be positive");
    if (!(options.latest_start > 0.0)) throw ParameterError("similarity solver: latest_start must be positive");
    r_start_ = options.latest_start;
    if (cee > 0.0) {
        // Relative mass lost to the nonlinearity on [0, r] by the linear profile:
        // 2 cee l^{a-1} c_a r^{(3-a)/2} / (3-a), c_a = int phi^a.
        const double c_a = std::pow(2.0 * std::numbers::pi, 0.5 * (1.0 - alpha)) / std::sqrt(alpha);
        const double r = std::pow(options.start_defect * (3.0 - alpha) /
                                      (2.0 * cee * std::pow(mass, alpha - 1.0) * c_a),
                                  2.0 / (3.0 - alpha));
        r_start_ = std::min(r_start_, r);
    }
    tau_ = std::log(r_start_);
    w_.resize(xi_grid_.points());
    const double amp = mass * std::pow(r_start_, p_ - 0.5);
    for (std::size_t i = 0; i < w_.size(); ++i) w_[i] = amp * normal_density(xi_grid_.node(i));
}

double SimilaritySolver::r() const noexcept { return std::exp(tau_); }

double SimilaritySolver::adaptive_step() const {
    const double wmax = *std::max_element(w_.begin(), w_.end());
    const double rate = cee_ == 0.0 ? 0.0 : cee_ * std::pow(std::max(wmax, 1e-300), alpha_ - 1.0);
    const int k = rate * 4096.0 <= p_ ? 4 : std::clamp(static_cast<int>(std::floor(0.5 * std::log2(p_ / rate))), 0, 4);
    // keeps the 8-sigma padding of a heat step inside the zeroed far field
    const double hmax = std::log1p(std::pow(xi_grid_.half_width() / 32.0, 2));
    return std::min(opt_.dtau * static_cast<double>(1 << k), std::max(hmax, opt_.dtau));
}

const SimilaritySolver::StepCache& SimilaritySolver::cache_for(double dtau) {
    auto it = cache_.find(dtau);
    if (it != cache_.end()) return it->second;
    if (cache_.size() > 64) cache_.clear();
    StepCache c;
    c.kernel = multiplier_kernel(LevyDriver::brownian(), std::expm1(dtau), xi_grid_);
    const std::size_t n = xi_grid_.points();
    c.base.resize(n);
    c.weights.resize(6 * n);
    const double stretch = std::exp(0.5 * dtau);
    for (std::size_t i = 0; i < n; ++i) c.base[i] = stencil6(xi_grid_, xi_grid_.node(i) * stretch, &c.weights[6 * i]);
    return cache_.emplace(dtau, std::move(c)).first->second;
}

void SimilaritySolver::step(double dtau) {
    const StepCache& c = cache_for(dtau);
    auto half_flow = [&](double factor) {
        if (cee_ == 0.0) return;
        for (auto& w : w_) w = nonlinear_flow(w, alpha_, cee_, factor);
    };
    // dr / r at the start and at the end of the step
    half_flow(0.5 * std::expm1(dtau));
    const std::vector<double> spread = semigroup_apply(c.kernel, w_, xi_grid_);
    const double gain = std::exp(p_ * dtau);
    // The far field is a Gaussian tail far below roundoff; zero it so that
    // roundoff plateaus cannot grow towards the flat state.
    const double cut = 0.75 * xi_grid_.half_width();
    for (std::size_t i = 0; i < w_.size(); ++i) {
        if (std::abs(xi_grid_.node(i)) > cut) {
            w_[i] = 0.0;
            continue;
        }
        const double* wt = &c.weights[6 * i];
        const double* f = &spread[c.base[i]];
        const double acc = wt[0] * f[0] + wt[1] * f[1] + wt[2] * f[2] + wt[3] * f[3] + wt[4] * f[4] + wt[5] * f[5];
        w_[i] = std::max(0.0, gain * acc);
    }
    half_flow(-0.5 * std::expm1(-dtau));
    tau_ += dtau;
}

void SimilaritySolver::advance_to(double r) {
    const double target = std::log(r);
    if (target < tau_ - 1e-12) throw DomainError("similarity solver cannot step backwards in time");
    while (target - tau_ > 1e-12) {
        const double remaining = target - tau_;
        const double h = adaptive_step();
        if (remaining <= h * (1.0 + 1e-9)) {
            step(remaining);
            break;
        }
        step(h);
    }
    tau_ = target;
}

double SimilaritySolver::value(double y) const {
    const double r = this->r();
    return std::pow(r, -p_) * std::max(0.0, lagrange6(w_, xi_grid_, y / std::sqrt(r)));
}

std::vector<double> SimilaritySolver::sample(const Grid1D& grid) const {
    std::vector<double> v(grid.points());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = value(grid.node(i));
    return v;
}

Field solve_limit_field(double alpha, double cee, const std::vector<double>& g, double h_mass,
                        const Grid1D& grid, const TimeMesh& mesh, const LimitSolverOptions& options) {
    if (!(alpha > 1.0 && alpha <= 2.0)) throw ParameterError("solve_limit_field: alpha must lie in (1, 2]");
    if (!(cee >= 0.0)) throw ParameterError("solve_limit_field: cee must be >= 0");
    if (!(h_mass >= 0.0)) throw ParameterError("solve_limit_field: h_mass must be >= 0");
    check_grid(grid, mesh, g);
    for (double x : g)
        if (!(x >= 0.0)) throw ParameterError("solve_limit_field: g must be nonnegative");

    Field field{grid, mesh.nodes(), {}, {"limit", alpha, cee, h_mass, 0.0, "", ""}};
    const auto& r = mesh.nodes();
    field.v.reserve(r.size());
    const bool g_zero = std::all_of(g.begin(), g.end(), [](double x) { return x == 0.0; });
    const bool compact = g.front() == 0.0 && g.back() == 0.0;
    const LevyDriver heat = LevyDriver::brownian();
    auto half_flow = [&](std::vector<double>& v, double dt) {
        if (cee == 0.0) return;
        for (auto& x : v) x = nonlinear_flow(x, alpha, cee, dt);
    };

    SimilarityOptions sim_opts = options.similarity;
    sim_opts.latest_start = std::min(sim_opts.latest_start, r[0]);
    if (h_mass > 0.0 && g_zero) {
        SimilaritySolver sim(alpha, cee, h_mass, sim_opts);
        for (double rj : r) {
            sim.advance_to(rj);
            field.v.push_back(sim.sample(grid));
        }
    } else if (h_mass > 0.0) {
        // v = U + W with U the Dirac solution and
        // W_r = heat W - C[(U + W)^alpha - U^alpha], W(0) = g.
        sim_opts.latest_start = std::min(sim_opts.latest_start, kInnerStart * r[0]);
        SimilaritySolver sim(alpha, cee, h_mass, sim_opts);
        auto react = [&](std::vector<double>& wv, const std::vector<double>& uv, double h) {
            if (cee == 0.0) return;
            for (std::size_t i = 0; i < wv.size(); ++i) wv[i] = coupled_flow(wv[i], uv[i], alpha, cee, h);
        };
        // inner geometric march on [kInnerStart r0, r0]
        double rr = kInnerStart * r[0];
        sim.advance_to(rr);
        std::vector<double> u = sim.sample(grid);
        std::vector<double> w = semigroup_apply(heat, rr, g, grid);
        const double ratio = std::pow(1.0 / kInnerStart, 1.0 / kInnerSteps);
        for (int k = 0; k < kInnerSteps; ++k) {
            const double next = k + 1 == kInnerSteps ? r[0] : rr * ratio;
            react(w, u, 0.5 * (next - rr));
            w = heat_step(heat, next - rr, rr, w, grid);
            sim.advance_to(next);
            u = sim.sample(grid);
            react(w, u, 0.5 * (next - rr));
            rr = next;
        }
        auto push = [&] {
            std::vector<double> v(u);
            for (std::size_t i = 0; i < v.size(); ++i) v[i] += w[i];
            field.v.push_back(std::move(v));
        };
        push();
        for (std::size_t j = 1; j < r.size(); ++j) {
            const double dt = r[j] - r[j - 1];
            react(w, u, 0.5 * dt);
            w = heat_step(heat, dt, r[j - 1], w, grid);
            sim.advance_to(r[j]);
            u = sim.sample(grid);
            react(w, u, 0.5 * dt);
            push();
        }
    } else {
        std::vector<double> v = g;
        if (!g_zero) strang_march(v, r[0], 0.0, heat, grid, half_flow);
        field.v.push_back(v);
        for (std::size_t j = 1; j < r.size(); ++j) {
            if (!g_zero) strang_march(v, r[j] - r[j - 1], r[j - 1], heat, grid, half_flow);
            field.v.push_back(v);
        }
    }
    if (compact) check_boundary(field.v.back(), grid);
    if (options.check_residual && mesh.r_max() >= 1.0) {
        const double res = mild_residual(field, 0.125, {0.25, 0.5, 1.0});
        if (res > options.residual_tolerance)
            throw SolverError("mild-equation residual " + std::to_string(res) + " above tolerance");
    }
    return field;
}

double mild_residual(const Field& field, double r_from, const std::vector<double>& r_check) {
    if (field.meta.mode != "limit") throw ParameterError("mild_residual applies to limit fields");
    const auto& r = field.r;
    auto index_of = [&](double x) {
        auto it = std::lower_bound(r.begin(), r.end(), x);
        if (it == r.end()) --it;
        if (it != r.begin() && std::abs(*(it - 1) - x) < std::abs(*it - x)) --it;
        return static_cast<std::size_t>(it - r.begin());
    };
    const LevyDriver heat = LevyDriver::brownian();
    const double alpha = field.meta.alpha, cee = field.meta.cee;
    const std::size_t i0 = index_of(r_from);
    double worst = 0.0;
    for (double rc : r_check) {
        const std::size_t k = index_of(rc);
        if (k <= i0) continue;
        std::vector<double> rhs = semigroup_apply(heat, r[k] - r[i0], field.v[i0], field.grid);
        for (std::size_t i = i0; i <= k; ++i) {
            double w = 0.0;
            if (i > i0) w += 0.5 * (r[i] - r[i - 1]);
            if (i < k) w += 0.5 * (r[i + 1] - r[i]);
            std::vector<double> react(field.grid.points());
            for (std::size_t m = 0; m < react.size(); ++m) react[m] = cee * std::pow(field.v[i][m], alpha);
            if (i < k) react = semigroup_apply(heat, r[k] - r[i], react, field.grid);
            for (std::size_t m = 0; m < rhs.size(); ++m) rhs[m] -= w * react[m];
        }
        for (std::size_t m = 0; m < rhs.size(); ++m) worst = std::max(worst, std::abs(rhs[m] - field.v[k][m]));
    }
    return worst;
}

Field solve_scaled_field(double t, const LevyDriver& driver, const OffspringLaw& law, double beta,
                         const std::vector<double>& g, const std::vector<double>& h_scaled,
                         const Grid1D& grid, const TimeMesh& mesh) {
    if (!(t > 1.0)) throw DomainError("solve_scaled_field: t must exceed 1");
    if (h_scaled.size() != grid.points()) throw ParameterError("h does not match the grid");
    check_grid(grid, mesh, g);
    if (h_scaled.front() != 0.0 || h_scaled.back() != 0.0)
        throw ParameterError("solve_scaled_field: h must have compact support on the grid");

    const double alpha = law.alpha();
    const long double tp = std::pow(static_cast<long double>(t), 1.0L / (alpha - 1.0));
    const double h_factor = static_cast<double>(std::sqrt(static_cast<long double>(t)) / tp);
    const double g_factor = static_cast<double>(1.0L / tp);
    const double vmax = static_cast<double>(tp);
    std::vector<double> v(grid.points());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = -vmax * std::expm1(-h_factor * h_scaled[i] - g_factor * g[i]);

    const LevyDriver scaled = driver.scaled(t);
    const double cee = cee_alpha(law, beta);
    auto half_flow = [&](std::vector<double>& u, double dt) {
        if (law.pure_power()) {
            for (auto& x : u) x = nonlinear_flow(x, alpha, cee, dt);
            return;
        }
        // RK4 on v' = -psi_t(v) with steps small against the local rate.
        for (auto& x : u) {
            if (x <= 0.0) continue;
            const int m = std::max(1, static_cast<int>(std::ceil(20.0 * dt * cee * std::pow(x, alpha - 1.0))));
            const double hstep = dt / m;
            auto f = [&](double y) { return -psi_scaled(law, beta, t, std::clamp(y, 0.0, vmax)); };
            for (int s = 0; s < m; ++s) {
                const double k1 = f(x), k2 = f(x + 0.5 * hstep * k1), k3 = f(x + 0.5 * hstep * k2),
                             k4 = f(x + hstep * k3);
                x = std::clamp(x + hstep * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0, 0.0, vmax);
            }
        }
    };

    Field field{grid, mesh.nodes(), {}, {"scaled", alpha, cee, 0.0, t, "", ""}};
    const auto& r = mesh.nodes();
    const bool zero = std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
    if (!zero) strang_march(v, r[0], 0.0, scaled, grid, half_flow);
    field.v.push_back(v);
    for (std::size_t j = 1; j < r.size(); ++j) {
        if (!zero) strang_march(v, r[j] - r[j - 1], r[j - 1], scaled, grid, half_flow);
        field.v.push_back(v);
    }
    if (g.front() == 0.0 && g.back() == 0.0) check_boundary(field.v.back(), grid);
    return field;
}

Field solve_scaled_field(double t, const LevyDriver& driver, const OffspringLaw& law, double beta,
                         const Preset& g, const Preset& h, const Grid1D& grid, const TimeMesh& mesh) {
    if (!h.compact_support()) throw ParameterError("solve_scaled_field: h must have compact support");
    Field f = solve_scaled_field(t, driver, law, beta, g.sample(grid), h.sample(grid, std::sqrt(t)), grid, mesh);
    f.meta.g = g.describe();
    f.meta.h = h.describe();
    return f;
}

double thm1_rhs(double alpha, double cee, const Preset& g, double h_mass, double y,
                const PdeSettings& settings) {
    if (g.is_zero() && h_mass == 0.0) return 0.0;
    if (g.is_zero()) {
        SimilaritySolver sim(alpha, cee, h_mass, settings.similarity);
        sim.advance_to(1.0);
        return sim.value(y);
    }
    const Grid1D grid = settings.grid();
    const Field field = solve_limit_field(alpha, cee, g.sample(grid), h_mass, grid, settings.mesh());
    return field.at(1.0, y);
}

PowerLawFit fit_power_tail(const std::vector<double>& theta, const std::vector<double>& values) {
    if (theta.size() != 3 || values.size() != 3) throw ParameterError("power-law fit takes three points");
    const double d1 = values[1] - values[0];
    const double d2 = values[2] - values[1];
    if (!(d1 > 0.0 && d2 > 0.0)) throw SolverError("theta ladder is not increasing");
    const double target = d2 / d1;
    // ratio(b) = (t1^-b - t2^-b) / (t0^-b - t1^-b) decreases from its b -> 0 limit to 0.
    auto ratio = [&](double b) {
        return (std::pow(theta[1], -b) - std::pow(theta[2], -b)) / (std::pow(theta[0], -b) - std::pow(theta[1], -b));
    };
    const double limit0 = std::log(theta[2] / theta[1]) / std::log(theta[1] / theta[0]);
    if (!(target < limit0)) throw SolverError("theta extrapolation exponent b <= 0");
    double lo = 1e-9, hi = 1.0;
    while (ratio(hi) > target) {
        hi *= 2.0;
        if (hi > 1e3) throw SolverError("theta extrapolation did not bracket the exponent");
    }
    for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        (ratio(mid) > target ? lo : hi) = mid;
    }
    PowerLawFit fit;
    fit.b = 0.5 * (lo + hi);
    fit.a = d1 / (std::pow(theta[0], -fit.b) - std::pow(theta[1], -fit.b));
    fit.limit = values[2] + fit.a * std::pow(theta[2], -fit.b);
    return fit;
}

ThetaLadder theta_ladder(double alpha, double cee, const Preset& g, double y,
                         const std::vector<double>& thetas, const PdeSettings& settings, bool with_long_run) {
    if (thetas.size() < 4) throw ParameterError("theta ladder needs at least 4 points");
    for (std::size_t i = 1; i < thetas.size(); ++i)
        if (!(thetas[i] > thetas[i - 1] && thetas[0] > 0.0))
            throw ParameterError("theta ladder must be positive and increasing");
    ThetaLadder out;
    out.theta = thetas;
    for (double th : thetas) out.values.push_back(thm1_rhs(alpha, cee, g, th, y, settings));
    for (std::size_t i = 1; i < out.values.size(); ++i)
        if (!(out.values[i] > out.values[i - 1]))
            throw SolverError("theta ladder values are not increasing (solver fault)");
    const std::size_t n = thetas.size();
    out.fit = fit_power_tail({thetas[n - 3], thetas[n - 2], thetas[n - 1]},
                             {out.values[n - 3], out.values[n - 2], out.values[n - 1]});
    out.long_run = std::numeric_limits<double>::quiet_NaN();
    if (g.is_zero() && cee > 0.0 && with_long_run) {
        // w(tau, xi) = v_{e^{(p-1/2) tau}}(1, xi) for unit mass: run until stationary.
        const double p = 1.0 / (alpha - 1.0);
        SimilaritySolver sim(alpha, cee, 1.0, settings.similarity);
        double tau = std::log(1e3) / (p - 0.5);
        sim.advance_to(std::exp(tau));
        double prev = lagrange6(sim.profile(), sim.xi_grid(), y);
        const double tau_max = std::log(1e16) / (p - 0.5);
        while (tau < tau_max) {
            tau += 1.0;
            sim.advance_to(std::exp(tau));
            const double cur = lagrange6(sim.profile(), sim.xi_grid(), y);
            const bool done = std::abs(cur - prev) < 1e-8 * std::abs(cur);
            prev = cur;
            if (done) break;
        }
        out.long_run = std::max(0.0, prev);
    }
    return out;
}

double thm2_rhs(double alpha, double cee, double y, const std::vector<double>& thetas,
                const PdeSettings& settings) {
    return theta_ladder(alpha, cee, Preset::zero(), y, thetas, settings, false).fit.limit;
}

double self_similarity_defect(double alpha, double cee, const std::vector<double>& rs,
                              const std::vector<double>& thetas, const PdeSettings& settings) {
    if (thetas.size() < 3) throw ParameterError("self-similarity check needs >= 3 theta values");
    const double p = 1.0 / (alpha - 1.0);
    const Grid1D grid = settings.grid();
    std::vector<double> times(rs);
    times.push_back(1.0);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    if (times.front() <= 0.0 || times.back() > 1.0) throw ParameterError("self-similarity times must lie in (0, 1]");

    const std::size_t n = thetas.size();
    const std::vector<double> top{thetas[n - 3], thetas[n - 2], thetas[n - 1]};
    // samples[k][j] = v_{theta_k}(times[j], grid)
    std::vector<std::vector<std::vector<double>>> samples(3);
    for (std::size_t k = 0; k < 3; ++k) {
        SimilaritySolver sim(alpha, cee, top[k], settings.similarity);
        for (double r : times) {
            sim.advance_to(r);
            samples[k].push_back(sim.sample(grid));
        }
    }
    const std::size_t j1 = times.size() - 1;
    const std::size_t mid = grid.points() / 2;
    const PowerLawFit fit = fit_power_tail(top, {samples[0][j1][mid], samples[1][j1][mid], samples[2][j1][mid]});
    const double c = std::pow(top[2], -fit.b) / (std::pow(top[1], -fit.b) - std::pow(top[2], -fit.b));
    auto extrapolate = [&](std::size_t j) {
        std::vector<double> v(grid.points());
        for (std::size_t i = 0; i < v.size(); ++i)
            v[i] = samples[2][j][i] + (samples[2][j][i] - samples[1][j][i]) * c;
        return v;
    };
    const std::vector<double> v1 = extrapolate(j1);
    const double scale = v1[mid];
    double defect = 0.0;
    for (double r : rs) {
        const std::size_t j = static_cast<std::size_t>(std::find(times.begin(), times.end(), r) - times.begin());
        const std::vector<double> vr = extrapolate(j);
        const double rp = std::pow(r, -p), rt = std::sqrt(r);
        for (std::size_t i = 0; i < grid.points(); ++i) {
            const double predicted = rp * lagrange6(v1, grid, grid.node(i) / rt);
            defect = std::max(defect, std::abs(vr[i] - predicted) / scale);
        }
    }
    return defect;
}

double Thm3Targets::vague_ratio() const { return 1.0 - local_mass / extinction; }

double Thm3Targets::weak_ratio() const { return (with_g - g_only) / extinction; }

Thm3Targets thm3_targets(double alpha, double cee, const Preset& f, const Preset& g, double y,
                         const std::vector<double>& thetas, const PdeSettings& settings) {
    if (!f.compact_support()) throw ParameterError("thm3_targets: f must have compact support");
    Thm3Targets out;
    out.extinction = thm2_rhs(alpha, cee, y, thetas, settings);
    out.local_mass = f.is_zero() ? 0.0 : thm1_rhs(alpha, cee, Preset::zero(), f.integral(), y, settings);
    out.with_g = g.is_zero() ? out.extinction : theta_ladder(alpha, cee, g, y, thetas, settings, false).fit.limit;
    out.g_only = thm1_rhs(alpha, cee, g, 0.0, y, settings);
    return out;
}

}  // namespace branchlab
