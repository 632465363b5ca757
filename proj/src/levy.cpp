#include "branchlab/levy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "branchlab/error.hpp"
#include "branchlab/fft.hpp"

namespace branchlab {

namespace {

constexpr double kVarianceTolerance = 1e-12;
// exp(-32.3) < 1e-14: the characteristic function is negligible past the Nyquist frequency.
constexpr double kResolvedExponent = 32.3;
constexpr double kAliasMass = 1e-8;
constexpr int kJumpAliases = 1000;

double sinc(double x) {
    if (std::abs(x) < 1e-4) return 1.0 - x * x / 6.0;
    return std::sin(x) / x;
}

double normal_density(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

// Brownian piece of duration tau ending at d: max is exact given d.
double bridge_max(double d, double tau, double sigma, double u) {
    return 0.5 * (d + std::sqrt(d * d - 2.0 * tau * sigma * sigma * std::log(u)));
}

void segment_impl(const LevyDriver& drv, double duration, Rng& rng, bool extremes, double& x,
                  double& mx, double& mn, std::vector<std::pair<double, double>>* skeleton) {
    x = mx = mn = 0.0;
    if (duration <= 0.0) return;
    const double sigma = drv.sigma();
    auto brownian_piece = [&](double tau) {
        if (sigma == 0.0 || tau <= 0.0) return;
        const double d = sigma * std::sqrt(tau) * rng.normal();
        if (extremes) {
            mx = std::max(mx, x + bridge_max(d, tau, sigma, rng.uniform_open()));
            mn = std::min(mn, x - bridge_max(-d, tau, sigma, rng.uniform_open()));
        }
        x += d;
    };
    if (drv.jump_rate() == 0.0) {
        brownian_piece(duration);
        return;
    }
    double elapsed = 0.0;
    for (;;) {
        const double gap = rng.exponential(drv.jump_rate());
        if (gap >= duration - elapsed) {
            brownian_piece(duration - elapsed);
            return;
        }
        brownian_piece(gap);
        elapsed += gap;
        const double jump = drv.jump_half_width() * (2.0 * rng.uniform_open() - 1.0);
        x += jump;
        if (skeleton) skeleton->emplace_back(elapsed, jump);
        mx = std::max(mx, x);
        mn = std::min(mn, x);
    }
}

}  // namespace

std::string to_string(DriverKind kind) {
    switch (kind) {
        case DriverKind::brownian: return "brownian";
        case DriverKind::compound_poisson: return "compound_poisson";
        case DriverKind::jump_diffusion: return "jump_diffusion";
    }
    return "unknown";
}

DriverKind driver_kind_from_string(const std::string& name) {
    if (name == "brownian") return DriverKind::brownian;
    if (name == "compound_poisson") return DriverKind::compound_poisson;
    if (name == "jump_diffusion") return DriverKind::jump_diffusion;
    throw ParameterError("unknown driver kind '" + name + "'");
}

LevyDriver LevyDriver::brownian() { return make_driver({DriverKind::brownian, 1.0, 0.0, 0.0}); }

LevyDriver LevyDriver::compound_poisson() {
    return make_driver({DriverKind::compound_poisson, 0.0, 1.0, std::sqrt(3.0)});
}

LevyDriver LevyDriver::jump_diffusion() {
    return make_driver({DriverKind::jump_diffusion, std::sqrt(0.5), 1.0, std::sqrt(1.5)});
}

double LevyDriver::variance() const noexcept {
    return sigma_ * sigma_ + jump_rate_ * half_width_ * half_width_ / 3.0;
}

bool LevyDriver::satisfies_h4_prime(double alpha) const noexcept {
    return moment_order() > 2.0 * alpha / (alpha - 1.0);
}

double LevyDriver::exponent(double u) const noexcept {
    double value = 0.5 * sigma_ * sigma_ * u * u;
    if (jump_rate_ > 0.0) value += jump_rate_ * (1.0 - sinc(half_width_ * u));
    return value;
}

LevyDriver LevyDriver::scaled(double t) const {
    if (!(t > 0.0)) throw ParameterError("driver scaling needs t > 0");
    return LevyDriver(kind_, sigma_, jump_rate_ * t, half_width_ / std::sqrt(t));
}

double LevyDriver::displacement(double duration, Rng& rng) const {
    if (duration <= 0.0) return 0.0;
    double x = 0.0;
    if (sigma_ > 0.0) x = sigma_ * std::sqrt(duration) * rng.normal();
    if (jump_rate_ > 0.0) {
        for (double clock = rng.exponential(jump_rate_); clock < duration;
             clock += rng.exponential(jump_rate_))
            x += half_width_ * (2.0 * rng.uniform_open() - 1.0);
    }
    return x;
}

void LevyDriver::displacement_with_extremes(double duration, Rng& rng, double& displacement,
                                            double& path_max, double& path_min) const {
    segment_impl(*this, duration, rng, true, displacement, path_max, path_min, nullptr);
}

LevyDriver make_driver(const DriverSpec& spec) {
    if (!(spec.sigma >= 0.0 && spec.jump_rate >= 0.0 && spec.jump_half_width >= 0.0))
        throw ParameterError("driver: sigma, jump rate and jump half width must be >= 0");
    if (spec.jump_rate > 0.0 && spec.jump_law != "uniform") {
        if (spec.jump_law == "two_point" || spec.jump_law == "lattice")
            throw ParameterError("driver: lattice jump law '" + spec.jump_law +
                                 "' rejected (xi_1 must be non-lattice)");
        throw ParameterError("driver: unknown jump law '" + spec.jump_law + "'");
    }
    switch (spec.kind) {
        case DriverKind::brownian:
            if (spec.jump_rate != 0.0) throw ParameterError("brownian driver cannot have jumps");
            break;
        case DriverKind::compound_poisson:
            if (spec.sigma != 0.0 || spec.jump_rate == 0.0 || spec.jump_half_width == 0.0)
                throw ParameterError("compound_poisson driver needs sigma = 0 and a jump part");
            break;
        case DriverKind::jump_diffusion:
            if (spec.sigma == 0.0 || spec.jump_rate == 0.0 || spec.jump_half_width == 0.0)
                throw ParameterError("jump_diffusion driver needs both sigma and a jump part");
            break;
    }
    LevyDriver d(spec.kind, spec.sigma, spec.jump_rate, spec.jump_half_width);
    if (std::abs(d.variance() - 1.0) > kVarianceTolerance)
        throw ParameterError("driver: Var xi_1 = " + std::to_string(d.variance()) + ", must be 1");
    return d;
}

SegmentSample sample_segment(const LevyDriver& driver, double duration, Rng& rng,
                             bool want_extremes) {
    if (!(duration >= 0.0)) throw DomainError("sample_segment: duration must be >= 0");
    SegmentSample seg;
    seg.duration = duration;
    segment_impl(driver, duration, rng, want_extremes, seg.displacement, seg.path_max,
                 seg.path_min, driver.jump_rate() > 0.0 ? &seg.jump_skeleton : nullptr);
    if (!want_extremes) {
        seg.path_max = std::max(0.0, seg.displacement);
        seg.path_min = std::min(0.0, seg.displacement);
    }
    return seg;
}

namespace {

// DFT of the hat-averaged jump law J_k = E Lambda(U/dy - k), U uniform on [-a, a].
double jump_symbol(double w0, double a, double dy) {
    const double sin_half = std::sin(0.5 * w0);
    double acc = 0.0;
    for (int m = -kJumpAliases; m <= kJumpAliases; ++m) {
        const double w = w0 + 2.0 * std::numbers::pi * m;
        const double fejer = w == 0.0 ? 1.0 : sin_half * sin_half / (0.25 * w * w);
        acc += fejer * sinc(a * w / dy);
    }
    return acc;
}

SemigroupKernel finish_kernel(SemigroupKernel k, std::vector<std::complex<double>> hat, double s,
                              const LevyDriver& driver, const Grid1D& grid, bool repair) {
    const std::size_t n = grid.points();
    const std::size_t p = 2 * n;
    RealFft fft(p);
    std::vector<double> w = fft.inverse(hat);
    for (auto& x : w) x /= static_cast<double>(p);
    const std::size_t half = n / 2;
    k.band_nodes = static_cast<std::size_t>(std::ceil(8.0 * std::sqrt(s * driver.variance()) / grid.spacing()));
    if (k.band_nodes >= half)
        throw GridError("semigroup: grid half width below the required 8 sqrt(s) padding");
    if (!repair) {
        k.spectrum = std::move(hat);
        k.weights = std::move(w);
        return k;
    }
    for (std::size_t i = 0; i < p; ++i) {
        const std::size_t dist = i <= n ? i : p - i;
        if (dist > half) {
            k.outer_mass += std::abs(w[i]);
            w[i] = 0.0;
        } else if (w[i] < 0.0) {
            w[i] = 0.0;
        }
    }
    if (k.outer_mass > kAliasMass)
        throw GridError("semigroup: transition kernel mass " + std::to_string(k.outer_mass) +
                        " beyond the grid half width (aliasing); widen the grid");
    k.spectrum = fft.forward(w);
    k.weights = std::move(w);
    return k;
}

}  // namespace

SemigroupKernel semigroup_kernel(const LevyDriver& driver, double s, const Grid1D& grid) {
    if (!(s > 0.0)) throw DomainError("semigroup: s must be positive");
    const std::size_t n = grid.points();
    const std::size_t p = 2 * n;
    const double dy = grid.spacing();
    const double pi = std::numbers::pi;
    const double sigma2 = driver.sigma() * driver.sigma();
    const double lambda = driver.jump_rate();
    const double a = driver.jump_half_width();

    SemigroupKernel k;
    std::vector<std::complex<double>> hat(p / 2 + 1);
    if (sigma2 > 0.0 && 0.5 * s * sigma2 * (pi / dy) * (pi / dy) >= kResolvedExponent) {
        k.kind = KernelKind::trapezoid;
        for (std::size_t j = 0; j <= p / 2; ++j) {
            const double u = 2.0 * pi * static_cast<double>(j) / (static_cast<double>(p) * dy);
            hat[j] = std::exp(-s * driver.exponent(u));
        }
    } else if (sigma2 > 0.0) {
        // Generator: sigma^2/2 times the 3-point Laplacian plus jumps landing
        // on the grid through hat weights.
        k.kind = KernelKind::lattice;
        for (std::size_t j = 0; j <= p / 2; ++j) {
            const double w0 = 2.0 * pi * static_cast<double>(j) / static_cast<double>(p);
            double rate = sigma2 * (1.0 - std::cos(w0)) / (dy * dy);
            if (lambda > 0.0) rate += lambda * (1.0 - jump_symbol(w0, a, dy));
            hat[j] = std::exp(-s * rate);
        }
    } else {
        // Hat-function weights E Lambda(xi_s/dy - k): Fourier series whose
        // symbol is the alias sum of sinc^2(w/2) phi(w/dy).
        k.kind = KernelKind::hat;
        const double lambda_s = lambda * s;
        k.atom = std::exp(-lambda_s);
        for (std::size_t j = 0; j <= p / 2; ++j) {
            const double w0 = 2.0 * pi * static_cast<double>(j) / static_cast<double>(p);
            const double sin_half = std::sin(0.5 * w0);
            double acc = 0.0;
            for (int m = -kJumpAliases; m <= kJumpAliases; ++m) {
                const double w = w0 + 2.0 * pi * m;
                const double fejer = w == 0.0 ? 1.0 : sin_half * sin_half / (0.25 * w * w);
                acc += fejer * k.atom * std::expm1(lambda_s * sinc(a * w / dy));
            }
            hat[j] = k.atom + acc;
        }
    }
    return finish_kernel(std::move(k), std::move(hat), s, driver, grid, true);
}

SemigroupKernel multiplier_kernel(const LevyDriver& driver, double s, const Grid1D& grid) {
    if (!(s > 0.0)) throw DomainError("semigroup: s must be positive");
    const std::size_t p = 2 * grid.points();
    const double dy = grid.spacing();
    SemigroupKernel k;
    k.kind = KernelKind::multiplier;
    std::vector<std::complex<double>> hat(p / 2 + 1);
    for (std::size_t j = 0; j <= p / 2; ++j) {
        const double u = 2.0 * std::numbers::pi * static_cast<double>(j) / (static_cast<double>(p) * dy);
        hat[j] = std::exp(-s * driver.exponent(u));
    }
    return finish_kernel(std::move(k), std::move(hat), s, driver, grid, false);
}

std::vector<double> semigroup_apply(const SemigroupKernel& kernel, const std::vector<double>& f,
                                    const Grid1D& grid) {
    const std::size_t n = grid.points();
    if (f.size() != n) throw ParameterError("semigroup: function does not match the grid");
    if (kernel.weights.size() != 2 * n) throw ParameterError("semigroup: kernel built for another grid");

    double scale = 1.0;
    bool nonnegative = true;
    for (double x : f) {
        scale = std::max(scale, std::abs(x));
        nonnegative = nonnegative && x >= 0.0;
    }
    const double tol = 1e-9 * scale;
    for (std::size_t i = 0; i < kernel.band_nodes; ++i)
        if (std::abs(f[i] - f.front()) > tol || std::abs(f[n - 1 - i] - f.back()) > tol)
            throw GridError("semigroup: insufficient grid padding (function not constant within "
                            "8 sqrt(s) of the grid edge)");

    std::vector<double> ext(2 * n);
    std::copy(f.begin(), f.end(), ext.begin());
    std::fill(ext.begin() + static_cast<std::ptrdiff_t>(n),
              ext.begin() + static_cast<std::ptrdiff_t>(n + n / 2), f.back());
    std::fill(ext.begin() + static_cast<std::ptrdiff_t>(n + n / 2), ext.end(), f.front());

    RealFft fft(2 * n);
    auto spec = fft.forward(ext);
    for (std::size_t j = 0; j < spec.size(); ++j) spec[j] *= kernel.spectrum[j];
    auto out = fft.inverse(spec);
    out.resize(n);
    const double norm = 1.0 / static_cast<double>(2 * n);
    for (auto& x : out) {
        x *= norm;
        if (nonnegative && x < 0.0) x = 0.0;
    }
    return out;
}

std::vector<double> semigroup_apply(const LevyDriver& driver, double s,
                                    const std::vector<double>& f, const Grid1D& grid) {
    if (s == 0.0) return f;
    return semigroup_apply(semigroup_kernel(driver, s, grid), f, grid);
}

double llt_error(const LevyDriver& driver, double t, const std::vector<double>& h,
                 const Grid1D& grid) {
    if (!(t > 0.0)) throw DomainError("llt_error: t must be positive");
    const double mass = grid_integral(grid, h);
    const auto ph = semigroup_apply(driver, t, h, grid);
    const double rt = std::sqrt(t);
    double sup = 0.0;
    for (std::size_t i = 0; i < grid.points(); ++i)
        sup = std::max(sup, std::abs(rt * ph[i] - mass * normal_density(grid.node(i) / rt)));
    return sup;
}

}  // namespace branchlab
