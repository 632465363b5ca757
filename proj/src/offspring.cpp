#include "branchlab/offspring.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/numeric/odeint.hpp>

#include "branchlab/error.hpp"

namespace branchlab {

namespace {

// ln Gamma(x + a) - ln Gamma(x + b) for x + a > 0, x + b > 0. For large x the
// direct lgamma difference loses digits, so switch to the asymptotic series.
double log_gamma_ratio(double x, double a, double b) {
    if (x < 1.0e3) return std::lgamma(x + a) - std::lgamma(x + b);
    auto bern2 = [](double z) { return z * z - z + 1.0 / 6.0; };
    auto bern3 = [](double z) { return z * z * z - 1.5 * z * z + 0.5 * z; };
    auto bern4 = [](double z) { return z * z * z * z - 2.0 * z * z * z + z * z - 1.0 / 30.0; };
    const double inv = 1.0 / x;
    return (a - b) * std::log(x) + 0.5 * (bern2(a) - bern2(b)) * inv -
           (bern3(a) - bern3(b)) * inv * inv / 6.0 +
           (bern4(a) - bern4(b)) * inv * inv * inv / 12.0;
}

// Coefficients a_k of (1-s)^alpha, k = 0..K.
std::vector<double> power_coefficients(double alpha, std::int64_t k_max) {
    std::vector<double> a(static_cast<std::size_t>(k_max) + 1);
    a[0] = 1.0;
    for (std::int64_t k = 1; k <= k_max; ++k)
        a[k] = a[k - 1] * (static_cast<double>(k - 1) - alpha) / static_cast<double>(k);
    return a;
}

constexpr double kMassTolerance = 1e-12;
constexpr double kTailMeanTolerance = 1e-9;

}  // namespace

OffspringLaw OffspringLaw::slack(double alpha, double c) {
    if (!(alpha > 1.0 && alpha <= 2.0))
        throw ParameterError("slack offspring: alpha must lie in (1, 2]");
    if (!(c > 0.0 && c <= 1.0 / alpha))
        throw ParameterError("slack offspring: c must lie in (0, 1/alpha]");

    OffspringLaw law;
    law.family_ = OffspringFamily::slack;
    law.alpha_ = alpha;
    law.c_ = c;
    law.pure_power_ = true;
    if (alpha == 2.0) {
        law.cutoff_ = 2;
        law.probs_ = {c, 1.0 - 2.0 * c, c};
        law.tail_weight_ = 0.0;
    } else {
        law.cutoff_ = kDefaultCutoff;
        law.probs_ = power_coefficients(alpha, law.cutoff_);
        for (auto& p : law.probs_) p *= c;
        law.probs_[0] = c;
        law.probs_[1] = 1.0 - c * alpha;
        law.tail_weight_ = c;
    }
    law.build_prefix_tails();
    if (alpha < 2.0) law.tails_[1] = 1.0 - c;
    return law;
}

OffspringLaw OffspringLaw::vector(std::vector<double> probabilities,
                                  std::optional<double> tail_exponent) {
    if (probabilities.size() < 2)
        throw ParameterError("vector offspring: need at least p_0 and p_1");
    if (probabilities.size() > static_cast<std::size_t>(kDefaultCutoff) + 1)
        throw ParameterError("vector offspring: more than 2^16 + 1 explicit probabilities");
    for (double p : probabilities)
        if (!(p >= 0.0 && std::isfinite(p)))
            throw ParameterError("vector offspring: probabilities must be finite and >= 0");
    if (!(probabilities[1] < 1.0))
        throw ParameterError("vector offspring: p_1 must be < 1");

    OffspringLaw law;
    law.family_ = OffspringFamily::vector;
    const double prefix_mass = std::accumulate(probabilities.begin(), probabilities.end(), 0.0);

    if (!tail_exponent) {
        while (probabilities.size() > 2 && probabilities.back() == 0.0) probabilities.pop_back();
        law.alpha_ = 2.0;
        law.cutoff_ = static_cast<std::int64_t>(probabilities.size()) - 1;
        law.probs_ = std::move(probabilities);
        law.tail_weight_ = 0.0;
        if (std::abs(prefix_mass - 1.0) > kMassTolerance)
            throw ParameterError("vector offspring: probabilities sum to " +
                                 std::to_string(prefix_mass) + ", not 1");
        double mean = 0.0;
        for (std::size_t k = 0; k < law.probs_.size(); ++k)
            mean += static_cast<double>(k) * law.probs_[k];
        if (std::abs(mean - 1.0) > kMassTolerance)
            throw ParameterError("vector offspring: mean " + std::to_string(mean) +
                                 " is not 1 (law is not critical)");
        law.pure_power_ = law.cutoff_ <= 2;
        law.c_ = 0.0;
        law.build_prefix_tails();
        return law;
    }

    const double alpha = *tail_exponent;
    if (!(alpha > 1.0 && alpha < 2.0))
        throw ParameterError("vector offspring: tail_exponent must lie in (1, 2)");
    const double tail_mass = 1.0 - prefix_mass;
    if (!(tail_mass > 0.0))
        throw ParameterError("vector offspring: power tail needs prefix mass < 1");
    law.alpha_ = alpha;
    law.cutoff_ = static_cast<std::int64_t>(probabilities.size()) - 1;
    law.probs_ = std::move(probabilities);
    law.tail_weight_ = tail_mass / law.shape_tail(law.cutoff_ + 1);
    law.c_ = law.tail_weight_;
    law.pure_power_ = false;
    law.build_prefix_tails();
    const double mean = law.mean();
    if (std::abs(mean - 1.0) > kTailMeanTolerance)
        throw ParameterError("vector offspring: mean " + std::to_string(mean) +
                             " is not 1 (law is not critical)");
    return law;
}

// Backward accumulation keeps the small tails accurate.
void OffspringLaw::build_prefix_tails() {
    const auto k = static_cast<std::size_t>(cutoff_);
    tails_.assign(k + 2, 0.0);
    tails_[k + 1] = finite_support() ? 0.0 : tail_weight_ * shape_tail(cutoff_ + 1);
    for (std::size_t n = k + 1; n-- > 0;) tails_[n] = tails_[n + 1] + probs_[n];
    tails_[0] = 1.0;

    excess_.clear();
    if (finite_support()) {
        excess_.assign(k + 3, 0.0);
        for (std::size_t m = k + 2; m-- > 0;) excess_[m] = excess_[m + 1] + tails_[m];
    }
}

double OffspringLaw::shape_tail(std::int64_t n) const {
    // S_n = -(-1)^m binom(alpha-1, m), m = n-1 >= 1.
    const double gamma = alpha_ - 1.0;
    const double m = static_cast<double>(n - 1);
    return std::exp(log_gamma_ratio(m, -gamma, 1.0) - std::lgamma(-gamma));
}

double OffspringLaw::kappa() const {
    if (alpha_ >= 2.0)
        throw DomainError("kappa is undefined for alpha = 2 (finite-variance regime)");
    return tail_weight_ * std::exp(-std::lgamma(1.0 - alpha_));
}

double OffspringLaw::sigma2() const {
    if (alpha_ < 2.0) throw DomainError("sigma2 is undefined for alpha < 2");
    double s = 0.0;
    for (std::size_t k = 0; k < probs_.size(); ++k)
        s += static_cast<double>(k) * static_cast<double>(k) * probs_[k];
    return s - 1.0;
}

double OffspringLaw::prob(std::int64_t k) const {
    if (k < 0) return 0.0;
    if (k <= cutoff_) return probs_[static_cast<std::size_t>(k)];
    if (finite_support()) return 0.0;
    const double kd = static_cast<double>(k);
    return tail_weight_ * std::exp(log_gamma_ratio(kd, -alpha_, 1.0) - std::lgamma(-alpha_));
}

double OffspringLaw::tail(std::int64_t n) const {
    if (n <= 0) return 1.0;
    if (n <= cutoff_ + 1) return tails_[static_cast<std::size_t>(n)];
    if (finite_support()) return 0.0;
    return tail_weight_ * shape_tail(n);
}

double OffspringLaw::mean() const {
    double s = 0.0;
    for (std::size_t n = 1; n < tails_.size(); ++n) s += tails_[n];
    if (!finite_support()) {
        // sum_{n >= K+2} S_n = Gamma(K+2-alpha) / (Gamma(2-alpha) Gamma(K+1))
        const double kd = static_cast<double>(cutoff_);
        s += tail_weight_ *
             std::exp(log_gamma_ratio(kd, 2.0 - alpha_, 1.0) - std::lgamma(2.0 - alpha_));
    }
    return s;
}

double OffspringLaw::total_mass() const {
    return std::accumulate(probs_.begin(), probs_.end(), 0.0) + tails_.back();
}

double OffspringLaw::generating(double s) const {
    if (!(s >= 0.0 && s <= 1.0)) throw DomainError("generating function needs s in [0, 1]");
    if (family_ == OffspringFamily::slack) return s + c_ * std::pow(1.0 - s, alpha_);
    double acc = 0.0;
    for (std::size_t k = probs_.size(); k-- > 0;) acc = acc * s + probs_[k];
    if (finite_support()) return acc;
    const auto a = power_coefficients(alpha_, cutoff_);
    double head = 0.0;
    for (std::size_t k = a.size(); k-- > 0;) head = head * s + a[k];
    return acc + tail_weight_ * (std::pow(1.0 - s, alpha_) - head);
}

double OffspringLaw::psi_unit(double v) const {
    if (v == 0.0) return 0.0;
    if (family_ == OffspringFamily::slack) return c_ * std::pow(v, alpha_);
    if (finite_support()) {
        // f(1-v) - (1-v) = v^2 sum_j (1-v)^j R_{j+2}: positive terms only.
        const double s = 1.0 - v;
        double acc = 0.0;
        for (std::size_t m = excess_.size(); m-- > 2;) acc = acc * s + excess_[m];
        return v * v * acc;
    }
    return std::max(0.0, generating(1.0 - v) - (1.0 - v));
}

std::int64_t OffspringLaw::inverse_tail(double v) const {
    if (!(v > 0.0 && v <= 1.0)) throw DomainError("inverse_tail: v must lie in (0, 1]");
    if (v <= tails_.back()) return sample_tail(v);
    std::size_t n = 1;
    for (; n < tails_.size() && n <= 8; ++n)
        if (tails_[n] < v) return static_cast<std::int64_t>(n) - 1;
    auto it = std::upper_bound(tails_.begin() + static_cast<std::ptrdiff_t>(n), tails_.end(), v,
                               [](double x, double t) { return x > t; });
    return static_cast<std::int64_t>(it - tails_.begin()) - 1;
}

std::int64_t OffspringLaw::sample(Rng& rng) const {
    const double v = rng.uniform_open();
    if (v > tails_.back()) return inverse_tail(v);
    // Conditionally on landing in the tail V is uniform on (0, T_{K+1}]; redraw
    // it at full resolution so the far tail is not cut off by 2^-53 granularity.
    return sample_tail(tails_.back() * rng.uniform_open());
}

std::int64_t OffspringLaw::sample_tail(double v) const {
    constexpr std::int64_t kLimit = std::int64_t{1} << 62;
    std::int64_t lo = cutoff_ + 1;
    const double guess = std::pow(kappa() / v, 1.0 / alpha_);
    std::int64_t hi = std::max<std::int64_t>(
        lo + 1, guess < 1e18 ? static_cast<std::int64_t>(2.0 * guess) : kLimit);
    while (tail(hi) >= v) {
        lo = hi;
        if (hi >= kLimit / 2) return kLimit;
        hi *= 2;
    }
    while (hi - lo > 1) {
        const std::int64_t mid = lo + (hi - lo) / 2;
        if (tail(mid) >= v) lo = mid;
        else hi = mid;
    }
    return lo;
}

std::string OffspringLaw::describe() const {
    std::ostringstream os;
    if (family_ == OffspringFamily::slack) {
        os << "slack(alpha=" << alpha_ << ", c=" << c_ << ")";
    } else {
        os << "vector(K=" << cutoff_;
        if (!finite_support()) os << ", tail_exponent=" << alpha_;
        os << ")";
    }
    return os.str();
}

void BranchingConfig::validate() const {
    if (!(branching_rate > 0.0 && std::isfinite(branching_rate)))
        throw ParameterError("branching rate must be positive and finite");
    if (event_cap < 1) throw ParameterError("event cap must be at least 1");
}

OffspringLaw make_slack_offspring(double alpha, double c) { return OffspringLaw::slack(alpha, c); }

double kappa_of(const OffspringLaw& law) { return law.kappa(); }

double psi(const OffspringLaw& law, double beta, double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("psi: v must lie in [0, 1]");
    return beta * law.psi_unit(v);
}

double psi_scaled(const OffspringLaw& law, double beta, double t, double v) {
    if (!(t > 0.0)) throw DomainError("psi_scaled: t must be positive");
    const long double p = 1.0L / (static_cast<long double>(law.alpha()) - 1.0L);
    const long double vmax = std::pow(static_cast<long double>(t), p);
    if (!(v >= 0.0) || static_cast<long double>(v) > vmax * (1.0L + 1e-12L))
        throw DomainError("psi_scaled: v must lie in [0, t^{1/(alpha-1)}]");
    const double u = std::min(1.0, static_cast<double>(static_cast<long double>(v) / vmax));
    return static_cast<double>(vmax * static_cast<long double>(t) *
                               static_cast<long double>(psi(law, beta, u)));
}

double cee_alpha(const OffspringLaw& law, double beta) {
    if (law.alpha() >= 2.0) return 0.5 * beta * law.sigma2();
    return beta * law.kappa() * std::tgamma(2.0 - law.alpha()) / (law.alpha() - 1.0);
}

double survival_constant(const OffspringLaw& law, double beta) {
    const double a = law.alpha();
    return std::pow((a - 1.0) * cee_alpha(law, beta), -1.0 / (a - 1.0));
}

// Integrates w = log u, w' = -psi(u)/u, so the absolute tolerance on w is a
// relative tolerance on u and the tiny late-time values stay accurate.
double survival_ode_numeric(const OffspringLaw& law, double beta, double t) {
    if (!(t >= 0.0)) throw DomainError("survival_ode: t must be >= 0");
    if (t == 0.0) return 1.0;
    namespace ode = boost::numeric::odeint;
    using State = std::array<double, 1>;
    State w{0.0};
    auto rhs = [&](const State& x, State& dx, double) {
        const double u = std::clamp(std::exp(x[0]), 0.0, 1.0);
        dx[0] = u > 0.0 ? -psi(law, beta, u) / u : 0.0;
    };
    ode::integrate_adaptive(
        ode::make_controlled(1e-10, 1e-10, ode::runge_kutta_dopri5<State>()), rhs, w, 0.0, t,
        std::min(1e-3, t));
    return std::exp(w[0]);
}

double survival_ode(const OffspringLaw& law, double beta, double t) {
    if (!(t >= 0.0)) throw DomainError("survival_ode: t must be >= 0");
    if (law.family() == OffspringFamily::slack) {
        const double a = law.alpha();
        return std::pow(1.0 + (a - 1.0) * beta * law.c() * t, -1.0 / (a - 1.0));
    }
    return survival_ode_numeric(law, beta, t);
}

std::int64_t sample_offspring(const OffspringLaw& law, Rng& rng) { return law.sample(rng); }

double calibrate_c_psi(const OffspringLaw& law, double beta, const std::vector<double>& t_grid,
                       int points_per_axis) {
    if (t_grid.empty() || points_per_axis < 2)
        throw ParameterError("calibrate_c_psi: need a nonempty t grid and >= 2 points");
    const double a = law.alpha();
    double sup = 0.0;
    for (double t : t_grid) {
        const double vmax = std::pow(t, 1.0 / (a - 1.0));
        std::vector<double> v, pv, pw;
        // Half the nodes log-spaced near 0, half uniform up to vmax.
        const int half = points_per_axis / 2;
        for (int i = 0; i < half; ++i)
            v.push_back(vmax * std::pow(1e-6, 1.0 - static_cast<double>(i) / half));
        for (int i = 0; i <= points_per_axis - half - 1; ++i)
            v.push_back(vmax * (i + 1) / static_cast<double>(points_per_axis - half));
        std::sort(v.begin(), v.end());
        v.back() = vmax;
        for (double x : v) {
            pv.push_back(psi_scaled(law, beta, t, x));
            pw.push_back(std::pow(x, a - 1.0));
            sup = std::max(sup, pv.back() / std::pow(x, a));
        }
        for (std::size_t i = 0; i < v.size(); ++i)
            for (std::size_t j = i + 1; j < v.size(); ++j)
                sup = std::max(sup, std::abs(pv[j] - pv[i]) / ((pw[i] + pw[j]) * (v[j] - v[i])));
    }
    return 1.05 * sup;
}

}  // namespace branchlab
