#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "branchlab/rng.hpp"

namespace branchlab {

enum class OffspringFamily { slack, vector };

// Critical offspring distribution {p_k}. Either the Slack family with
// generating function f(s) = s + c(1-s)^alpha, or an explicit vector
// p_0..p_K that is finite-support (alpha = 2) or continued beyond K by the
// Slack power tail p_k = w * (-1)^k binom(alpha, k).
//
// Immutable after construction; share freely between threads.
class OffspringLaw {
public:
    static constexpr std::int64_t kDefaultCutoff = 1 << 16;

    static OffspringLaw slack(double alpha, double c);
    static OffspringLaw vector(std::vector<double> probabilities,
                               std::optional<double> tail_exponent = std::nullopt);

    OffspringFamily family() const noexcept { return family_; }
    double alpha() const noexcept { return alpha_; }
    // Slack coefficient; for vector laws the power-tail weight w (0 if finite).
    double c() const noexcept { return c_; }
    bool finite_support() const noexcept { return tail_weight_ == 0.0; }
    std::int64_t cutoff() const noexcept { return cutoff_; }

    // kappa(alpha) = lim n^alpha P(N >= n). Throws DomainError when alpha == 2.
    double kappa() const;
    // Sum k^2 p_k - 1. Throws DomainError when alpha < 2.
    double sigma2() const;

    double prob(std::int64_t k) const;
    // P(N >= n).
    double tail(std::int64_t n) const;
    double mean() const;
    double total_mass() const;
    // f(s) = E s^N on [0, 1].
    double generating(double s) const;

    // psi(v) / beta = f(1-v) - (1-v), evaluated without cancellation where possible.
    double psi_unit(double v) const;

    // True when psi(v) = const * v^alpha exactly (Slack laws, and vectors
    // supported on {0,1,2}).
    bool pure_power() const noexcept { return pure_power_; }

    // Exact draw: inverse CDF over the prefix, exact inversion of the tail beyond it.
    std::int64_t sample(Rng& rng) const;
    // max{n : P(N >= n) >= v} for v in (0, 1]; N = inverse_tail(U) is exact in law.
    std::int64_t inverse_tail(double v) const;

    std::string describe() const;

private:
    OffspringLaw() = default;
    void build_prefix_tails();
    double shape_tail(std::int64_t n) const;  // S_n: Slack unit tail, n >= 2
    std::int64_t sample_tail(double v) const;

    OffspringFamily family_ = OffspringFamily::slack;
    double alpha_ = 2.0;
    double c_ = 0.5;
    double tail_weight_ = 0.0;
    std::int64_t cutoff_ = 0;
    std::vector<double> probs_;   // p_0..p_cutoff
    std::vector<double> tails_;   // P(N >= n), n = 0..cutoff+1
    std::vector<double> excess_;  // R_m = sum_{n >= m} P(N >= n), finite support only
    bool pure_power_ = false;
};

struct BranchingConfig {
    OffspringLaw offspring;
    double branching_rate = 1.0;
    std::uint64_t event_cap = 100'000'000;

    void validate() const;
};

OffspringLaw make_slack_offspring(double alpha, double c);

double kappa_of(const OffspringLaw& law);

// psi(v) = beta (sum_k p_k (1-v)^k - (1-v)), v in [0, 1].
double psi(const OffspringLaw& law, double beta, double v);

// psi^{(t)}(v) = t^{alpha/(alpha-1)} psi(v t^{-1/(alpha-1)}), v in [0, t^{1/(alpha-1)}].
double psi_scaled(const OffspringLaw& law, double beta, double t, double v);

// Coefficient of the limiting branching mechanism lambda -> cee * lambda^alpha.
double cee_alpha(const OffspringLaw& law, double beta);

// C(alpha) = lim t^{1/(alpha-1)} P(survive to t) = ((alpha-1) cee)^{-1/(alpha-1)}.
double survival_constant(const OffspringLaw& law, double beta);

// u(t) with u' = -psi(u), u(0) = 1: probability that the population is alive at t.
// Closed form for Slack laws, adaptive Dormand-Prince otherwise.
double survival_ode(const OffspringLaw& law, double beta, double t);
// Always integrates numerically (used to cross-check the closed form).
double survival_ode_numeric(const OffspringLaw& law, double beta, double t);

std::int64_t sample_offspring(const OffspringLaw& law, Rng& rng);

// 1.05 x the supremum over a (u, v, t) grid of the Lipschitz ratio
// |psi_t(u) - psi_t(v)| / ((u^{a-1} + v^{a-1}) |u - v|) and of psi_t(v) / v^a.
double calibrate_c_psi(const OffspringLaw& law, double beta,
                       const std::vector<double>& t_grid, int points_per_axis = 120);

}  // namespace branchlab
