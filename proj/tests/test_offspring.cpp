#include "doctest.h"

#include <cmath>
#include <vector>

#include "branchlab/error.hpp"
#include "branchlab/offspring.hpp"

using namespace branchlab;

namespace {

// n^{1.5} P(N >= n) at n = 1e6 for Slack(1.5, 0.5), from an independent
// brute-force summation of the coefficient recursion (frozen).
constexpr double kKappaProxy1e6 = 0.14104766035124;

double direct_series_psi(const OffspringLaw& law, double v, std::int64_t terms) {
    double acc = 0.0;
    double power = 1.0;
    for (std::int64_t k = 0; k < terms; ++k) {
        acc += law.prob(k) * power;
        power *= 1.0 - v;
    }
    return acc - (1.0 - v);
}

// Critical law on {0,..,3} with a small third factorial moment.
OffspringLaw small_skew_vector() { return OffspringLaw::vector({0.25, 0.505, 0.24, 0.005}); }

}  // namespace

TEST_CASE("slack law coefficients") {
    const auto binary = make_slack_offspring(2.0, 0.5);
    CHECK(binary.prob(0) == doctest::Approx(0.5));
    CHECK(binary.prob(1) == doctest::Approx(0.0));
    CHECK(binary.prob(2) == doctest::Approx(0.5));
    CHECK(binary.prob(3) == 0.0);
    CHECK(binary.sigma2() == doctest::Approx(1.0));

    const auto s = make_slack_offspring(1.5, 0.5);
    CHECK(s.prob(0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s.prob(1) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(s.prob(2) == doctest::Approx(0.1875).epsilon(1e-15));

    for (double alpha : {1.1, 1.3, 1.5, 1.8, 2.0})
        for (double frac : {0.1, 0.5, 1.0}) {
            const auto law = make_slack_offspring(alpha, frac / alpha);
            CHECK(law.mean() == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(law.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(law.prob(1) < 1.0);
            for (std::int64_t k : {2, 3, 10, 1000, 65536, 65537, 100000, 10000000})
                CHECK(law.prob(k) >= 0.0);
        }
}

TEST_CASE("slack parameter validation") {
    CHECK_THROWS_AS(make_slack_offspring(1.0, 0.5), ParameterError);
    CHECK_THROWS_AS(make_slack_offspring(2.5, 0.3), ParameterError);
    CHECK_THROWS_AS(make_slack_offspring(1.5, 0.0), ParameterError);
    CHECK_THROWS_AS(make_slack_offspring(1.5, 0.7), ParameterError);
    CHECK_NOTHROW(make_slack_offspring(1.5, 1.0 / 1.5));
}

TEST_CASE("tail is continuous across the prefix cutoff") {
    const auto law = make_slack_offspring(1.5, 0.5);
    const auto k = law.cutoff();
    for (std::int64_t n = k - 3; n <= k + 4; ++n) {
        CHECK(law.tail(n) - law.tail(n + 1) == doctest::Approx(law.prob(n)).epsilon(1e-9));
    }
}

TEST_CASE("kappa against the brute-force oracle") {
    const auto law = make_slack_offspring(1.5, 0.5);
    const double n = 1e6;
    CHECK(std::pow(n, 1.5) * law.tail(1000000) == doctest::Approx(kKappaProxy1e6).epsilon(1e-9));
    CHECK(kappa_of(law) == doctest::Approx(kKappaProxy1e6).epsilon(1e-5));
    for (double m : {1e3, 1e4, 1e5}) {
        const double proxy = std::pow(m, 1.5) * law.tail(static_cast<std::int64_t>(m));
        CHECK(std::abs(proxy / kappa_of(law) - 1.0) < 0.05);
    }
    // linear in c
    CHECK(kappa_of(make_slack_offspring(1.5, 0.25)) == doctest::Approx(0.5 * kappa_of(law)));
    CHECK_THROWS_AS(kappa_of(make_slack_offspring(2.0, 0.5)), DomainError);
}

TEST_CASE("psi values and closed forms") {
    const auto binary = make_slack_offspring(2.0, 0.5);
    CHECK(psi(binary, 1.0, 0.2) == doctest::Approx(0.02));
    CHECK(psi(binary, 1.0, 0.0) == 0.0);
    CHECK(psi(binary, 1.0, 1.0) == doctest::Approx(0.5));
    CHECK_THROWS_AS(psi(binary, 1.0, 1.5), DomainError);
    CHECK_THROWS_AS(psi(binary, 1.0, -0.1), DomainError);

    const auto s = make_slack_offspring(1.5, 0.5);
    for (double v = 0.05; v <= 1.0; v += 0.05) {
        const double series = direct_series_psi(s, v, 100000);
        CHECK(series == doctest::Approx(0.5 * std::pow(v, 1.5)).epsilon(1e-9));
        CHECK(psi(s, 2.0, v) == doctest::Approx(std::pow(v, 1.5)));
    }
    CHECK(psi(s, 1.0, 1.0) == doctest::Approx(s.prob(0)));

    const auto vec = small_skew_vector();
    for (double v : {0.0, 0.001, 0.3, 0.77, 1.0})
        CHECK(psi(vec, 1.0, v) == doctest::Approx(direct_series_psi(vec, v, 4)).epsilon(1e-12));
    CHECK(psi(vec, 1.0, 1.0) == doctest::Approx(0.25));
}

TEST_CASE("psi is nonnegative on a dense grid") {
    const std::vector<OffspringLaw> laws = {
        make_slack_offspring(2.0, 0.5), make_slack_offspring(1.5, 0.5), make_slack_offspring(1.2, 0.8),
        small_skew_vector(), OffspringLaw::vector({0.5, 0.25, 0.0, 0.25})};
    for (const auto& law : laws)
        for (int i = 0; i <= 10000; ++i) CHECK(psi(law, 1.0, i / 10000.0) >= 0.0);
}

TEST_CASE("psi_scaled") {
    const auto binary = make_slack_offspring(2.0, 0.5);
    CHECK(psi_scaled(binary, 1.0, 4.0, 1.0) == doctest::Approx(0.5));
    CHECK(psi_scaled(binary, 1.0, 4.0, 0.0) == 0.0);
    CHECK_THROWS_AS(psi_scaled(binary, 1.0, 4.0, 4.5), DomainError);

    for (double alpha : {1.5, 2.0}) {
        const auto law = make_slack_offspring(alpha, 0.4);
        for (double t : {1.0, 10.0, 100.0})
            for (double v : {0.0, 0.3, 0.8, 1.0})
                CHECK(psi_scaled(law, 1.5, t, v) ==
                      doctest::Approx(1.5 * 0.4 * std::pow(v, alpha)).epsilon(1e-12));
    }
}

TEST_CASE("psi_scaled converges uniformly to cee v^alpha") {
    for (const auto& law : {small_skew_vector(), OffspringLaw::vector({0.3, 0.45, 0.2, 0.05})}) {
        const double cee = cee_alpha(law, 1.0);
        double previous = 1e300;
        for (double t : {10.0, 100.0, 1000.0}) {
            double worst = 0.0;
            for (int i = 0; i <= 1000; ++i) {
                const double v = 10.0 * i / 1000.0;
                worst = std::max(worst, std::abs(psi_scaled(law, 1.0, t, v) - cee * v * v));
            }
            CHECK(worst < previous);
            previous = worst;
        }
        if (law.prob(3) < 0.01) CHECK(previous < 1e-2);
    }
    const auto s = make_slack_offspring(1.5, 0.5);
    for (double t : {10.0, 100.0, 1000.0})
        for (double v : {0.5, 5.0, 10.0})
            CHECK(std::abs(psi_scaled(s, 1.0, t, v) - 0.5 * std::pow(v, 1.5)) < 1e-12);
}

TEST_CASE("cee and survival constants") {
    const auto binary = make_slack_offspring(2.0, 0.5);
    CHECK(cee_alpha(binary, 1.0) == doctest::Approx(0.5));
    CHECK(cee_alpha(binary, 2.0) == doctest::Approx(1.0));
    CHECK(survival_constant(binary, 1.0) == doctest::Approx(2.0));

    const auto s = make_slack_offspring(1.5, 0.5);
    // kappa Gamma(2 - alpha) / (alpha - 1) with the frozen kappa proxy
    CHECK(cee_alpha(s, 1.0) == doctest::Approx(kKappaProxy1e6 * std::tgamma(0.5) / 0.5).epsilon(1e-5));
    CHECK(cee_alpha(s, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(cee_alpha(s, 3.0) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(cee_alpha(small_skew_vector(), 1.0) == doctest::Approx(0.5 * (0.48 + 0.03)));
}

TEST_CASE("survival ODE") {
    const auto binary = make_slack_offspring(2.0, 0.5);
    CHECK(survival_ode(binary, 1.0, 2.0) == doctest::Approx(0.5));
    CHECK(survival_ode(binary, 1.0, 0.0) == 1.0);
    CHECK(1000.0 * survival_ode(binary, 1.0, 1000.0) == doctest::Approx(2000.0 / 1002.0));
    const auto s = make_slack_offspring(1.5, 0.5);
    CHECK(survival_ode(s, 1.0, 10.0) == doctest::Approx(1.0 / (3.5 * 3.5)).epsilon(1e-14));
    CHECK_THROWS_AS(survival_ode(s, 1.0, -1.0), DomainError);

    for (const auto& law : {binary, s, make_slack_offspring(1.3, 0.3)})
        for (double t : {0.5, 2.0, 10.0, 100.0, 1000.0}) {
            const double closed = survival_ode(law, 1.0, t);
            CHECK(std::abs(survival_ode_numeric(law, 1.0, t) / closed - 1.0) < 1e-8);
        }
    // vector law, checked against the binary closed form (same law)
    const auto vbin = OffspringLaw::vector({0.5, 0.0, 0.5});
    CHECK(survival_ode(vbin, 1.0, 20.0) == doctest::Approx(2.0 / 22.0).epsilon(1e-8));
}

TEST_CASE("vector laws") {
    CHECK_THROWS_AS(OffspringLaw::vector({0.5, 0.5}), ParameterError);          // mean 1/2
    CHECK_THROWS_AS(OffspringLaw::vector({0.0, 1.0}), ParameterError);          // p_1 = 1
    CHECK_THROWS_AS(OffspringLaw::vector({0.4, 0.2, 0.3}), ParameterError);     // mass 0.9
    CHECK_THROWS_AS(OffspringLaw::vector({0.5, -0.1, 0.6}), ParameterError);
    CHECK_THROWS_AS(OffspringLaw::vector({0.5, 0.0, 0.5}, 2.5), ParameterError);

    const auto pp = OffspringLaw::vector({0.25, 0.5, 0.25});
    CHECK(pp.pure_power());
    CHECK_FALSE(small_skew_vector().pure_power());
    CHECK_THROWS_AS(small_skew_vector().kappa(), DomainError);

    // A Slack prefix continued by the matching power tail is the Slack law.
    const auto slack = make_slack_offspring(1.5, 0.5);
    std::vector<double> prefix;
    for (int k = 0; k <= 100; ++k) prefix.push_back(slack.prob(k));
    const auto tailed = OffspringLaw::vector(prefix, 1.5);
    CHECK(tailed.c() == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(tailed.kappa() == doctest::Approx(slack.kappa()).epsilon(1e-10));
    for (double v : {0.01, 0.2, 0.7, 1.0})
        CHECK(psi(tailed, 1.0, v) == doctest::Approx(psi(slack, 1.0, v)).epsilon(1e-9));
    for (std::int64_t n : {50, 101, 102, 5000})
        CHECK(tailed.tail(n) == doctest::Approx(slack.tail(n)).epsilon(1e-10));
}

TEST_CASE("sampling: binary frequencies") {
    const auto binary = make_slack_offspring(2.0, 0.5);
    Rng rng(42);
    const int n = 1000000;
    int zeros = 0, twos = 0;
    for (int i = 0; i < n; ++i) {
        const auto k = sample_offspring(binary, rng);
        REQUIRE((k == 0 || k == 2));
        (k == 0 ? zeros : twos)++;
    }
    const double sd = std::sqrt(0.25 / n);
    CHECK(std::abs(zeros / double(n) - 0.5) < 3 * sd);
    CHECK(std::abs(twos / double(n) - 0.5) < 3 * sd);
}

TEST_CASE("sampling: slack generating function and mean") {
    const auto law = make_slack_offspring(1.5, 0.5);
    Rng rng(7);
    const int n = 1000000;
    const double s_values[] = {0.2, 0.5, 0.9};
    double sum[3] = {}, sum2[3] = {};
    for (int i = 0; i < n; ++i) {
        const auto k = sample_offspring(law, rng);
        for (int j = 0; j < 3; ++j) {
            const double x = std::pow(s_values[j], static_cast<double>(k));
            sum[j] += x;
            sum2[j] += x * x;
        }
    }
    for (int j = 0; j < 3; ++j) {
        const double mean = sum[j] / n;
        const double sd = std::sqrt((sum2[j] / n - mean * mean) / n);
        CHECK(std::abs(mean - law.generating(s_values[j])) < 3 * sd);
    }

    const int big = 10000000;
    double m = 0.0, m2 = 0.0;
    std::int64_t beyond_cutoff = 0;
    for (int i = 0; i < big; ++i) {
        const double k = static_cast<double>(sample_offspring(law, rng));
        m += k;
        m2 += k * k;
        if (k > law.cutoff()) ++beyond_cutoff;
    }
    const double mean = m / big;
    const double sd = std::sqrt((m2 / big - mean * mean) / big);
    CHECK(std::abs(mean - 1.0) < 3 * sd);
    // P(N > K) ~ 8e-9: the exact tail inversion is reachable but rare
    CHECK(beyond_cutoff <= 3);
}

TEST_CASE("sampling: tail inversion") {
    const auto law = make_slack_offspring(1.5, 0.5);
    const std::int64_t k = law.cutoff();
    // N = max{n : T_n >= V}
    for (double v : {0.9, 0.5, 0.3, 1e-3, 1e-8, 1e-12, 1e-15}) {
        const auto n = law.inverse_tail(v);
        CHECK(law.tail(n) >= v);
        CHECK(law.tail(n + 1) < v);
    }
    CHECK(law.inverse_tail(1.0) == 0);
    CHECK(law.inverse_tail(0.51) == 0);
    CHECK(law.inverse_tail(0.49) == 1);
    CHECK(law.inverse_tail(0.24) == 2);

    // Conditioned on the tail, P(N >= 4K | N > K) = T_{4K} / T_{K+1}.
    Rng rng(99);
    const int n = 200000;
    const double tk = law.tail(k + 1);
    int above = 0;
    for (int i = 0; i < n; ++i)
        if (law.inverse_tail(tk * rng.uniform_open()) >= 4 * k) ++above;
    const double p = law.tail(4 * k) / tk;
    CHECK(std::abs(above / double(n) - p) < 3 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("C_psi calibration bounds the Lipschitz ratio") {
    for (const auto& law : {make_slack_offspring(2.0, 0.5), make_slack_offspring(1.5, 0.5), small_skew_vector()}) {
        const double a = law.alpha();
        const double cpsi = calibrate_c_psi(law, 1.0, {1.0, 10.0, 100.0});
        CHECK(cpsi > 0.0);
        Rng rng(3);
        for (int i = 0; i < 20000; ++i) {
            const double t = std::exp(std::log(100.0) * rng.uniform_open());
            const double vmax = std::pow(t, 1.0 / (a - 1.0));
            const double u = vmax * rng.uniform_open();
            const double v = vmax * rng.uniform_open();
            const double lhs = std::abs(psi_scaled(law, 1.0, t, u) - psi_scaled(law, 1.0, t, v));
            CHECK(lhs <= cpsi * (std::pow(u, a - 1) + std::pow(v, a - 1)) * std::abs(u - v) + 1e-12);
            CHECK(psi_scaled(law, 1.0, t, v) <= cpsi * std::pow(v, a) + 1e-12);
        }
    }
}
