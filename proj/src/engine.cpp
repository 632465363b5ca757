#include "branchlab/engine.hpp"

#include <algorithm>
#include <cmath>

#include "branchlab/error.hpp"

namespace branchlab {

namespace {

// A group of not-yet-simulated siblings born together.
struct Family {
    double birth;
    double position;
    std::int64_t pending;
};

}  // namespace

Realization simulate(const BranchingConfig& config, const LevyDriver& driver, double x0, double t,
                     Rng& rng, const SimulationOptions& options) {
    if (!(t >= 0.0)) throw DomainError("simulate: horizon t must be >= 0");
    config.validate();
    const double beta = config.branching_rate;
    const OffspringLaw& law = config.offspring;
    const bool extremes = options.track_extremes;
    const double stop = options.stop_level ? *options.stop_level - x0
                                           : std::numeric_limits<double>::infinity();

    // Everything is tracked relative to the ancestor; x0 is added at the end.
    Realization r;
    double sup = 0.0;
    std::vector<Family> stack;
    stack.push_back({0.0, 0.0, 1});
    while (!stack.empty()) {
        Family& top = stack.back();
        const double birth = top.birth;
        const double pos = top.position;
        if (--top.pending == 0) stack.pop_back();

        const double death = birth + rng.exponential(beta);
        const bool dies = death <= t;
        const double duration = dies ? death - birth : t - birth;
        double d, hi = 0.0, lo = 0.0;
        if (extremes) driver.displacement_with_extremes(duration, rng, d, hi, lo);
        else d = driver.displacement(duration, rng);
        sup = std::max(sup, pos + hi);
        if (sup >= stop) {
            r.stopped_at_level = true;
            break;
        }
        if (!dies) {
            r.positions.push_back(pos + d);
            continue;
        }
        if (r.events == config.event_cap) throw ExplosionError(r.events + 1, config.event_cap);
        ++r.events;
        const std::int64_t k = law.sample(rng);
        if (k > 0) stack.push_back({death, pos + d, k});
    }

    for (auto& x : r.positions) {
        r.max_t = std::max(r.max_t, x);
        r.min_t = std::min(r.min_t, x);
    }
    if (!extremes && !r.positions.empty()) sup = std::max(sup, r.max_t);
    for (auto& x : r.positions) x += x0;
    r.survived = !r.positions.empty();
    if (r.survived) {
        r.max_t += x0;
        r.min_t += x0;
    }
    r.sup_all_time = sup + x0;
    return r;
}

Realization simulate_replica(const BranchingConfig& config, const LevyDriver& driver, double x0,
                             double t, std::uint64_t master_seed, std::uint64_t replica_index,
                             const SimulationOptions& options) {
    Rng rng = Rng::for_replica(master_seed, replica_index);
    Realization r = simulate(config, driver, x0, t, rng, options);
    r.seed_id = replica_index;
    return r;
}

Functionals functionals(const Realization& r, double t, const RealFunction& h,
                        const RealFunction& g, const IntervalSet& a) {
    Functionals out;
    const double scale = t > 0.0 ? 1.0 / std::sqrt(t) : 1.0;
    for (double x : r.positions) {
        if (h) out.sum_h += h(x);
        if (g) out.sum_g += g(x * scale);
        if (a.contains(x)) ++out.count_a;
    }
    out.hit_a = out.count_a > 0;
    return out;
}

}  // namespace branchlab
