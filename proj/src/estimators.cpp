#include "branchlab/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "branchlab/error.hpp"
#include "branchlab/parallel.hpp"

namespace branchlab {

namespace {

constexpr std::uint64_t kBlock = 1024;

struct Tally {
    Moments moments;
    std::uint64_t exploded = 0;
};

// Runs replicas [0, mc.replicas); `observe` maps a realization to a sample
// vector of length `dim`.
template <class Observe>
Tally run_replicas(const BranchingConfig& config, const LevyDriver& driver, double x0, double t,
                   const McOptions& mc, std::size_t dim, const SimulationOptions& options,
                   Observe&& observe) {
    if (mc.replicas < 1) throw EstimationError("need at least one replica");
    config.validate();
    auto block = [&](std::uint64_t begin, std::uint64_t end) {
        Tally tally{Moments(dim), 0};
        std::vector<double> sample(dim);
        for (std::uint64_t i = begin; i < end; ++i) {
            try {
                const Realization r = simulate_replica(config, driver, x0, t, mc.seed, i, options);
                observe(r, sample.data());
                tally.moments.add(sample.data());
            } catch (const ExplosionError&) {
                ++tally.exploded;
            }
        }
        return tally;
    };
    auto merge = [](Tally& a, const Tally& b) {
        a.moments.merge(b.moments);
        a.exploded += b.exploded;
    };
    Tally total = parallel_reduce_blocks<Tally>(mc.replicas, kBlock, mc.workers, block, merge);
    if (total.moments.count() == 0)
        throw EstimationError("every replica exceeded the event cap (" +
                              std::to_string(total.exploded) + " explosions)");
    return total;
}

EstimateRecord make_record(const Tally& tally, double value, double std_error,
                           const McOptions& mc, std::string label) {
    EstimateRecord rec;
    rec.value = value;
    rec.std_error = std_error;
    rec.replicas = tally.moments.count();
    rec.exploded = tally.exploded;
    rec.master_seed = mc.seed;
    rec.label = std::move(label);
    return rec;
}

double mean_std_error(const Moments& m, std::size_t i = 0) {
    return std::sqrt(m.variance(i) / static_cast<double>(m.count()));
}

}  // namespace

long double scaling_power(double t, double alpha) {
    return std::pow(static_cast<long double>(t), 1.0L / (static_cast<long double>(alpha) - 1.0L));
}

EstimateRecord estimate_survival(const BranchingConfig& config, const LevyDriver& driver, double t,
                                 const McOptions& mc) {
    if (!(t >= 0.0)) throw DomainError("estimate_survival: t must be >= 0");
    SimulationOptions opts;
    opts.track_extremes = false;
    Tally tally = run_replicas(config, driver, 0.0, t, mc, 1, opts,
                               [](const Realization& r, double* out) { out[0] = r.survived ? 1.0 : 0.0; });
    const double p = tally.moments.mean();
    const double n = static_cast<double>(tally.moments.count());
    return make_record(tally, p, std::sqrt(p * (1.0 - p) / n), mc, "survival");
}

EstimateRecord estimate_thm1_lhs(const BranchingConfig& config, const LevyDriver& driver, double y,
                                 double t, const Preset& h, const Preset& g, const McOptions& mc) {
    if (!(t > 1.0)) throw DomainError("estimate_thm1_lhs: t must exceed 1");
    if (!h.compact_support()) throw DomainError("estimate_thm1_lhs: h must have compact support");
    if (h.is_zero() && g.is_zero()) {
        Tally empty{Moments(1), 0};
        EstimateRecord rec = make_record(empty, 0.0, 0.0, mc, "thm1");
        rec.replicas = mc.replicas;
        return rec;
    }
    const double alpha = config.offspring.alpha();
    const long double tp = scaling_power(t, alpha);
    const double h_scale = static_cast<double>(1.0L / (tp / std::sqrt(static_cast<long double>(t))));
    const double g_scale = static_cast<double>(1.0L / tp);
    const double rt = std::sqrt(t);
    SimulationOptions opts;
    opts.track_extremes = false;
    Tally tally = run_replicas(config, driver, rt * y, t, mc, 1, opts, [&](const Realization& r, double* out) {
        double sh = 0.0, sg = 0.0;
        for (double x : r.positions) {
            sh += h(x);
            sg += g(x / rt);
        }
        out[0] = std::exp(-h_scale * sh - g_scale * sg);
    });
    const double value = static_cast<double>(tp * (1.0L - tally.moments.mean()));
    const double se = static_cast<double>(tp) * mean_std_error(tally.moments);
    return make_record(tally, value, se, mc, "thm1");
}

EstimateRecord estimate_thm2_lhs(const BranchingConfig& config, const LevyDriver& driver, double y,
                                 double t, const IntervalSet& a, const McOptions& mc) {
    if (!(t > 1.0)) throw DomainError("estimate_thm2_lhs: t must exceed 1");
    if (a.pieces().empty() || !(a.length() > 0.0))
        throw DomainError("estimate_thm2_lhs: A must have positive length");
    const long double tp = scaling_power(t, config.offspring.alpha());
    SimulationOptions opts;
    opts.track_extremes = false;
    Tally tally = run_replicas(config, driver, std::sqrt(t) * y, t, mc, 1, opts,
                               [&](const Realization& r, double* out) {
                                   out[0] = 0.0;
                                   for (double x : r.positions)
                                       if (a.contains(x)) {
                                           out[0] = 1.0;
                                           break;
                                       }
                               });
    const double p = tally.moments.mean();
    const double n = static_cast<double>(tally.moments.count());
    const double tpd = static_cast<double>(tp);
    return make_record(tally, tpd * p, tpd * std::sqrt(p * (1.0 - p) / n), mc, "thm2");
}

EstimateRecord estimate_conditional(const BranchingConfig& config, const LevyDriver& driver,
                                    double y, double t, const IntervalSet& a, const Preset& f,
                                    ConditionalMode mode, const McOptions& mc) {
    if (!(t > 1.0)) throw DomainError("estimate_conditional: t must exceed 1");
    if (a.pieces().empty() || !(a.length() > 0.0))
        throw DomainError("estimate_conditional: A must have positive length");
    if (mode == ConditionalMode::vague && !f.compact_support())
        throw DomainError("estimate_conditional: vague mode needs compactly supported f");
    const long double tp = scaling_power(t, config.offspring.alpha());
    const double rt = std::sqrt(t);
    const double scale = mode == ConditionalMode::vague
                             ? static_cast<double>(static_cast<long double>(rt) / tp)
                             : static_cast<double>(1.0L / tp);
    const double arg_scale = mode == ConditionalMode::vague ? 1.0 : 1.0 / rt;
    SimulationOptions opts;
    opts.track_extremes = false;
    // One replica pool for numerator and denominator.
    Tally tally = run_replicas(config, driver, rt * y, t, mc, 2, opts, [&](const Realization& r, double* out) {
        bool hit = false;
        double sf = 0.0;
        for (double x : r.positions) {
            hit = hit || a.contains(x);
            sf += f(x * arg_scale);
        }
        out[1] = hit ? 1.0 : 0.0;
        out[0] = hit ? std::exp(-scale * sf) : 0.0;
    });
    const Moments& m = tally.moments;
    const std::string label = mode == ConditionalMode::vague ? "thm3-vague" : "thm3-weak";
    if (m.mean(1) == 0.0)
        throw EstimationError("estimate_conditional: no replica had a particle in A");
    const double ratio = m.mean(0) / m.mean(1);
    if (f.is_zero()) return make_record(tally, 1.0, 0.0, mc, label);
    const double var = m.variance(0) - 2.0 * ratio * m.covariance(0, 1) + ratio * ratio * m.variance(1);
    const double se = std::sqrt(std::max(0.0, var) / static_cast<double>(m.count())) / m.mean(1);
    return make_record(tally, std::clamp(ratio, 0.0, 1.0), se, mc, label);
}

MTailResult estimate_m_tail(const BranchingConfig& config, const LevyDriver& driver,
                            const std::vector<double>& x_grid, const McOptions& mc) {
    if (x_grid.size() < 4) throw EstimationError("m-tail fit needs at least 4 grid points");
    if (x_grid.size() > Moments::kMaxDim) throw EstimationError("m-tail grid has too many points");
    for (std::size_t i = 0; i < x_grid.size(); ++i)
        if (!(x_grid[i] > 0.0) || (i > 0 && !(x_grid[i] > x_grid[i - 1])))
            throw EstimationError("m-tail grid must be positive and strictly increasing");

    SimulationOptions opts;
    opts.track_extremes = true;
    opts.stop_level = x_grid.back();
    const std::size_t k = x_grid.size();
    Tally tally = run_replicas(config, driver, 0.0, kRunToExtinction, mc, k, opts,
                               [&](const Realization& r, double* out) {
                                   for (std::size_t i = 0; i < k; ++i)
                                       out[i] = r.sup_all_time >= x_grid[i] ? 1.0 : 0.0;
                               });
    MTailResult res;
    res.replicas = tally.moments.count();
    res.exploded = tally.exploded;
    res.cap_exceedance_rate =
        static_cast<double>(tally.exploded) / static_cast<double>(res.replicas + tally.exploded);
    const double n = static_cast<double>(res.replicas);
    for (std::size_t i = 0; i < k; ++i) {
        MTailPoint pt;
        pt.x = x_grid[i];
        const double p = tally.moments.mean(i);
        pt.exceedances = static_cast<std::uint64_t>(std::llround(p * n));
        pt.probability = make_record(tally, p, std::sqrt(p * (1.0 - p) / n), mc, "m-tail");
        res.points.push_back(pt);
    }
    if (res.points.back().exceedances < 10)
        throw EstimationError("m-tail fit refused: only " + std::to_string(res.points.back().exceedances) +
                              " replicas reached the largest x (need 10)");

    // Weighted least squares on (log x, log P) with delta-method variances.
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& pt : res.points) {
        const double p = pt.probability.value;
        const double var_log = (1.0 - p) / (p * n);
        const double w = 1.0 / var_log;
        const double lx = std::log(pt.x), ly = std::log(p);
        sw += w;
        sx += w * lx;
        sy += w * ly;
        sxx += w * lx * lx;
        sxy += w * lx * ly;
    }
    const double det = sw * sxx - sx * sx;
    res.slope = (sw * sxy - sx * sy) / det;
    res.intercept = (sxx * sy - sx * sxy) / det;
    res.slope_std_error = std::sqrt(sw / det);
    return res;
}

}  // namespace branchlab
