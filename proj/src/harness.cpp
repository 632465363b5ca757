#include "branchlab/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"

#include "branchlab/error.hpp"
#include "branchlab/estimators.hpp"

namespace branchlab {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::map<std::string, Experiment>& experiment_names() {
    static const std::map<std::string, Experiment> names{
        {"thm1", Experiment::thm1},
        {"thm2", Experiment::thm2},
        {"thm3-vague", Experiment::thm3_vague},
        {"thm3-weak", Experiment::thm3_weak},
        {"survival", Experiment::survival},
        {"m-tail", Experiment::m_tail},
        {"llt", Experiment::llt},
        {"pde-only", Experiment::pde_only},
        {"scaled-vs-limit", Experiment::scaled_vs_limit},
    };
    return names;
}

bool uses_t_ladder(Experiment e) { return e != Experiment::m_tail && e != Experiment::pde_only; }

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

void require_increasing(const std::vector<double>& v, const std::string& name) {
    if (v.empty()) throw ConfigError(name + " must not be empty");
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) throw ConfigError(name + " entries must be finite");
        if (i > 0 && !(v[i] > v[i - 1])) throw ConfigError(name + " must be strictly increasing");
    }
}

double json_number(const json& j) {
    return j.is_null() ? kNaN : j.get<double>();
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// P(M >= x) for Brownian motion and psi = C u^alpha: u''/2 = C u^alpha, u(0) = 1.
double travelling_wave(double alpha, double cee, double x) {
    const double q = 2.0 / (alpha - 1.0);
    const double k = std::pow(q * (q + 1.0) / (2.0 * cee), 1.0 / (alpha - 1.0));
    const double a = std::pow(k, 1.0 / q);
    return k * std::pow(x + a, -q);
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

std::string to_string(Experiment e) {
    for (const auto& [name, value] : experiment_names())
        if (value == e) return name;
    return "unknown";
}

Experiment experiment_from_string(const std::string& name) {
    const auto it = experiment_names().find(name);
    if (it == experiment_names().end()) throw ConfigError("unknown experiment '" + name + "'");
    return it->second;
}

OffspringLaw LawBlock::build() const {
    try {
        if (family == "slack") return OffspringLaw::slack(alpha, c);
        if (family == "vector") return OffspringLaw::vector(probabilities, tail_exponent);
    } catch (const ParameterError& e) {
        throw ConfigError(std::string("law: ") + e.what());
    }
    throw ConfigError("law: unknown family '" + family + "'");
}

LevyDriver DriverBlock::build() const {
    try {
        if (explicit_spec) return make_driver(*explicit_spec);
        switch (driver_kind_from_string(preset)) {
            case DriverKind::brownian: return LevyDriver::brownian();
            case DriverKind::compound_poisson: return LevyDriver::compound_poisson();
            case DriverKind::jump_diffusion: return LevyDriver::jump_diffusion();
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("driver: ") + e.what());
    }
    throw ConfigError("driver: unknown preset '" + preset + "'");
}

PdeSettings GridBlock::settings() const {
    PdeSettings s;
    s.half_width = half_width;
    s.points = points;
    s.r0 = r0;
    s.levels = levels;
    s.grading = grading;
    return s;
}

void validate(const ExperimentConfig& c) {
    c.law.build();
    c.driver.build();
    if (!(c.beta > 0.0) || !std::isfinite(c.beta)) throw ConfigError("beta must be positive");
    if (!std::isfinite(c.y)) throw ConfigError("y must be finite");
    if (uses_t_ladder(c.experiment)) {
        require_increasing(c.t_ladder, "t_ladder");
        const double t_min = c.experiment == Experiment::survival || c.experiment == Experiment::llt ||
                                     c.experiment == Experiment::scaled_vs_limit
                                 ? 0.0
                                 : 1.0;
        if (!(c.t_ladder.front() > t_min))
            throw ConfigError("t_ladder entries must exceed " + format_number(t_min));
    }
    if (c.experiment == Experiment::m_tail) {
        require_increasing(c.x_grid, "x_grid");
        if (c.x_grid.size() < 4) throw ConfigError("x_grid needs at least 4 points");
        if (!(c.x_grid.front() > 0.0)) throw ConfigError("x_grid must be positive");
    }
    if (c.experiment == Experiment::thm2 || c.experiment == Experiment::thm3_vague ||
        c.experiment == Experiment::thm3_weak) {
        require_increasing(c.theta_ladder, "theta_ladder");
        if (c.theta_ladder.size() < 4) throw ConfigError("theta_ladder needs at least 4 points");
        if (!(c.a.hi > c.a.lo)) throw ConfigError("A must have positive length");
    }
    if (c.replicas < 1) throw ConfigError("replicas must be >= 1");
    if (c.event_cap < 1) throw ConfigError("event_cap must be >= 1");
    const Preset g = parse_preset(c.g), h = parse_preset(c.h), f = parse_preset(c.f);
    if (!h.compact_support()) throw ConfigError("h must have compact support");
    if (c.experiment == Experiment::thm3_vague && !f.compact_support())
        throw ConfigError("thm3-vague needs compactly supported f");
    if (c.experiment == Experiment::thm3_weak && g.is_zero()) throw ConfigError("thm3-weak needs a nonzero g");
    if (c.experiment == Experiment::llt && h.is_zero()) throw ConfigError("llt needs a nonzero h");
    if (!(c.grid.half_width > 0.0) || c.grid.points < 16 || (c.grid.points & (c.grid.points - 1)) != 0)
        throw ConfigError("grid: half_width > 0 and a power-of-two point count >= 16 required");
    if (!(c.grid.r0 > 0.0 && c.grid.r0 <= 1e-3) || c.grid.levels < 1 || !(c.grid.grading >= 2.0))
        throw ConfigError("grid: need 0 < r0 <= 1e-3, levels >= 1, grading >= 2");
    if (!(c.check.sigmas >= 0.0) || !(c.check.relative >= 0.0))
        throw ConfigError("check: sigmas and relative must be >= 0");
}

ExperimentConfig parse_config(const std::string& json_text) {
    ExperimentConfig c;
    try {
        const json j = json::parse(json_text);
        if (!j.is_object()) throw ConfigError("config must be a JSON object");
        c.experiment = experiment_from_string(j.at("experiment").get<std::string>());
        if (j.contains("law")) {
            const json& l = j.at("law");
            c.law.family = get_or<std::string>(l, "family", "slack");
            c.law.alpha = get_or(l, "alpha", 2.0);
            c.law.c = get_or(l, "c", 0.5);
            c.law.probabilities = get_or(l, "probabilities", std::vector<double>{});
            if (l.contains("tail_exponent")) c.law.tail_exponent = l.at("tail_exponent").get<double>();
        }
        if (j.contains("driver")) {
            const json& d = j.at("driver");
            if (d.is_string()) {
                c.driver.preset = d.get<std::string>();
            } else if (d.contains("sigma") || d.contains("jump_rate")) {
                DriverSpec spec;
                spec.kind = driver_kind_from_string(get_or<std::string>(d, "kind", "jump_diffusion"));
                spec.sigma = get_or(d, "sigma", 0.0);
                spec.jump_rate = get_or(d, "jump_rate", 0.0);
                spec.jump_half_width = get_or(d, "jump_half_width", 0.0);
                spec.jump_law = get_or<std::string>(d, "jump_law", "uniform");
                c.driver.explicit_spec = spec;
            } else {
                c.driver.preset = get_or<std::string>(d, "kind", "brownian");
            }
        }
        c.beta = get_or(j, "beta", c.beta);
        c.y = get_or(j, "y", c.y);
        c.t_ladder = get_or(j, "t_ladder", c.t_ladder);
        c.theta_ladder = get_or(j, "theta_ladder", c.theta_ladder);
        c.x_grid = get_or(j, "x_grid", c.x_grid);
        c.replicas = get_or(j, "replicas", c.replicas);
        c.master_seed = get_or(j, "master_seed", c.master_seed);
        c.event_cap = get_or(j, "event_cap", c.event_cap);
        if (j.contains("grid")) {
            const json& g = j.at("grid");
            c.grid.half_width = get_or(g, "half_width", c.grid.half_width);
            c.grid.points = get_or(g, "points", c.grid.points);
            c.grid.r0 = get_or(g, "r0", c.grid.r0);
            c.grid.levels = get_or(g, "levels", c.grid.levels);
            c.grid.grading = get_or(g, "grading", c.grid.grading);
        }
        if (j.contains("A")) {
            const auto a = j.at("A").get<std::vector<double>>();
            if (a.size() != 2) throw ConfigError("A must be [lo, hi]");
            c.a = {a[0], a[1]};
        }
        c.g = get_or(j, "g", c.g);
        c.h = get_or(j, "h", c.h);
        c.f = get_or(j, "f", c.f);
        c.output = get_or(j, "output", c.output);
        c.workers = get_or(j, "workers", c.workers);
        if (j.contains("check")) {
            c.check.sigmas = get_or(j.at("check"), "sigmas", c.check.sigmas);
            c.check.relative = get_or(j.at("check"), "relative", c.check.relative);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const ParameterError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (const char* env = std::getenv("BRANCHLAB_SEED")) {
        try {
            c.master_seed = std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError(std::string("BRANCHLAB_SEED is not an integer: ") + env);
        }
    }
    validate(c);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) {
    json j;
    j["experiment"] = to_string(c.experiment);
    j["law"] = {{"family", c.law.family}, {"alpha", c.law.alpha}, {"c", c.law.c}};
    if (!c.law.probabilities.empty()) j["law"]["probabilities"] = c.law.probabilities;
    if (c.law.tail_exponent) j["law"]["tail_exponent"] = *c.law.tail_exponent;
    if (c.driver.explicit_spec) {
        const auto& s = *c.driver.explicit_spec;
        j["driver"] = {{"kind", to_string(s.kind)}, {"sigma", s.sigma}, {"jump_rate", s.jump_rate},
                       {"jump_half_width", s.jump_half_width}, {"jump_law", s.jump_law}};
    } else {
        j["driver"] = {{"kind", c.driver.preset}};
    }
    j["beta"] = c.beta;
    j["y"] = c.y;
    j["t_ladder"] = c.t_ladder;
    j["theta_ladder"] = c.theta_ladder;
    j["x_grid"] = c.x_grid;
    j["replicas"] = c.replicas;
    j["master_seed"] = c.master_seed;
    j["event_cap"] = c.event_cap;
    j["grid"] = {{"half_width", c.grid.half_width}, {"points", c.grid.points}, {"r0", c.grid.r0},
                 {"levels", c.grid.levels}, {"grading", c.grid.grading}};
    j["A"] = {c.a.lo, c.a.hi};
    j["g"] = c.g;
    j["h"] = c.h;
    j["f"] = c.f;
    j["output"] = c.output;
    j["workers"] = c.workers;
    j["check"] = {{"sigmas", c.check.sigmas}, {"relative", c.check.relative}};
    return j.dump(2);
}

bool ResultRow::breaches(const CheckBlock& check) const {
    if (std::isnan(target)) return false;
    if (!std::isfinite(estimate)) return true;
    return std::abs(gap) > std::max(check.sigmas * std_error, check.relative * std::abs(target));
}

ResultRow make_row(std::string experiment, double param, double estimate, double std_error, double target,
                   double runtime_s, std::uint64_t exploded, std::uint64_t seed) {
    ResultRow r;
    r.experiment = std::move(experiment);
    r.param = param;
    r.estimate = estimate;
    r.std_error = std_error;
    r.target = target;
    r.gap = estimate - target;
    r.gap_sigmas = std_error > 0.0 ? r.gap / std_error : kNaN;
    r.runtime_s = runtime_s;
    r.exploded = exploded;
    r.seed = seed;
    return r;
}

std::vector<ResultRow> run(const ExperimentConfig& config, const RowSink& sink) {
    validate(config);
    BranchingConfig bc{config.law.build(), config.beta, config.event_cap};
    const LevyDriver driver = config.driver.build();
    const double alpha = bc.offspring.alpha();
    const double cee = cee_alpha(bc.offspring, config.beta);
    const Preset g = parse_preset(config.g), h = parse_preset(config.h), f = parse_preset(config.f);
    const IntervalSet a({config.a});
    const PdeSettings settings = config.grid.settings();
    McOptions mc;
    mc.replicas = config.replicas;
    mc.seed = config.master_seed;
    mc.workers = config.workers;
    const std::string label = to_string(config.experiment);

    std::vector<ResultRow> rows;
    auto push = [&](ResultRow row) {
        if (sink) sink(row);
        rows.push_back(std::move(row));
    };
    auto guarded = [&](double param, auto&& body) {
        try {
            body();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ExperimentError(label, param, e.what());
        }
    };

    // Targets that do not depend on the ladder point.
    double target = kNaN;
    auto t0 = Clock::now();
    guarded(kNaN, [&] {
        switch (config.experiment) {
            case Experiment::thm1:
            case Experiment::scaled_vs_limit:
                target = thm1_rhs(alpha, cee, g, h.integral(), config.y, settings);
                break;
            case Experiment::pde_only:
                if (g.is_zero() && h.is_zero()) {
                    target = 0.0;
                } else if (!g.compact_support() && h.is_zero()) {
                    // Flat oracle: v(1) = (theta^{1-alpha} + (alpha-1) C)^{-1/(alpha-1)}.
                    target = std::pow(std::pow(g.sup(), 1.0 - alpha) + (alpha - 1.0) * cee, -1.0 / (alpha - 1.0));
                }
                break;
            case Experiment::thm2: target = thm2_rhs(alpha, cee, config.y, config.theta_ladder, settings); break;
            case Experiment::thm3_vague:
                target = thm3_targets(alpha, cee, f, Preset::zero(), config.y, config.theta_ladder, settings)
                             .vague_ratio();
                break;
            case Experiment::thm3_weak:
                target =
                    thm3_targets(alpha, cee, Preset::zero(), g, config.y, config.theta_ladder, settings).weak_ratio();
                break;
            default: break;
        }
    });
    const double target_time = seconds_since(t0);

    if (config.experiment == Experiment::pde_only) {
        guarded(1.0, [&] {
            t0 = Clock::now();
            const double v = thm1_rhs(alpha, cee, g, h.integral(), config.y, settings);
            push(make_row(label, 1.0, v, 0.0, target, seconds_since(t0) + target_time, 0, 0));
        });
        return rows;
    }

    if (config.experiment == Experiment::m_tail) {
        guarded(config.x_grid.back(), [&] {
            t0 = Clock::now();
            const MTailResult res = estimate_m_tail(bc, driver, config.x_grid, mc);
            const double elapsed = seconds_since(t0);
            const bool exact = driver.kind() == DriverKind::brownian && bc.offspring.pure_power();
            for (const auto& pt : res.points)
                push(make_row(label, pt.x, pt.probability.value, pt.probability.std_error,
                              exact ? travelling_wave(alpha, cee, pt.x) : kNaN, elapsed, res.exploded,
                              config.master_seed));
            push(make_row("m-tail-slope", config.x_grid.back(), res.slope, res.slope_std_error,
                          -2.0 / (alpha - 1.0), elapsed, res.exploded, config.master_seed));
        });
        return rows;
    }

    for (double t : config.t_ladder) {
        guarded(t, [&] {
            t0 = Clock::now();
            EstimateRecord rec;
            double row_target = target;
            switch (config.experiment) {
                case Experiment::survival:
                    rec = estimate_survival(bc, driver, t, mc);
                    row_target = survival_ode(bc.offspring, config.beta, t);
                    break;
                case Experiment::thm1: rec = estimate_thm1_lhs(bc, driver, config.y, t, h, g, mc); break;
                case Experiment::thm2: rec = estimate_thm2_lhs(bc, driver, config.y, t, a, mc); break;
                case Experiment::thm3_vague:
                    rec = estimate_conditional(bc, driver, config.y, t, a, f, ConditionalMode::vague, mc);
                    break;
                case Experiment::thm3_weak:
                    rec = estimate_conditional(bc, driver, config.y, t, a, g, ConditionalMode::weak, mc);
                    break;
                case Experiment::llt: {
                    const Grid1D grid(settings.half_width, settings.points);
                    rec.value = llt_error(driver, t, h.sample(grid), grid);
                    row_target = 0.0;
                    push(make_row(label, t, rec.value, 0.0, row_target, seconds_since(t0), 0, 0));
                    return;
                }
                case Experiment::scaled_vs_limit: {
                    const Field field = solve_scaled_field(t, driver, bc.offspring, config.beta, g, h,
                                                           settings.grid(), settings.mesh());
                    push(make_row(label, t, field.at(1.0, config.y), 0.0, target, seconds_since(t0), 0, 0));
                    return;
                }
                default: break;
            }
            push(make_row(label, t, rec.value, rec.std_error, row_target, seconds_since(t0), rec.exploded,
                          config.master_seed));
        });
    }
    return rows;
}

std::string rows_to_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream out;
    out << kCsvHeader << '\n';
    for (const auto& r : rows)
        out << r.experiment << ',' << format_number(r.param) << ',' << format_number(r.estimate) << ','
            << format_number(r.std_error) << ',' << format_number(r.target) << ',' << format_number(r.gap) << ','
            << format_number(r.gap_sigmas) << ',' << format_number(r.runtime_s) << ',' << r.exploded << ','
            << r.seed << '\n';
    return out.str();
}

std::string rows_to_json(const std::vector<ResultRow>& rows) {
    json arr = json::array();
    for (const auto& r : rows)
        arr.push_back({{"experiment", r.experiment},
                       {"param", number_or_null(r.param)},
                       {"estimate", number_or_null(r.estimate)},
                       {"stderr", number_or_null(r.std_error)},
                       {"target", number_or_null(r.target)},
                       {"gap", number_or_null(r.gap)},
                       {"gap_sigmas", number_or_null(r.gap_sigmas)},
                       {"runtime_s", number_or_null(r.runtime_s)},
                       {"exploded", r.exploded},
                       {"seed", r.seed}});
    return arr.dump(2);
}

std::vector<ResultRow> rows_from_json(const std::string& text) {
    std::vector<ResultRow> rows;
    for (const auto& j : json::parse(text)) {
        ResultRow r;
        r.experiment = j.at("experiment").get<std::string>();
        r.param = json_number(j.at("param"));
        r.estimate = json_number(j.at("estimate"));
        r.std_error = json_number(j.at("stderr"));
        r.target = json_number(j.at("target"));
        r.gap = json_number(j.at("gap"));
        r.gap_sigmas = json_number(j.at("gap_sigmas"));
        r.runtime_s = json_number(j.at("runtime_s"));
        r.exploded = j.at("exploded").get<std::uint64_t>();
        r.seed = j.at("seed").get<std::uint64_t>();
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<std::string> emit(const std::vector<ResultRow>& rows, const std::string& prefix, bool plot_data) {
    if (rows.empty()) throw std::invalid_argument("emit: no rows");
    const std::filesystem::path base(prefix);
    if (base.has_parent_path()) std::filesystem::create_directories(base.parent_path());
    std::vector<std::string> written;
    auto write = [&](const std::string& path, const std::string& text) {
        std::ofstream out(path);
        out << text;
        out.close();
        if (!out) throw std::runtime_error("cannot write " + path);
        written.push_back(path);
    };
    write(prefix + ".csv", rows_to_csv(rows));
    write(prefix + ".json", rows_to_json(rows));
    if (plot_data) {
        std::map<std::string, std::string> series;
        for (const auto& r : rows) {
            auto& s = series[r.experiment];
            if (s.empty()) s = "# param estimate stderr target\n";
            s += format_number(r.param) + ' ' + format_number(r.estimate) + ' ' + format_number(r.std_error) +
                 ' ' + format_number(r.target) + '\n';
        }
        for (const auto& [name, text] : series) write(prefix + "." + name + ".dat", text);
    }
    return written;
}

}  // namespace branchlab
