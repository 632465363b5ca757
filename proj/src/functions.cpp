#include "branchlab/functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <regex>
#include <sstream>

#include "branchlab/error.hpp"

namespace branchlab {

Preset Preset::indicator(double a, double b) {
    if (!(a < b) || !std::isfinite(a) || !std::isfinite(b))
        throw ParameterError("indicator(a,b) needs finite a < b");
    return Preset(Kind::indicator, a, b, 0);
}

Preset Preset::constant(double theta) {
    if (!(theta >= 0.0 && std::isfinite(theta)))
        throw ParameterError("constant(theta) needs finite theta >= 0");
    return Preset(Kind::constant, 0, 0, theta);
}

double Preset::operator()(double x) const noexcept {
    switch (kind_) {
        case Kind::zero: return 0.0;
        case Kind::triangle: return std::max(0.0, 1.0 - std::abs(x));
        case Kind::indicator: return (x >= a_ && x <= b_) ? 1.0 : 0.0;
        case Kind::constant: return theta_;
    }
    return 0.0;
}

double Preset::integral() const noexcept {
    switch (kind_) {
        case Kind::zero: return 0.0;
        case Kind::triangle: return 1.0;
        case Kind::indicator: return b_ - a_;
        case Kind::constant:
            return theta_ == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return 0.0;
}

double Preset::sup() const noexcept {
    switch (kind_) {
        case Kind::zero: return 0.0;
        case Kind::triangle:
        case Kind::indicator: return 1.0;
        case Kind::constant: return theta_;
    }
    return 0.0;
}

bool Preset::is_zero() const noexcept {
    return kind_ == Kind::zero || (kind_ == Kind::constant && theta_ == 0.0);
}

double Preset::support_radius() const noexcept {
    switch (kind_) {
        case Kind::triangle: return 1.0;
        case Kind::indicator: return std::max(std::abs(a_), std::abs(b_));
        default: return 0.0;
    }
}

std::string Preset::describe() const {
    std::ostringstream os;
    switch (kind_) {
        case Kind::zero: os << "zero"; break;
        case Kind::triangle: os << "triangle"; break;
        case Kind::indicator: os << "indicator(" << a_ << "," << b_ << ")"; break;
        case Kind::constant: os << "constant(" << theta_ << ")"; break;
    }
    return os.str();
}

std::vector<double> Preset::sample(const Grid1D& grid, double scale) const {
    std::vector<double> v(grid.points());
    const double dy = grid.spacing();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double y = grid.node(i) * scale;
        if (kind_ == Kind::indicator) {
            // Cell [y - d/2, y + d/2] in the argument of f.
            const double half = 0.5 * dy * scale;
            const double overlap = std::min(b_, y + half) - std::max(a_, y - half);
            v[i] = std::clamp(overlap / (2.0 * half), 0.0, 1.0);
        } else {
            v[i] = (*this)(y);
        }
    }
    return v;
}

Preset parse_preset(const std::string& text) {
    static const std::regex number(R"(\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*)");
    static const std::regex call(R"(\s*([a-z_]+)\s*(?:\((.*)\))?\s*)");
    std::smatch m;
    if (!std::regex_match(text, m, call)) throw ConfigError("cannot parse function preset '" + text + "'");
    const std::string name = m[1];
    std::vector<double> args;
    if (m[2].matched) {
        std::string body = m[2];
        std::stringstream ss(body);
        std::string item;
        while (std::getline(ss, item, ',')) {
            std::smatch nm;
            if (!std::regex_match(item, nm, number))
                throw ConfigError("bad numeric argument '" + item + "' in preset '" + text + "'");
            args.push_back(std::stod(nm[1]));
        }
    }
    try {
        if (name == "zero" && args.empty()) return Preset::zero();
        if (name == "triangle" && args.empty()) return Preset::triangle();
        if (name == "indicator" && args.size() == 2) return Preset::indicator(args[0], args[1]);
        if (name == "constant" && args.size() == 1) return Preset::constant(args[0]);
    } catch (const ParameterError& e) {
        throw ConfigError(std::string("preset '") + text + "': " + e.what());
    }
    throw ConfigError("unknown function preset '" + text + "'");
}

std::vector<std::string> preset_catalog() {
    return {"zero", "triangle", "indicator(a,b)", "constant(theta)"};
}

IntervalSet::IntervalSet(std::vector<Interval> pieces) : pieces_(std::move(pieces)) {
    for (const auto& p : pieces_)
        if (!(p.lo <= p.hi)) throw ParameterError("interval needs lo <= hi");
}

IntervalSet IntervalSet::whole_line() {
    const double inf = std::numeric_limits<double>::infinity();
    return IntervalSet({{-inf, inf}});
}

bool IntervalSet::contains(double x) const noexcept {
    for (const auto& p : pieces_)
        if (x >= p.lo && x <= p.hi) return true;
    return false;
}

bool IntervalSet::bounded() const noexcept {
    for (const auto& p : pieces_)
        if (!std::isfinite(p.lo) || !std::isfinite(p.hi)) return false;
    return true;
}

double IntervalSet::length() const noexcept {
    double s = 0.0;
    for (const auto& p : pieces_) s += p.hi - p.lo;
    return s;
}

}  // namespace branchlab
