#pragma once

#include <string>
#include <vector>

#include "branchlab/grid.hpp"

namespace branchlab {

// Named test functions: the theorems are exercised on this small family.
//   zero, triangle = (1 - |x|)_+, indicator(a,b) = 1_[a,b], constant(theta)
class Preset {
public:
    enum class Kind { zero, triangle, indicator, constant };

    static Preset zero() { return Preset(Kind::zero, 0, 0, 0); }
    static Preset triangle() { return Preset(Kind::triangle, 0, 0, 0); }
    static Preset indicator(double a, double b);
    static Preset constant(double theta);

    Kind kind() const noexcept { return kind_; }
    double operator()(double x) const noexcept;
    // Lebesgue integral; infinite for nonzero constants.
    double integral() const noexcept;
    double sup() const noexcept;
    bool compact_support() const noexcept { return kind_ != Kind::constant || theta_ == 0.0; }
    bool is_zero() const noexcept;
    // Support radius (max |x| with f(x) != 0); 0 for constants.
    double support_radius() const noexcept;
    std::string describe() const;

    // Nodal values. Indicators are cell-averaged so the grid integral equals b - a
    // exactly (an endpoint sitting on a node gets the value 1/2).
    std::vector<double> sample(const Grid1D& grid, double scale = 1.0) const;

    bool operator==(const Preset&) const = default;

private:
    Preset(Kind k, double a, double b, double theta) : kind_(k), a_(a), b_(b), theta_(theta) {}
    Kind kind_;
    double a_, b_, theta_;
};

// Parses "zero", "triangle", "indicator(a,b)", "constant(theta)".
Preset parse_preset(const std::string& text);
std::vector<std::string> preset_catalog();

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool operator==(const Interval&) const = default;
};

// Finite union of closed intervals.
class IntervalSet {
public:
    IntervalSet() = default;
    explicit IntervalSet(std::vector<Interval> pieces);
    static IntervalSet whole_line();

    bool contains(double x) const noexcept;
    const std::vector<Interval>& pieces() const noexcept { return pieces_; }
    bool bounded() const noexcept;
    double length() const noexcept;

private:
    std::vector<Interval> pieces_;
};

}  // namespace branchlab
