#pragma once

#include <cstddef>
#include <vector>

namespace branchlab {

// Uniform grid y_i = -L + i * (2L/N), i = 0..N-1, N a power of two.
class Grid1D {
public:
    Grid1D(double half_width, std::size_t points);

    double half_width() const noexcept { return half_width_; }
    std::size_t points() const noexcept { return points_; }
    double spacing() const noexcept { return 2.0 * half_width_ / static_cast<double>(points_); }
    double node(std::size_t i) const noexcept {
        return -half_width_ + static_cast<double>(i) * spacing();
    }
    std::vector<double> nodes() const;
    // Index of the node nearest to y (clamped into the grid).
    std::size_t nearest(double y) const noexcept;
    // Linear interpolation of nodal values at y; constant extension outside.
    double interpolate(const std::vector<double>& values, double y) const;

    bool operator==(const Grid1D&) const = default;

private:
    double half_width_;
    std::size_t points_;
};

// Trapezoid integral of nodal values (the grid is wide enough that the
// endpoint correction is irrelevant for compactly supported data).
double grid_integral(const Grid1D& grid, const std::vector<double>& values);

}  // namespace branchlab
