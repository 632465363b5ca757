#include "branchlab/grid.hpp"

#include <cmath>
#include <numeric>

#include "branchlab/error.hpp"

namespace branchlab {

Grid1D::Grid1D(double half_width, std::size_t points) : half_width_(half_width), points_(points) {
    if (!(half_width > 0.0 && std::isfinite(half_width)))
        throw ParameterError("grid half width must be positive");
    if (points < 8 || (points & (points - 1)) != 0)
        throw ParameterError("grid point count must be a power of two >= 8");
}

std::vector<double> Grid1D::nodes() const {
    std::vector<double> y(points_);
    for (std::size_t i = 0; i < points_; ++i) y[i] = node(i);
    return y;
}

std::size_t Grid1D::nearest(double y) const noexcept {
    const double x = std::round((y + half_width_) / spacing());
    if (x <= 0.0) return 0;
    if (x >= static_cast<double>(points_ - 1)) return points_ - 1;
    return static_cast<std::size_t>(x);
}

double Grid1D::interpolate(const std::vector<double>& values, double y) const {
    if (values.size() != points_) throw ParameterError("interpolate: value count does not match grid");
    const double x = (y + half_width_) / spacing();
    if (x <= 0.0) return values.front();
    if (x >= static_cast<double>(points_ - 1)) return values.back();
    const auto i = static_cast<std::size_t>(x);
    const double w = x - static_cast<double>(i);
    return (1.0 - w) * values[i] + w * values[i + 1];
}

double grid_integral(const Grid1D& grid, const std::vector<double>& values) {
    if (values.size() != grid.points()) throw ParameterError("integral: value count does not match grid");
    return grid.spacing() * std::accumulate(values.begin(), values.end(), 0.0);
}

}  // namespace branchlab
