#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "errors.hpp"

namespace xdiffsis {

/// Cell-centered samples, one value per grid cell.
using Field = std::vector<double>;

/// Uniform cell-centered mesh on (x_left, x_right) with zero-flux boundary
/// faces. Cell centers sit at x_left + (j + 1/2) h; the midpoint quadrature
/// of the constant-1 field reproduces the interval length exactly.
struct Grid1D {
    double x_left;
    double x_right;
    std::size_t n_cells;

    Grid1D(double xl, double xr, std::size_t n) : x_left(xl), x_right(xr), n_cells(n) {
        if (!(xr > xl))
            throw InvalidInput("Grid1D: x_right must exceed x_left");
        if (n < 4)
            throw InvalidInput("Grid1D: n_cells must be at least 4");
    }

    double h() const { return (x_right - x_left) / static_cast<double>(n_cells); }
    double measure() const { return x_right - x_left; }
    double center(std::size_t j) const { return x_left + (static_cast<double>(j) + 0.5) * h(); }
};

inline void require_on_grid(const Field& f, const Grid1D& grid, const char* what = "field") {
    if (f.size() != grid.n_cells)
        throw InvalidInput(std::string(what) + ": length does not match grid (" +
                           std::to_string(f.size()) + " vs " + std::to_string(grid.n_cells) + ")");
}

/// Midpoint-rule quadrature h * sum(f). Exact for affine integrands, O(h^2)
/// for smooth ones.
inline double integrate(const Field& f, const Grid1D& grid) {
    require_on_grid(f, grid);
    double s = 0.0;
    for (double v : f) s += v;
    return grid.h() * s;
}

inline Field constant_field(const Grid1D& grid, double value) {
    return Field(grid.n_cells, value);
}

inline double sup_norm(const Field& f) {
    double m = 0.0;
    for (double v : f) m = std::max(m, std::abs(v));
    return m;
}

inline double sup_diff(const Field& a, const Field& b) {
    double m = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
    return m;
}

inline double min_value(const Field& f) {
    double m = f.empty() ? 0.0 : f[0];
    for (double v : f) m = std::min(m, v);
    return m;
}

inline double max_value(const Field& f) {
    double m = f.empty() ? 0.0 : f[0];
    for (double v : f) m = std::max(m, v);
    return m;
}

inline bool all_finite(const Field& f) {
    for (double v : f)
        if (!std::isfinite(v)) return false;
    return true;
}

} // namespace xdiffsis
