#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "grid.hpp"

namespace xdiffsis {

/// Closed family of coefficient profiles used by the experiments: constants,
/// affine ramps, cosine bumps, and a raw-samples escape hatch. No expression
/// parsing.
struct CoefficientSpec {
    enum class Kind { Constant, Affine, Cosine, Samples };

    Kind kind = Kind::Constant;
    double a = 1.0;       // constant value, affine/cosine offset
    double b = 0.0;       // affine slope, cosine amplitude
    int k = 1;            // cosine wavenumber: a + b cos(k pi (x - x_left)/|Omega|)
    Field samples;        // Kind::Samples only
    bool positive = false; // reject non-positive evaluations

    static CoefficientSpec constant(double value, bool positive = false) {
        CoefficientSpec s;
        s.kind = Kind::Constant;
        s.a = value;
        s.positive = positive;
        return s;
    }
    static CoefficientSpec affine(double a, double b, bool positive = false) {
        CoefficientSpec s;
        s.kind = Kind::Affine;
        s.a = a;
        s.b = b;
        s.positive = positive;
        return s;
    }
    static CoefficientSpec cosine(double a, double b, int k, bool positive = false) {
        CoefficientSpec s;
        s.kind = Kind::Cosine;
        s.a = a;
        s.b = b;
        s.k = k;
        s.positive = positive;
        return s;
    }
    static CoefficientSpec from_samples(Field values, bool positive = false) {
        CoefficientSpec s;
        s.kind = Kind::Samples;
        s.samples = std::move(values);
        s.positive = positive;
        return s;
    }
};

/// Evaluate a coefficient spec at the cell centers. Raw samples are returned
/// verbatim. If the spec is flagged positive, any non-positive value is
/// rejected with the offending cell index.
inline Field evaluate_spec(const CoefficientSpec& spec, const Grid1D& grid) {
    Field out(grid.n_cells);
    switch (spec.kind) {
    case CoefficientSpec::Kind::Constant:
        for (std::size_t j = 0; j < grid.n_cells; ++j) out[j] = spec.a;
        break;
    case CoefficientSpec::Kind::Affine:
        for (std::size_t j = 0; j < grid.n_cells; ++j) out[j] = spec.a + spec.b * grid.center(j);
        break;
    case CoefficientSpec::Kind::Cosine: {
        const double scale = static_cast<double>(spec.k) * std::numbers::pi / grid.measure();
        for (std::size_t j = 0; j < grid.n_cells; ++j)
            out[j] = spec.a + spec.b * std::cos(scale * (grid.center(j) - grid.x_left));
        break;
    }
    case CoefficientSpec::Kind::Samples:
        require_on_grid(spec.samples, grid, "CoefficientSpec samples");
        out = spec.samples;
        break;
    }
    if (spec.positive) {
        for (std::size_t j = 0; j < grid.n_cells; ++j)
            if (!(out[j] > 0.0))
                throw InvalidInput("coefficient must be positive on all cell centers; value " +
                                   std::to_string(out[j]) + " at cell " + std::to_string(j));
    }
    if (!all_finite(out))
        throw InvalidInput("coefficient evaluation produced a non-finite value");
    return out;
}

} // namespace xdiffsis
