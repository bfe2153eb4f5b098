#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "coefficients.hpp"
#include "grid.hpp"

namespace xdiffsis {

/// Conserved: closed habitat, total population fixed at N.
/// Source: open habitat with linear recruitment Lambda(x) - S.
enum class ModelKind { Conserved, Source };

struct ModelParams {
    ModelKind kind = ModelKind::Conserved;
    double d_S = 1.0;  // susceptible diffusivity, length^2/time
    double d_I = 1.0;  // infected diffusivity
    double chi = 0.0;  // cross-diffusion sensitivity, >= 0
    CoefficientSpec beta;    // transmission rate, > 0
    CoefficientSpec gamma;   // recovery rate, > 0
    double N = 1.0;          // Conserved: total mass
    CoefficientSpec lambda;  // Source: recruitment profile, > 0

    void validate() const {
        if (!(d_S > 0.0)) throw InvalidInput("d_S must be positive");
        if (!(d_I > 0.0)) throw InvalidInput("d_I must be positive");
        if (!(chi >= 0.0)) throw InvalidInput("chi must be nonnegative");
        if (kind == ModelKind::Conserved && !(N > 0.0))
            throw InvalidInput("N must be positive");
    }
};

/// Evolving pair of densities.
struct State {
    Field S;
    Field I;
    double t = 0.0;
};

/// ModelParams bound to a grid with the coefficient specs evaluated once.
/// beta, gamma (and lambda for the Source kind) are checked positive here.
struct Model {
    ModelParams params;
    Grid1D grid;
    Field beta;
    Field gamma;
    Field lambda; // empty for Conserved

    Model(const ModelParams& p, const Grid1D& g) : params(p), grid(g) {
        params.validate();
        CoefficientSpec b = p.beta;
        b.positive = true;
        CoefficientSpec c = p.gamma;
        c.positive = true;
        beta = evaluate_spec(b, grid);
        gamma = evaluate_spec(c, grid);
        if (p.kind == ModelKind::Source) {
            CoefficientSpec l = p.lambda;
            l.positive = true;
            lambda = evaluate_spec(l, grid);
        }
    }

    double beta_max() const { return max_value(beta); }
    double gamma_min() const { return min_value(gamma); }
};

} // namespace xdiffsis
