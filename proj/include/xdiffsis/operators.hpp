#pragma once

#include <cmath>
#include <utility>

#include "grid.hpp"
#include "linalg.hpp"

namespace xdiffsis {

/// Denominator floor for the 0/0 regularization of S I/(S+I). Far below any
/// population scale, so physical states are never perturbed.
inline constexpr double kIncidenceDenominatorFloor = 1e-30;

/// Flux-form second difference with zero flux through the two boundary
/// faces: (F_{j+1/2} - F_{j-1/2})/h, F_{j+1/2} = (u_{j+1} - u_j)/h.
/// Annihilates constants and integrates to zero by telescoping.
inline Field neumann_laplacian(const Field& u, const Grid1D& grid) {
    require_on_grid(u, grid);
    const std::size_t n = grid.n_cells;
    const double h = grid.h();
    Field out(n);
    double flux_left = 0.0; // boundary face
    for (std::size_t j = 0; j < n; ++j) {
        const double flux_right = (j + 1 < n) ? (u[j + 1] - u[j]) / h : 0.0;
        out[j] = (flux_right - flux_left) / h;
        flux_left = flux_right;
    }
    return out;
}

/// Divergence of chi * S grad(I) with arithmetic-mean face values for S and
/// zero boundary-face flux. Collapses to chi * s0 * neumann_laplacian(I)
/// exactly when S is the constant s0.
inline Field cross_diffusion_divergence(const Field& S, const Field& I, const Grid1D& grid,
                                        double chi) {
    require_on_grid(S, grid, "S");
    require_on_grid(I, grid, "I");
    const std::size_t n = grid.n_cells;
    const double h = grid.h();
    Field out(n);
    double flux_left = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double flux_right =
            (j + 1 < n) ? chi * (0.5 * (S[j] + S[j + 1])) * ((I[j + 1] - I[j]) / h) : 0.0;
        out[j] = (flux_right - flux_left) / h;
        flux_left = flux_right;
    }
    return out;
}

/// Frequency-dependent incidence beta S I/(S+I), extended by zero where the
/// denominator vanishes. Bounded by beta*min(S, I) pointwise.
inline Field incidence(const Field& S, const Field& I, const Field& beta) {
    const std::size_t n = S.size();
    if (I.size() != n || beta.size() != n) throw InvalidInput("incidence: field size mismatch");
    Field out(n);
    for (std::size_t j = 0; j < n; ++j) {
        if (S[j] < 0.0 || I[j] < 0.0)
            throw InvalidInput("incidence: negative density at cell " + std::to_string(j));
        const double den = S[j] + I[j];
        out[j] = (den <= kIncidenceDenominatorFloor) ? 0.0 : beta[j] * S[j] * I[j] / den;
    }
    return out;
}

/// Reaction pair for the conserved model: dI = incidence - gamma I and
/// dS = -dI as a bit-identical negation, so the pointwise sum is exactly zero.
inline std::pair<Field, Field> reaction_model1(const Field& S, const Field& I, const Field& beta,
                                               const Field& gamma) {
    Field dI = incidence(S, I, beta);
    for (std::size_t j = 0; j < dI.size(); ++j) dI[j] -= gamma[j] * I[j];
    Field dS(dI.size());
    for (std::size_t j = 0; j < dI.size(); ++j) dS[j] = -dI[j];
    return {std::move(dS), std::move(dI)};
}

/// Susceptible reaction for the source model: Lambda - S - incidence + gamma I.
inline Field reaction_model2_S(const Field& S, const Field& I, const Field& beta,
                               const Field& gamma, const Field& lambda) {
    Field out = incidence(S, I, beta);
    for (std::size_t j = 0; j < out.size(); ++j)
        out[j] = lambda[j] - S[j] - out[j] + gamma[j] * I[j];
    return out;
}

/// Matrix form of d * (-neumann_laplacian): symmetric positive semidefinite
/// tridiagonal. Building block for the implicit diffusion solves and the
/// eigenvalue problems.
inline TridiagonalSystem scaled_neg_laplacian_matrix(const Grid1D& grid, double d) {
    const std::size_t n = grid.n_cells;
    const double w = d / (grid.h() * grid.h());
    TridiagonalSystem m(n);
    for (std::size_t j = 0; j < n; ++j) {
        double diag = 0.0;
        if (j > 0) {
            m.sub[j] = -w;
            diag += w;
        }
        if (j + 1 < n) {
            m.super[j] = -w;
            diag += w;
        }
        m.diag[j] = diag;
    }
    return m;
}

/// Id + dt * d * (-L): the implicit Euler diffusion matrix. Strictly
/// diagonally dominant M-matrix for dt, d > 0, so its inverse is positive.
inline TridiagonalSystem implicit_diffusion_matrix(const Grid1D& grid, double dt_times_d) {
    TridiagonalSystem m = scaled_neg_laplacian_matrix(grid, dt_times_d);
    for (std::size_t j = 0; j < m.size(); ++j) m.diag[j] += 1.0;
    return m;
}

} // namespace xdiffsis
