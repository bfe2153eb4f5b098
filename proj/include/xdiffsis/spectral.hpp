#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "grid.hpp"
#include "linalg.hpp"
#include "operators.hpp"

namespace xdiffsis {

/// Principal eigenpair of A = d_I * (-L) + diag(gamma - beta).
struct EigenResult {
    double lambda_star = 0.0;
    Field phi_star;      // positive, normalized to max = 1
    long iterations = 0;
    double residual = 0.0;
};

/// Largest generalized eigenvalue of diag(beta) phi = mu (d_I (-L) + diag(gamma)) phi.
struct R0Result {
    double r0 = 0.0;
    Field maximizer;     // nonnegative, normalized to max = 1
    long iterations = 0;
    double residual = 0.0;
};

struct SignConsistencyReport {
    double lambda_star = 0.0;
    double r0 = 0.0;
    bool pass = false;
};

namespace detail {

inline Field random_positive_start(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    Field v(n);
    for (double& x : v) x = u(rng);
    return v;
}

inline TridiagonalSystem eigen_operator(double d_I, const Field& beta, const Field& gamma,
                                        const Grid1D& grid) {
    TridiagonalSystem a = scaled_neg_laplacian_matrix(grid, d_I);
    for (std::size_t j = 0; j < a.size(); ++j) a.diag[j] += gamma[j] - beta[j];
    return a;
}

inline double row_abs_norm(const TridiagonalSystem& m) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.size(); ++j)
        s = std::max(s, std::abs(m.sub[j]) + std::abs(m.diag[j]) + std::abs(m.super[j]));
    return s;
}

/// Quadratic form v' (d (-L) + diag(q)) v evaluated in energy form
/// d/h^2 sum (v_{j+1}-v_j)^2 + sum q_j v_j^2, which is free of the large
/// cancellations the matrix-vector route suffers when d/h^2 dominates.
inline double energy_quadratic_form(const Field& v, double d, const Field& q,
                                    const Grid1D& grid) {
    const double inv_h2 = 1.0 / (grid.h() * grid.h());
    double grad = 0.0, pot = 0.0;
    for (std::size_t j = 0; j + 1 < v.size(); ++j) {
        const double dv = v[j + 1] - v[j];
        grad += dv * dv;
    }
    for (std::size_t j = 0; j < v.size(); ++j) pot += q[j] * v[j] * v[j];
    return d * inv_h2 * grad + pot;
}

} // namespace detail

/// Smallest eigenvalue and positive eigenfunction of the symmetric operator
/// A = -d_I L + diag(gamma - beta), by inverse iteration with the shift
/// min(gamma - beta) - 1. The shifted matrix is a strictly diagonally
/// dominant M-matrix, so the iteration preserves positivity and converges to
/// the signless principal mode from any positive start.
inline EigenResult principal_eigenpair(double d_I, const Field& beta, const Field& gamma,
                                       const Grid1D& grid, std::uint64_t seed = 0) {
    require_on_grid(beta, grid, "beta");
    require_on_grid(gamma, grid, "gamma");
    if (!(d_I > 0.0)) throw InvalidInput("principal_eigenpair: d_I must be positive");

    const std::size_t n = grid.n_cells;
    const TridiagonalSystem a = detail::eigen_operator(d_I, beta, gamma, grid);

    double shift = gamma[0] - beta[0];
    for (std::size_t j = 0; j < n; ++j) shift = std::min(shift, gamma[j] - beta[j]);
    shift -= 1.0;

    TridiagonalSystem shifted = a;
    for (std::size_t j = 0; j < n; ++j) shifted.diag[j] -= shift;

    Field gap(n);
    for (std::size_t j = 0; j < n; ++j) gap[j] = gamma[j] - beta[j];

    Field v = detail::random_positive_start(n, seed);
    const long max_iter = 10000;
    // 1e-10 is not reachable once the round-off of applying A itself exceeds
    // it, so the bar floors at that level.
    const double tol =
        std::max(1e-10, 8.0 * std::numeric_limits<double>::epsilon() * detail::row_abs_norm(a));
    double lambda = 0.0, residual = 0.0;
    for (long it = 1; it <= max_iter; ++it) {
        Field w = solve_tridiagonal(shifted, v);
        const double m = max_value(w);
        for (double& x : w) x /= m;
        v = std::move(w);

        double den = 0.0;
        for (std::size_t j = 0; j < n; ++j) den += v[j] * v[j];
        lambda = detail::energy_quadratic_form(v, d_I, gap, grid) / den;

        const Field av = apply_tridiagonal(a, v);
        residual = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            residual = std::max(residual, std::abs(av[j] - lambda * v[j]));
        if (residual <= tol) { // phi is normalized to max = 1
            EigenResult r;
            r.lambda_star = lambda;
            r.phi_star = std::move(v);
            r.iterations = it;
            r.residual = residual;
            if (min_value(r.phi_star) <= 0.0)
                throw ConvergenceError("principal_eigenpair: eigenfunction lost positivity",
                                       residual, it);
            return r;
        }
    }
    throw ConvergenceError("principal_eigenpair: no convergence after 10000 iterations", residual,
                           max_iter);
}

/// Basic reproduction number as the largest eigenvalue of M^{-1} B with
/// B = diag(beta) and M = d_I (-L) + diag(gamma), by power iteration with
/// M-inner-product normalization.
inline R0Result basic_reproduction_number(double d_I, const Field& beta, const Field& gamma,
                                          const Grid1D& grid, std::uint64_t seed = 0) {
    require_on_grid(beta, grid, "beta");
    require_on_grid(gamma, grid, "gamma");
    if (!(d_I > 0.0)) throw InvalidInput("basic_reproduction_number: d_I must be positive");

    const std::size_t n = grid.n_cells;
    TridiagonalSystem m = scaled_neg_laplacian_matrix(grid, d_I);
    for (std::size_t j = 0; j < n; ++j) m.diag[j] += gamma[j];

    Field v = detail::random_positive_start(n, seed);
    const long max_iter = 50000;
    const double op_scale = detail::row_abs_norm(m) + max_value(beta);
    double mu = 0.0, residual = 0.0;
    for (long it = 1; it <= max_iter; ++it) {
        Field bv(n);
        for (std::size_t j = 0; j < n; ++j) bv[j] = beta[j] * v[j];
        Field w = solve_tridiagonal(m, bv);

        const double mnorm =
            std::sqrt(detail::energy_quadratic_form(w, d_I, gamma, grid));
        for (double& x : w) x /= mnorm;
        v = std::move(w);

        // Rayleigh quotient (energy form) and eigen-residual.
        Field bw(n);
        for (std::size_t j = 0; j < n; ++j) bw[j] = beta[j] * v[j];
        double rn = 0.0;
        for (std::size_t j = 0; j < n; ++j) rn += v[j] * bw[j];
        mu = rn / detail::energy_quadratic_form(v, d_I, gamma, grid);

        const Field mv = apply_tridiagonal(m, v);
        residual = 0.0;
        double scale = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            residual = std::max(residual, std::abs(bw[j] - mu * mv[j]));
            scale = std::max(scale, std::abs(bw[j]));
        }
        const double tol = std::max(
            1e-12 * scale, 8.0 * std::numeric_limits<double>::epsilon() *
                               std::max(1.0, mu) * op_scale * sup_norm(v));
        if (residual <= tol) {
            R0Result r;
            r.r0 = mu;
            const double vmax = max_value(v);
            for (double& x : v) x /= vmax;
            r.maximizer = std::move(v);
            r.iterations = it;
            r.residual = residual;
            if (!(r.r0 > 0.0))
                throw ConvergenceError("basic_reproduction_number: nonpositive R0", residual, it);
            return r;
        }
    }
    throw ConvergenceError("basic_reproduction_number: no convergence after 50000 iterations",
                           residual, max_iter);
}

/// Checks that 1 - R0 and lambda_star carry the same sign; magnitudes below
/// 1e-8 count as zero on both sides.
inline SignConsistencyReport sign_consistency(double d_I, const Field& beta, const Field& gamma,
                                              const Grid1D& grid, std::uint64_t seed = 0) {
    SignConsistencyReport rep;
    rep.lambda_star = principal_eigenpair(d_I, beta, gamma, grid, seed).lambda_star;
    rep.r0 = basic_reproduction_number(d_I, beta, gamma, grid, seed).r0;
    auto sgn = [](double x) { return (std::abs(x) < 1e-8) ? 0 : (x > 0 ? 1 : -1); };
    rep.pass = sgn(1.0 - rep.r0) == sgn(rep.lambda_star);
    return rep;
}

/// Critical diffusion rate d_I* with R0(d_I*) = 1, by bisection in log d_I.
/// Exists only when the habitat is low-risk on average (int beta < int gamma)
/// yet contains high-risk sites (max beta/gamma > 1); R0 is strictly
/// decreasing in d_I, so a verified sign-change bracket pins the root.
inline double critical_diffusion(const Field& beta, const Field& gamma, const Grid1D& grid,
                                 double d_lo, double d_hi, std::uint64_t seed = 0) {
    require_on_grid(beta, grid, "beta");
    require_on_grid(gamma, grid, "gamma");
    if (integrate(beta, grid) >= integrate(gamma, grid))
        throw InvalidInput(
            "critical_diffusion: int(beta) >= int(gamma), so R0 > 1 for every d_I and no "
            "threshold exists");
    double ratio_max = 0.0;
    for (std::size_t j = 0; j < grid.n_cells; ++j)
        ratio_max = std::max(ratio_max, beta[j] / gamma[j]);
    if (ratio_max <= 1.0)
        throw InvalidInput(
            "critical_diffusion: max(beta/gamma) <= 1, so R0 < 1 for every d_I and no threshold "
            "exists");
    if (!(0.0 < d_lo && d_lo < d_hi))
        throw InvalidInput("critical_diffusion: need 0 < d_lo < d_hi");

    const double r_lo = basic_reproduction_number(d_lo, beta, gamma, grid, seed).r0;
    const double r_hi = basic_reproduction_number(d_hi, beta, gamma, grid, seed).r0;
    if (!(r_lo > 1.0 && r_hi < 1.0))
        throw InvalidInput("critical_diffusion: bracket must satisfy R0(d_lo) > 1 > R0(d_hi)");

    double lo = d_lo, hi = d_hi;
    while ((hi - lo) > 1e-8 * lo) {
        const double mid = std::sqrt(lo * hi);
        const double r = basic_reproduction_number(mid, beta, gamma, grid, seed).r0;
        if (r > 1.0)
            lo = mid;
        else
            hi = mid;
    }
    return std::sqrt(lo * hi);
}

} // namespace xdiffsis
