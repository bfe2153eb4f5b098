#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "evolve.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "operators.hpp"
#include "spectral.hpp"

namespace xdiffsis {

/// Exponent guard tripped while evaluating the equilibrium map g; the outer
/// kappa bracket must shrink.
struct KappaOverflow : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Equilibrium of either model. kappa is meaningful for the conserved model
/// only (NaN otherwise). mass_residual is |int(S+I) - N| for the conserved
/// model and |int S - int Lambda| for the source model.
struct SteadyProfile {
    Field S;
    Field I;
    double kappa = std::numeric_limits<double>::quiet_NaN();
    double pde_residual = 0.0;
    double mass_residual = 0.0;
};

/// Susceptible density as a function of the normalized infected density:
/// g(Itilde) = (d_I/chi) [exp(kappa chi (1 - Itilde)/d_S) - 1], with the
/// analytic chi -> 0 form (kappa d_I/d_S)(1 - Itilde) selected below
/// chi = 1e-8 to dodge the cancellation in expm1/chi.
inline double g_of_Itilde(double itilde, double kappa, const ModelParams& params) {
    if (!(kappa > 0.0)) throw InvalidInput("g_of_Itilde: kappa must be positive");
    if (params.chi < 1e-8)
        return kappa * params.d_I / params.d_S * (1.0 - itilde);
    const double e = kappa * params.chi / params.d_S * (1.0 - itilde);
    if (e > 700.0)
        throw KappaOverflow("g_of_Itilde: exponent " + std::to_string(e) +
                            " would overflow; shrink the kappa bracket");
    return params.d_I / params.chi * std::expm1(e);
}

namespace detail {

struct ReductionTerms {
    Field g;       // susceptible map g(Itilde)
    Field f;       // beta g/(g + kappa Itilde) - gamma
    Field fprime;  // d f / d Itilde
};

inline ReductionTerms reduction_terms(const Field& itilde, double kappa, const Model& model) {
    const ModelParams& p = model.params;
    const std::size_t n = itilde.size();
    ReductionTerms t{Field(n), Field(n), Field(n)};
    const bool smooth_chi = p.chi >= 1e-8;
    const double a = smooth_chi ? kappa * p.chi / p.d_S : 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double g, gp;
        if (smooth_chi) {
            const double e = a * (1.0 - itilde[j]);
            if (e > 700.0)
                throw KappaOverflow("reduction: exponent overflow; shrink the kappa bracket");
            g = p.d_I / p.chi * std::expm1(e);
            gp = -(p.d_I / p.chi) * a * std::exp(e);
        } else {
            g = kappa * p.d_I / p.d_S * (1.0 - itilde[j]);
            gp = -kappa * p.d_I / p.d_S;
        }
        const double den = g + kappa * itilde[j];
        const double w = g / den;
        const double wp = kappa * (gp * itilde[j] - g) / (den * den);
        t.g[j] = g;
        t.f[j] = model.beta[j] * w - model.gamma[j];
        t.fprime[j] = model.beta[j] * wp;
    }
    return t;
}

inline Field reduction_residual(const Field& itilde, const ReductionTerms& t, const Model& model) {
    Field r = neumann_laplacian(itilde, model.grid);
    for (std::size_t j = 0; j < r.size(); ++j)
        r[j] = model.params.d_I * r[j] + itilde[j] * t.f[j];
    return r;
}

inline void clamp_unit_interval(Field& v) {
    for (double& x : v) x = std::clamp(x, 1e-12, 1.0 - 1e-12);
}

/// Global bound on -d/dItilde [g/(g + kappa Itilde)] over [0, 1]. The
/// steepest point sits near Itilde = 1 (where it approaches d_I/d_S), far
/// from wherever a mid-range iterate happens to be, so a pointwise local
/// estimate is not enough for the monotone sweep.
inline double weight_slope_bound(double kappa, const ModelParams& p) {
    const bool smooth_chi = p.chi >= 1e-8;
    const double a = smooth_chi ? kappa * p.chi / p.d_S : 0.0;
    double worst = 0.0;
    const int samples = 2000;
    for (int s = 0; s <= samples; ++s) {
        const double it = static_cast<double>(s) / samples;
        double g, gp;
        if (smooth_chi) {
            const double e = a * (1.0 - it);
            if (e > 300.0) continue; // g astronomically large, slope ~ 0 there
            g = p.d_I / p.chi * std::expm1(e);
            gp = -(p.d_I / p.chi) * a * std::exp(e);
        } else {
            g = kappa * p.d_I / p.d_S * (1.0 - it);
            gp = -kappa * p.d_I / p.d_S;
        }
        const double den = g + kappa * it;
        if (!(den > 0.0)) continue;
        worst = std::max(worst, -kappa * (gp * it - g) / (den * den));
    }
    return worst;
}

} // namespace detail

/// Solves the scalar equilibrium reduction d_I lap(Itilde) + Itilde f(x, Itilde) = 0
/// for the unique solution strictly inside (0, 1). A monotone sub-solution
/// sweep started from eps*phi* walks the iterate into the positive branch
/// (zero is also a root, so a bare Newton start near zero would collapse
/// onto it); damped Newton then sharpens the residual. Pass a warm start to
/// begin with Newton directly.
inline Field solve_scalar_reduction(double kappa, const Model& model,
                                    const EigenResult* eig = nullptr,
                                    const Field* warm_start = nullptr) {
    const Grid1D& grid = model.grid;
    const std::size_t n = grid.n_cells;
    const double rate_scale = std::max(1.0, max_value(model.beta) + max_value(model.gamma));
    const double tol = 1e-11 * rate_scale;

    EigenResult local_eig;
    auto ensure_eig = [&]() -> const EigenResult& {
        if (eig) return *eig;
        if (local_eig.phi_star.empty())
            local_eig = principal_eigenpair(model.params.d_I, model.beta, model.gamma, grid);
        return local_eig;
    };

    auto newton = [&](Field itilde) -> std::optional<Field> {
        detail::clamp_unit_interval(itilde);
        detail::ReductionTerms t = detail::reduction_terms(itilde, kappa, model);
        Field r = detail::reduction_residual(itilde, t, model);
        double rnorm = sup_norm(r);
        for (int iter = 0; iter < 100; ++iter) {
            if (rnorm <= tol) return itilde;
            // J = d_I L + diag(f + Itilde f'); L carried as -(d_I (-L)).
            TridiagonalSystem jac = scaled_neg_laplacian_matrix(grid, model.params.d_I);
            for (std::size_t j = 0; j < n; ++j) {
                jac.diag[j] = -jac.diag[j] + t.f[j] + itilde[j] * t.fprime[j];
                jac.sub[j] = -jac.sub[j];
                jac.super[j] = -jac.super[j];
            }
            Field rhs(n);
            for (std::size_t j = 0; j < n; ++j) rhs[j] = -r[j];
            Field delta = solve_tridiagonal(jac, rhs);

            double step = 1.0;
            bool accepted = false;
            for (int halve = 0; halve <= 40; ++halve) {
                Field trial(n);
                for (std::size_t j = 0; j < n; ++j) trial[j] = itilde[j] + step * delta[j];
                detail::clamp_unit_interval(trial);
                detail::ReductionTerms tt = detail::reduction_terms(trial, kappa, model);
                Field rr = detail::reduction_residual(trial, tt, model);
                const double rrnorm = sup_norm(rr);
                if (rrnorm < rnorm) {
                    itilde = std::move(trial);
                    t = std::move(tt);
                    r = std::move(rr);
                    rnorm = rrnorm;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) return std::nullopt;
        }
        return std::nullopt;
    };

    // Warm-started Newton, with fallback to the full globalized path.
    if (warm_start && warm_start->size() == n) {
        if (auto sol = newton(*warm_start); sol && min_value(*sol) > 1e-10) return *sol;
    }

    const EigenResult& ev = ensure_eig();
    if (!(ev.lambda_star < 0.0))
        throw InvalidInput(
            "solve_scalar_reduction: lambda* >= 0 (R0 <= 1), no positive solution exists");

    // Largest eps in (0, 1/2] with eps*phi* a discrete sub-solution.
    Field sub;
    double eps = 0.5;
    const double slack = -1e-12 * rate_scale;
    for (; eps >= 1e-9; eps *= 0.5) {
        Field cand(n);
        for (std::size_t j = 0; j < n; ++j) cand[j] = eps * ev.phi_star[j];
        detail::ReductionTerms t = detail::reduction_terms(cand, kappa, model);
        Field r = detail::reduction_residual(cand, t, model);
        if (min_value(r) >= slack) {
            sub = std::move(cand);
            break;
        }
    }
    if (sub.empty())
        throw ConvergenceError("solve_scalar_reduction: no sub-solution eps*phi* found", 0.0, 0);

    // Monotone sweep (d_I(-L) + c) u+ = c u + u f(u) with c covering the
    // nonlinearity over the whole unit interval: climbs from the sub-solution
    // toward the positive root without crossing 1. Newton takes over as soon
    // as it can finish the job from the current iterate.
    const double c = 1.0 + max_value(model.gamma) +
                     max_value(model.beta) * detail::weight_slope_bound(kappa, model.params);
    TridiagonalSystem sweep = scaled_neg_laplacian_matrix(grid, model.params.d_I);
    for (std::size_t j = 0; j < n; ++j) sweep.diag[j] += c;

    Field itilde = std::move(sub);
    detail::ReductionTerms t = detail::reduction_terms(itilde, kappa, model);
    const long budget = std::max<long>(3000, static_cast<long>(40.0 * c));
    long since_attempt = 0;
    for (long iter = 0; iter < budget; ++iter) {
        Field rhs(n);
        for (std::size_t j = 0; j < n; ++j) rhs[j] = c * itilde[j] + itilde[j] * t.f[j];
        Field next = solve_tridiagonal(sweep, rhs);
        const double move = sup_diff(next, itilde);
        itilde = std::move(next);
        detail::clamp_unit_interval(itilde);
        t = detail::reduction_terms(itilde, kappa, model);
        ++since_attempt;
        // c * move estimates the residual, so it stays meaningful when a
        // large shift makes the per-iteration moves tiny far from the root.
        const bool settled = c * move < 1e-4 * rate_scale;
        if (settled || since_attempt >= 300) {
            since_attempt = 0;
            if (auto sol = newton(itilde); sol && min_value(*sol) > 1e-10) return *sol;
            if (settled) break;
        }
    }

    auto sol = newton(itilde);
    if (sol && min_value(*sol) > 1e-10) return *sol;
    throw ConvergenceError("solve_scalar_reduction: no convergence to the positive branch",
                           sup_norm(detail::reduction_residual(itilde, t, model)), budget);
}

/// Mass mismatch of the reconstructed equilibrium at a given kappa:
/// int g(Itilde) + kappa int Itilde - N, with Itilde = Itilde(kappa) the
/// reduction solution. Negative near kappa = 0, positive once the
/// exponential term dominates.
inline double kappa_residual(double kappa, const Model& model, const EigenResult* eig = nullptr,
                             Field* itilde_out = nullptr, const Field* warm_start = nullptr) {
    Field itilde = solve_scalar_reduction(kappa, model, eig, warm_start);
    double total = 0.0;
    for (std::size_t j = 0; j < itilde.size(); ++j)
        total += g_of_Itilde(itilde[j], kappa, model.params) + kappa * itilde[j];
    if (itilde_out) *itilde_out = std::move(itilde);
    return model.grid.h() * total - model.params.N;
}

/// Discrete steady-state residual (r_S, r_I) for either model kind.
inline std::pair<Field, Field> steady_residual(const Model& model, const Field& S,
                                               const Field& I) {
    const Grid1D& grid = model.grid;
    const std::size_t n = grid.n_cells;
    Field rS = neumann_laplacian(S, grid);
    Field rI = neumann_laplacian(I, grid);
    const Field cross = cross_diffusion_divergence(S, I, grid, model.params.chi);
    const Field inc = incidence(S, I, model.beta);
    for (std::size_t j = 0; j < n; ++j) {
        rI[j] = model.params.d_I * rI[j] + inc[j] - model.gamma[j] * I[j];
        double s = model.params.d_S * rS[j] + cross[j] - inc[j] + model.gamma[j] * I[j];
        if (model.params.kind == ModelKind::Source) s += model.lambda[j] - S[j];
        rS[j] = s;
    }
    return {std::move(rS), std::move(rI)};
}

namespace detail {

/// Fills the four Jacobian blocks of (r_S, r_I) with respect to (S, I) into
/// a dense (2n SIZE) matrix through the row maps rowS/rowI; a negative row
/// index drops that equation.
inline void fill_steady_jacobian(const Model& model, const Field& S, const Field& I,
                                 std::vector<double>& jac, std::size_t dim,
                                 const std::vector<long>& rowS, const std::vector<long>& rowI) {
    const Grid1D& grid = model.grid;
    const std::size_t n = grid.n_cells;
    const double h = grid.h();
    const double inv_h2 = 1.0 / (h * h);
    const double dS = model.params.d_S, dI = model.params.d_I, chi = model.params.chi;
    auto at = [&](long row, std::size_t col) -> double& { return jac[row * dim + col]; };
    auto colS = [](std::size_t j) { return j; };
    auto colI = [&](std::size_t j) { return n + j; };

    for (std::size_t j = 0; j < n; ++j) {
        // Diffusion stencils.
        const double wS = dS * inv_h2, wI = dI * inv_h2;
        double diagS = 0.0, diagI = 0.0;
        if (j > 0) {
            if (rowS[j] >= 0) at(rowS[j], colS(j - 1)) += wS;
            if (rowI[j] >= 0) at(rowI[j], colI(j - 1)) += wI;
            diagS -= wS;
            diagI -= wI;
        }
        if (j + 1 < n) {
            if (rowS[j] >= 0) at(rowS[j], colS(j + 1)) += wS;
            if (rowI[j] >= 0) at(rowI[j], colI(j + 1)) += wI;
            diagS -= wS;
            diagI -= wI;
        }
        if (rowS[j] >= 0) at(rowS[j], colS(j)) += diagS;
        if (rowI[j] >= 0) at(rowI[j], colI(j)) += diagI;

        // Reactions.
        const double den = S[j] + I[j];
        double dinc_dS = 0.0, dinc_dI = 0.0;
        if (den > kIncidenceDenominatorFloor) {
            dinc_dS = model.beta[j] * I[j] * I[j] / (den * den);
            dinc_dI = model.beta[j] * S[j] * S[j] / (den * den);
        }
        if (rowI[j] >= 0) {
            at(rowI[j], colS(j)) += dinc_dS;
            at(rowI[j], colI(j)) += dinc_dI - model.gamma[j];
        }
        if (rowS[j] >= 0) {
            at(rowS[j], colS(j)) += -dinc_dS;
            at(rowS[j], colI(j)) += -dinc_dI + model.gamma[j];
            if (model.params.kind == ModelKind::Source) at(rowS[j], colS(j)) += -1.0;
        }
    }

    // Cross-diffusion flux derivatives, one interior face at a time.
    for (std::size_t face = 0; face + 1 < n; ++face) {
        const std::size_t jl = face, jr = face + 1;
        const double dF_dSl = chi * (I[jr] - I[jl]) / (2.0 * h);
        const double dF_dIl = -chi * 0.5 * (S[jl] + S[jr]) / h;
        // r_S[jl] += F/h, r_S[jr] -= F/h.
        if (rowS[jl] >= 0) {
            at(rowS[jl], colS(jl)) += dF_dSl / h;
            at(rowS[jl], colS(jr)) += dF_dSl / h;
            at(rowS[jl], colI(jl)) += dF_dIl / h;
            at(rowS[jl], colI(jr)) += -dF_dIl / h;
        }
        if (rowS[jr] >= 0) {
            at(rowS[jr], colS(jl)) -= dF_dSl / h;
            at(rowS[jr], colS(jr)) -= dF_dSl / h;
            at(rowS[jr], colI(jl)) -= dF_dIl / h;
            at(rowS[jr], colI(jr)) -= -dF_dIl / h;
        }
    }
}

struct NewtonPolishResult {
    Field S, I;
    double residual = 0.0;
    int iterations = 0;
};

/// Damped Newton on the coupled discrete steady system. For the conserved
/// model the 2n PDE rows sum to zero identically, so r_S at cell 0 is
/// replaced by the mass constraint; the source model is square as-is.
inline NewtonPolishResult newton_polish(const Model& model, Field S, Field I) {
    const Grid1D& grid = model.grid;
    const std::size_t n = grid.n_cells;
    const std::size_t dim = 2 * n;
    const bool conserved = model.params.kind == ModelKind::Conserved;

    std::vector<long> rowS(n), rowI(n);
    if (conserved) {
        for (std::size_t j = 0; j < n; ++j) rowI[j] = static_cast<long>(j);
        rowS[0] = -1; // replaced by the mass row
        for (std::size_t j = 1; j < n; ++j) rowS[j] = static_cast<long>(n + j - 1);
    } else {
        for (std::size_t j = 0; j < n; ++j) {
            rowS[j] = static_cast<long>(j);
            rowI[j] = static_cast<long>(n + j);
        }
    }
    const long mass_row = static_cast<long>(dim - 1);

    auto residual_vec = [&](const Field& s, const Field& i) {
        auto [rS, rI] = steady_residual(model, s, i);
        std::vector<double> F(dim, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (rowI[j] >= 0) F[rowI[j]] = rI[j];
            if (rowS[j] >= 0) F[rowS[j]] = rS[j];
        }
        if (conserved)
            F[mass_row] = integrate(s, grid) + integrate(i, grid) - model.params.N;
        return F;
    };
    auto norm_inf = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    };

    std::vector<double> F = residual_vec(S, I);
    const double tol =
        1e-10 * std::max({1.0, sup_norm(S) + sup_norm(I), conserved ? model.params.N : 0.0});

    // Row scales taken from the Jacobian: the I rows carry d_I/h^2 while the
    // S rows carry d_S/h^2, which can sit many orders apart; the linear
    // solve works on the row-equilibrated system.
    std::vector<double> row_scale(dim, 1.0);

    NewtonPolishResult out;
    double fnorm = norm_inf(F);
    for (int iter = 0; iter < 50; ++iter) {
        if (fnorm <= tol) break;
        std::vector<double> jac(dim * dim, 0.0);
        fill_steady_jacobian(model, S, I, jac, dim, rowS, rowI);
        if (conserved) {
            for (std::size_t j = 0; j < dim; ++j) jac[mass_row * dim + j] = grid.h();
        }
        const std::vector<double> jac_raw = jac;
        for (std::size_t i = 0; i < dim; ++i) {
            double m = 0.0;
            for (std::size_t j = 0; j < dim; ++j) m = std::max(m, std::abs(jac[i * dim + j]));
            row_scale[i] = (m > 0.0) ? m : 1.0;
            for (std::size_t j = 0; j < dim; ++j) jac[i * dim + j] /= row_scale[i];
        }
        DenseLU lu = lu_factor(std::move(jac), dim);
        auto solve_scaled = [&](const std::vector<double>& rhs) {
            std::vector<double> x(dim);
            for (std::size_t j = 0; j < dim; ++j) x[j] = rhs[j] / row_scale[j];
            lu_solve(lu, x);
            return x;
        };
        std::vector<double> neg_f(dim);
        for (std::size_t j = 0; j < dim; ++j) neg_f[j] = -F[j];
        std::vector<double> delta = solve_scaled(neg_f);
        // One round of iterative refinement against the unscaled Jacobian.
        std::vector<double> lin_res(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            double s = -F[i];
            const double* row = jac_raw.data() + i * dim;
            for (std::size_t j = 0; j < dim; ++j) s -= row[j] * delta[j];
            lin_res[i] = s;
        }
        const std::vector<double> corr = solve_scaled(lin_res);
        for (std::size_t j = 0; j < dim; ++j) delta[j] += corr[j];

        double step = 1.0;
        bool accepted = false;
        for (int halve = 0; halve <= 40; ++halve) {
            Field St(n), It(n);
            bool positive = true;
            for (std::size_t j = 0; j < n; ++j) {
                St[j] = S[j] + step * delta[j];
                It[j] = I[j] + step * delta[n + j];
                if (!(St[j] > 0.0) || !(It[j] > 0.0)) { positive = false; break; }
            }
            if (positive) {
                std::vector<double> Ft = residual_vec(St, It);
                const double fn = norm_inf(Ft);
                if (fn < fnorm) {
                    S = std::move(St);
                    I = std::move(It);
                    F = std::move(Ft);
                    fnorm = fn;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!accepted)
            throw ConvergenceError("newton_polish: damping failed to reduce the residual", fnorm,
                                   iter);
        out.iterations = iter + 1;
    }
    if (fnorm > tol)
        throw ConvergenceError("newton_polish: residual did not reach tolerance", fnorm, 50);
    out.S = std::move(S);
    out.I = std::move(I);
    out.residual = fnorm;
    return out;
}

inline SteadyProfile finish_profile(const Model& model, Field S, Field I, double kappa) {
    SteadyProfile p;
    auto [rS, rI] = steady_residual(model, S, I);
    const double scale = std::max(1.0, sup_norm(S) + sup_norm(I));
    p.pde_residual = std::max(sup_norm(rS), sup_norm(rI)) / scale;
    if (model.params.kind == ModelKind::Conserved)
        p.mass_residual =
            std::abs(integrate(S, model.grid) + integrate(I, model.grid) - model.params.N);
    else
        p.mass_residual =
            std::abs(integrate(S, model.grid) - integrate(model.lambda, model.grid));
    p.S = std::move(S);
    p.I = std::move(I);
    p.kappa = kappa;
    return p;
}

} // namespace detail

struct EndemicModel1Result {
    SteadyProfile profile;
    Field itilde; // reduction solution at the accepted kappa
};

/// Unique endemic equilibrium of the conserved model for R0 > 1: safeguarded
/// bisection on the kappa mass constraint, reconstruction S = g(Itilde),
/// I = kappa Itilde, then a coupled Newton polish so the reported profile
/// satisfies the discrete steady system itself, not just the reduction.
inline EndemicModel1Result solve_endemic_model1_full(const Model& model,
                                                     const Field* itilde_init = nullptr,
                                                     double kappa_init = 0.0) {
    if (model.params.kind != ModelKind::Conserved)
        throw InvalidInput("solve_endemic_model1: model kind must be Conserved");
    const Grid1D& grid = model.grid;
    const double N = model.params.N;

    const EigenResult eig =
        principal_eigenpair(model.params.d_I, model.beta, model.gamma, grid);
    if (!(eig.lambda_star < 0.0))
        throw InvalidInput("solve_endemic_model1: R0 <= 1, no endemic equilibrium");

    Field warm;
    if (itilde_init && itilde_init->size() == grid.n_cells) warm = *itilde_init;
    auto eval = [&](double kappa) -> double {
        // Overflow of the equilibrium map means the reconstructed mass is
        // far above N; treat it as a positive residual.
        try {
            Field it;
            const double r = kappa_residual(kappa, model, &eig, &it,
                                            warm.empty() ? nullptr : &warm);
            warm = std::move(it);
            return r;
        } catch (const KappaOverflow&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    double kappa = (kappa_init > 0.0) ? kappa_init : N / grid.measure();
    double res = eval(kappa);
    double lo, hi, res_lo, res_hi;
    if (res < 0.0) {
        lo = kappa;
        res_lo = res;
        hi = kappa;
        do {
            hi *= 2.0;
            res_hi = eval(hi);
            if (hi > 1e12 * (1.0 + N))
                throw ConvergenceError("solve_endemic_model1: no positive-residual kappa found",
                                       res_hi, 0);
        } while (res_hi < 0.0);
    } else {
        hi = kappa;
        res_hi = res;
        lo = kappa;
        do {
            lo *= 0.5;
            res_lo = eval(lo);
            if (lo < 1e-14)
                throw ConvergenceError("solve_endemic_model1: no negative-residual kappa found",
                                       res_lo, 0);
        } while (res_lo > 0.0);
    }

    double kappa_star = 0.5 * (lo + hi);
    Field itilde_star;
    for (int iter = 0; iter < 200; ++iter) {
        kappa_star = 0.5 * (lo + hi);
        Field it;
        double r;
        try {
            r = kappa_residual(kappa_star, model, &eig, &it, warm.empty() ? nullptr : &warm);
        } catch (const KappaOverflow&) {
            r = std::numeric_limits<double>::infinity();
        }
        if (std::isfinite(r)) {
            warm = it;
            itilde_star = std::move(it);
        }
        if (std::isfinite(r) && std::abs(r) <= 0.5e-8 * N) break;
        if (r > 0.0)
            hi = kappa_star;
        else
            lo = kappa_star;
        if ((hi - lo) <= 1e-13 * hi) break;
    }
    if (itilde_star.empty())
        itilde_star = solve_scalar_reduction(kappa_star, model, &eig);

    Field S(grid.n_cells), I(grid.n_cells);
    for (std::size_t j = 0; j < grid.n_cells; ++j) {
        S[j] = g_of_Itilde(itilde_star[j], kappa_star, model.params);
        I[j] = kappa_star * itilde_star[j];
    }
    detail::NewtonPolishResult polished = detail::newton_polish(model, std::move(S), std::move(I));

    EndemicModel1Result out;
    out.profile =
        detail::finish_profile(model, std::move(polished.S), std::move(polished.I), kappa_star);
    out.itilde = std::move(itilde_star);
    return out;
}

inline SteadyProfile solve_endemic_model1(const Model& model) {
    return solve_endemic_model1_full(model).profile;
}

/// Disease-free equilibrium of the source model: the linear Neumann problem
/// (d_S (-L) + Id) S = Lambda. Strictly diagonally dominant, solution > 0.
inline Field solve_dfe_model2(double d_S, const Field& lambda, const Grid1D& grid) {
    require_on_grid(lambda, grid, "lambda");
    if (!(d_S > 0.0)) throw InvalidInput("solve_dfe_model2: d_S must be positive");
    TridiagonalSystem m = scaled_neg_laplacian_matrix(grid, d_S);
    for (std::size_t j = 0; j < m.size(); ++j) m.diag[j] += 1.0;
    return solve_tridiagonal(m, lambda);
}

/// An endemic equilibrium of the source model: parabolic relaxation to
/// steady detection, then coupled Newton polish. No uniqueness claim is
/// attached to the returned profile.
inline SteadyProfile solve_endemic_model2(const Model& model,
                                          std::optional<State> init = {}) {
    if (model.params.kind != ModelKind::Source)
        throw InvalidInput("solve_endemic_model2: model kind must be Source");
    const Grid1D& grid = model.grid;

    const R0Result r0 =
        basic_reproduction_number(model.params.d_I, model.beta, model.gamma, grid);
    if (!(r0.r0 > 1.0))
        throw InvalidInput("solve_endemic_model2: R0 <= 1, no endemic equilibrium");

    Field S0, I0;
    if (init) {
        S0 = init->S;
        I0 = init->I;
    } else {
        S0 = solve_dfe_model2(model.params.d_S, model.lambda, grid);
        I0 = S0;
        for (double& v : I0) v *= 0.1;
    }

    IntegratorConfig cfg;
    cfg.t_end = 1e4;
    cfg.dt_init = 0.2 / (1.0 + max_value(model.beta) + max_value(model.gamma));
    cfg.record_every = 1000000;
    cfg.store_snapshots = false;
    SimulateResult sim = simulate(model, std::move(S0), std::move(I0), cfg);
    if (!sim.reached_steady) {
        auto [rS, rI] = steady_residual(model, sim.final_state.S, sim.final_state.I);
        throw ConvergenceError("solve_endemic_model2: relaxation missed steady state by t = 1e4",
                               std::max(sup_norm(rS), sup_norm(rI)), sim.steps_accepted);
    }

    detail::NewtonPolishResult polished = detail::newton_polish(
        model, std::move(sim.final_state.S), std::move(sim.final_state.I));
    return detail::finish_profile(model, std::move(polished.S), std::move(polished.I),
                                  std::numeric_limits<double>::quiet_NaN());
}

} // namespace xdiffsis
