#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "steady.hpp"

namespace xdiffsis {

/// d_S -> 0 limit of the conserved-model equilibrium when every site is
/// high-risk (beta > gamma): constant infected density and a susceptible
/// profile proportional to gamma/(beta - gamma).
struct LimitProfileHighRisk {
    Field S_star;
    double I_star = 0.0;
};

inline LimitProfileHighRisk limit_profile_high_risk(const Field& beta, const Field& gamma,
                                                    double N, const Grid1D& grid) {
    require_on_grid(beta, grid, "beta");
    require_on_grid(gamma, grid, "gamma");
    if (!(N > 0.0)) throw InvalidInput("limit_profile_high_risk: N must be positive");
    for (std::size_t j = 0; j < grid.n_cells; ++j)
        if (!(beta[j] > gamma[j]))
            throw InvalidInput("limit_profile_high_risk: requires beta > gamma on every cell "
                               "(violated at cell " + std::to_string(j) + ")");
    Field ratio(grid.n_cells);
    for (std::size_t j = 0; j < grid.n_cells; ++j) ratio[j] = beta[j] / (beta[j] - gamma[j]);
    LimitProfileHighRisk lim;
    lim.I_star = N / integrate(ratio, grid);
    lim.S_star.resize(grid.n_cells);
    for (std::size_t j = 0; j < grid.n_cells; ++j)
        lim.S_star[j] = gamma[j] / (beta[j] - gamma[j]) * lim.I_star;
    return lim;
}

struct HighRiskSweepReport {
    std::vector<double> ds_values;
    std::vector<double> gaps;    // sup|S - S*| + sup|I - I*| per sweep point
    std::vector<double> kappas;
    LimitProfileHighRisk limit;
    bool monotone = false;
    bool final_below_threshold = false;
    bool kappa_bounded_away = false;
    double threshold = 1e-2;
    bool pass = false;
};

/// Sweeps the endemic solver over a decreasing d_S list and checks uniform
/// convergence toward the high-risk limit profile.
inline HighRiskSweepReport verify_high_risk_limit(const ModelParams& params_template,
                                                  const std::vector<double>& ds_list,
                                                  const Grid1D& grid, double threshold = 1e-2) {
    if (ds_list.empty()) throw InvalidInput("verify_high_risk_limit: empty d_S list");
    for (std::size_t k = 0; k + 1 < ds_list.size(); ++k)
        if (!(ds_list[k] > ds_list[k + 1]))
            throw InvalidInput("verify_high_risk_limit: d_S list must decrease");

    HighRiskSweepReport rep;
    rep.threshold = threshold;
    {
        Model probe(params_template, grid);
        rep.limit = limit_profile_high_risk(probe.beta, probe.gamma, params_template.N, grid);
    }
    Field warm;
    double kappa_prev = 0.0;
    for (double ds : ds_list) {
        ModelParams p = params_template;
        p.d_S = ds;
        Model model(p, grid);
        EndemicModel1Result full =
            solve_endemic_model1_full(model, warm.empty() ? nullptr : &warm, kappa_prev);
        const SteadyProfile& ee = full.profile;
        double gap = 0.0;
        for (std::size_t j = 0; j < grid.n_cells; ++j)
            gap = std::max(gap, std::abs(ee.S[j] - rep.limit.S_star[j]));
        double gap_i = 0.0;
        for (std::size_t j = 0; j < grid.n_cells; ++j)
            gap_i = std::max(gap_i, std::abs(ee.I[j] - rep.limit.I_star));
        rep.ds_values.push_back(ds);
        rep.gaps.push_back(gap + gap_i);
        rep.kappas.push_back(ee.kappa);
        warm = std::move(full.itilde);
        kappa_prev = ee.kappa;
    }
    // Constant landscapes solve exactly at every d_S, leaving the gaps at
    // machine zero; a round-off allowance keeps the monotone check meaningful.
    rep.monotone = true;
    for (std::size_t k = 0; k + 1 < rep.gaps.size(); ++k)
        if (rep.gaps[k + 1] > rep.gaps[k] + 1e-12) rep.monotone = false;
    rep.final_below_threshold = rep.gaps.back() < threshold;
    const double kappa_floor = 0.5 * rep.limit.I_star;
    rep.kappa_bounded_away = true;
    for (double k : rep.kappas)
        if (!(k > kappa_floor)) rep.kappa_bounded_away = false;
    rep.pass = rep.monotone && rep.final_below_threshold && rep.kappa_bounded_away;
    return rep;
}

/// Unique root M > 0 of int exp(chi (1 - Itilde*) M) = N chi/d_I + |Omega|.
/// The left side is strictly increasing in M as long as Itilde* < 1 somewhere.
inline double solve_M(const Field& itilde_star, double chi, double d_I, double N,
                      const Grid1D& grid) {
    require_on_grid(itilde_star, grid, "itilde_star");
    if (!(chi > 0.0) || !(d_I > 0.0) || !(N > 0.0))
        throw InvalidInput("solve_M: chi, d_I, N must be positive");
    double one_minus = 0.0;
    for (std::size_t j = 0; j < grid.n_cells; ++j)
        one_minus = std::max(one_minus, 1.0 - itilde_star[j]);
    if (!(one_minus > 0.0))
        throw InvalidInput("solve_M: Itilde* is identically 1, the mass equation has no root");

    const double rhs = N * chi / d_I + grid.measure();
    auto lhs = [&](double m) {
        double s = 0.0;
        for (std::size_t j = 0; j < grid.n_cells; ++j)
            s += std::exp(chi * (1.0 - itilde_star[j]) * m);
        return grid.h() * s;
    };

    double hi = 1.0;
    while (lhs(hi) < rhs) {
        hi *= 2.0;
        if (hi > 1e16) throw ConvergenceError("solve_M: bracket expansion failed", 0.0, 0);
    }
    double lo = 0.0;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const double v = lhs(mid);
        if (std::abs(v - rhs) <= 1e-10 * rhs) return mid;
        if (v < rhs)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// Limit data for the sign-changing landscape: the limiting normalized
/// infected profile, the mass-equation root M, the limiting susceptible
/// profile, and the cell index sets.
struct SignChangingLimit {
    Field itilde_star;
    double M = 0.0;
    Field S_star;
    std::vector<std::size_t> H_minus, H_plus; // beta < gamma, beta > gamma
    std::vector<std::size_t> J_minus, J_plus; // Itilde* < 1, Itilde* = 1 (by tolerance)
};

struct SignChangingReport {
    std::vector<double> ds_values;
    std::vector<double> kappas;
    std::vector<double> sup_I;
    bool kappa_vanishing = false;       // strictly decreasing and dropping hard
    bool sup_I_vanishing = false;
    bool hminus_in_jminus = false;
    bool jplus_in_high_risk = false;
    bool jplus_nonempty = false;
    bool limit_mass_ok = false;         // |int S* - N| <= 1e-2 N
    bool ratio_matches_M = false;       // kappa/d_S within 5% of M
    double limit_mass = 0.0;
    double kappa_over_ds = 0.0;
    bool pass = false;
};

/// d_S -> 0 sweep on a landscape with low-risk sites: the infected density
/// and kappa vanish, kappa/d_S approaches the root of the mass equation, and
/// the susceptible limit S* is positive exactly off the plateau Itilde* = 1.
inline std::pair<SignChangingLimit, SignChangingReport> sign_changing_limit(
    const ModelParams& params_template, const std::vector<double>& ds_list, const Grid1D& grid,
    double tol_one = 1e-3, bool richardson = false) {
    if (ds_list.size() < 2) throw InvalidInput("sign_changing_limit: need at least two d_S");
    for (std::size_t k = 0; k + 1 < ds_list.size(); ++k)
        if (!(ds_list[k] > ds_list[k + 1]))
            throw InvalidInput("sign_changing_limit: d_S list must decrease");
    if (!(params_template.chi > 0.0))
        throw InvalidInput("sign_changing_limit: requires chi > 0");

    SignChangingLimit lim;
    SignChangingReport rep;

    std::vector<Field> itildes;
    double kappa_prev = 0.0;
    for (double ds : ds_list) {
        ModelParams p = params_template;
        p.d_S = ds;
        Model model(p, grid);
        EndemicModel1Result ee = solve_endemic_model1_full(
            model, itildes.empty() ? nullptr : &itildes.back(), kappa_prev);
        rep.ds_values.push_back(ds);
        rep.kappas.push_back(ee.profile.kappa);
        rep.sup_I.push_back(max_value(ee.profile.I));
        kappa_prev = ee.profile.kappa;
        itildes.push_back(std::move(ee.itilde));
    }

    {
        Model probe(params_template, grid);
        for (std::size_t j = 0; j < grid.n_cells; ++j) {
            if (probe.beta[j] < probe.gamma[j]) lim.H_minus.push_back(j);
            if (probe.beta[j] > probe.gamma[j]) lim.H_plus.push_back(j);
        }
        if (lim.H_minus.empty())
            throw InvalidInput("sign_changing_limit: no low-risk cells (beta < gamma nowhere)");
    }

    lim.itilde_star = itildes.back();
    if (richardson) {
        const Field& prev = itildes[itildes.size() - 2];
        const double d_last = ds_list.back(), d_prev = ds_list[ds_list.size() - 2];
        const double w = d_last / (d_prev - d_last);
        for (std::size_t j = 0; j < grid.n_cells; ++j) {
            lim.itilde_star[j] += w * (lim.itilde_star[j] - prev[j]);
            lim.itilde_star[j] = std::clamp(lim.itilde_star[j], 0.0, 1.0);
        }
    }

    for (std::size_t j = 0; j < grid.n_cells; ++j) {
        if (lim.itilde_star[j] > 1.0 - tol_one)
            lim.J_plus.push_back(j);
        else
            lim.J_minus.push_back(j);
    }
    if (lim.J_minus.empty())
        throw InvalidInput("sign_changing_limit: degenerate classification, J- is empty");

    lim.M = solve_M(lim.itilde_star, params_template.chi, params_template.d_I,
                    params_template.N, grid);
    lim.S_star.resize(grid.n_cells);
    for (std::size_t j = 0; j < grid.n_cells; ++j)
        lim.S_star[j] = params_template.d_I / params_template.chi *
                        std::expm1(params_template.chi * (1.0 - lim.itilde_star[j]) * lim.M);

    // (a), (b): kappa and sup I decrease and drop by well over an order.
    rep.kappa_vanishing = true;
    rep.sup_I_vanishing = true;
    for (std::size_t k = 0; k + 1 < rep.kappas.size(); ++k) {
        if (!(rep.kappas[k + 1] < rep.kappas[k])) rep.kappa_vanishing = false;
        if (!(rep.sup_I[k + 1] < rep.sup_I[k])) rep.sup_I_vanishing = false;
    }
    if (!(rep.kappas.back() < 0.1 * rep.kappas.front())) rep.kappa_vanishing = false;
    if (!(rep.sup_I.back() < 0.1 * rep.sup_I.front())) rep.sup_I_vanishing = false;

    // (c): every low-risk cell sits in J-.
    {
        Model probe(params_template, grid);
        rep.hminus_in_jminus = true;
        for (std::size_t j : lim.H_minus)
            if (lim.itilde_star[j] > 1.0 - tol_one) rep.hminus_in_jminus = false;
        // (d): the plateau only occupies cells with beta >= gamma.
        rep.jplus_in_high_risk = true;
        for (std::size_t j : lim.J_plus)
            if (probe.beta[j] < probe.gamma[j]) rep.jplus_in_high_risk = false;
    }
    rep.jplus_nonempty = !lim.J_plus.empty();

    rep.limit_mass = integrate(lim.S_star, grid);
    rep.limit_mass_ok = std::abs(rep.limit_mass - params_template.N) <= 1e-2 * params_template.N;

    rep.kappa_over_ds = rep.kappas.back() / ds_list.back();
    rep.ratio_matches_M = std::abs(rep.kappa_over_ds / lim.M - 1.0) <= 0.05;

    rep.pass = rep.kappa_vanishing && rep.sup_I_vanishing && rep.hminus_in_jminus &&
               rep.jplus_in_high_risk && rep.jplus_nonempty && rep.limit_mass_ok &&
               rep.ratio_matches_M;
    return {std::move(lim), std::move(rep)};
}

struct PersistenceRow {
    double d_S = 0.0;
    double min_I = 0.0;
    double int_S = 0.0;
    double int_I = 0.0;
};

struct PersistenceReport {
    std::vector<PersistenceRow> rows;
    double eta = 0.0;            // half the min I at the largest d_S
    double int_lambda = 0.0;
    bool min_I_bounded = false;
    bool mass_identity_ok = false; // int S = int Lambda within 1e-6 at each point
    bool pass = false;
};

/// Source-model sweep: restricting susceptible motility does not clear the
/// infection; min I stays bounded below and int S = int Lambda throughout.
inline PersistenceReport model2_persistence_sweep(const ModelParams& params_template,
                                                  const std::vector<double>& ds_list,
                                                  const Grid1D& grid) {
    if (ds_list.empty()) throw InvalidInput("model2_persistence_sweep: empty d_S list");
    if (params_template.kind != ModelKind::Source)
        throw InvalidInput("model2_persistence_sweep: model kind must be Source");

    PersistenceReport rep;
    {
        Model probe(params_template, grid);
        rep.int_lambda = integrate(probe.lambda, grid);
    }
    for (double ds : ds_list) {
        ModelParams p = params_template;
        p.d_S = ds;
        Model model(p, grid);
        SteadyProfile ee = solve_endemic_model2(model);
        PersistenceRow row;
        row.d_S = ds;
        row.min_I = min_value(ee.I);
        row.int_S = integrate(ee.S, grid);
        row.int_I = integrate(ee.I, grid);
        rep.rows.push_back(row);
    }
    rep.eta = 0.5 * rep.rows.front().min_I;
    rep.min_I_bounded = true;
    for (const auto& row : rep.rows)
        if (!(row.min_I >= rep.eta)) rep.min_I_bounded = false;
    rep.mass_identity_ok = true;
    for (const auto& row : rep.rows)
        if (std::abs(row.int_S - rep.int_lambda) > 1e-6 * std::max(1.0, rep.int_lambda))
            rep.mass_identity_ok = false;
    rep.pass = rep.min_I_bounded && rep.mass_identity_ok && rep.eta > 0.0;
    return rep;
}

} // namespace xdiffsis
