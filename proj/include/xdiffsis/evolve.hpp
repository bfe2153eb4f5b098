#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "model.hpp"
#include "operators.hpp"

namespace xdiffsis {

struct IntegratorConfig {
    double dt_init = 0.0;   // <= 0: use 0.1 h^2 / max(d_S, d_I, chi*sup I0)
    double dt_min = 1e-14;
    double t_end = 50.0;
    double safety = 1.0;    // in (0, 1]; scales the working step size
    int positivity_retries = 60;
    long record_every = 10;
    long max_steps = 0;     // 0: no cap
    bool store_snapshots = true;

    void validate() const {
        if (!(t_end > 0.0)) throw InvalidInput("IntegratorConfig: t_end must be positive");
        if (!(safety > 0.0 && safety <= 1.0))
            throw InvalidInput("IntegratorConfig: safety must lie in (0, 1]");
        if (dt_init > 0.0 && dt_min > dt_init)
            throw InvalidInput("IntegratorConfig: dt_min must not exceed dt_init");
        if (record_every < 1) throw InvalidInput("IntegratorConfig: record_every must be >= 1");
    }
};

/// Diagnostics sampled every record_every accepted steps (plus the initial
/// and final states). Dirichlet energies are cumulative dt-weighted Riemann
/// sums of the squared face gradients.
struct TrajectoryRecord {
    std::vector<double> times;
    std::vector<long> steps;            // accepted-step index per row
    std::vector<double> mass;           // int (S + I)
    std::vector<double> mass_weighted;  // int (S + (1 + 1/(2 beta*)) I), Source kind only
    std::vector<double> sup_I;
    std::vector<double> lyapunov;       // NaN when no reference equilibrium was supplied
    std::vector<double> dirichlet_w;
    std::vector<double> dirichlet_S;
    std::vector<double> dirichlet_I;
    std::vector<Field> S_snapshots;
    std::vector<Field> I_snapshots;
};

/// dt underflow or retry exhaustion during time stepping; carries the record
/// accumulated so far.
struct SimulationError : std::runtime_error {
    SimulationError(const std::string& msg, TrajectoryRecord partial_record)
        : std::runtime_error(msg), record(std::move(partial_record)) {}
    TrajectoryRecord record;
};

struct SimulateResult {
    State final_state;
    TrajectoryRecord record;
    bool reached_steady = false;
    bool weighted_mass_bound_ok = true; // Source kind: running L1 estimate held
    double max_sup_I = 0.0;             // over all accepted steps
    long steps_accepted = 0;
    long steps_rejected = 0;
};

/// Relative entropy (Bregman divergence of -ln) of the state against the
/// constant equilibrium (hatS, hatI); zero exactly at the equilibrium and
/// positive elsewhere.
inline double lyapunov_value(const State& state, double hatS, double hatI, const Grid1D& grid) {
    require_on_grid(state.S, grid, "S");
    require_on_grid(state.I, grid, "I");
    if (!(hatS > 0.0) || !(hatI > 0.0))
        throw InvalidInput("lyapunov_value: reference equilibrium must be positive");
    double sum = 0.0;
    for (std::size_t j = 0; j < grid.n_cells; ++j) {
        const double s = state.S[j], i = state.I[j];
        if (!(s > 0.0) || !(i > 0.0))
            throw InvalidInput("lyapunov_value: state must be strictly positive");
        sum += (s - hatS - hatS * std::log(s / hatS)) + (i - hatI - hatI * std::log(i / hatI));
    }
    return grid.h() * sum;
}

namespace detail {

inline double dirichlet_increment(const Field& u, const Grid1D& grid) {
    const double h = grid.h();
    double sum = 0.0;
    for (std::size_t j = 0; j + 1 < u.size(); ++j) {
        const double g = (u[j + 1] - u[j]) / h;
        sum += g * g;
    }
    return h * sum;
}

} // namespace detail

/// One IMEX step: I advances by implicit diffusion with the reaction taken
/// explicitly, then S advances by implicit diffusion with the cross-diffusion
/// flux (built on the new I) and the negated reaction taken explicitly. For
/// the conserved model the reactions cancel pointwise and every flux
/// telescopes, so the discrete total mass moves only by linear-solve
/// round-off. Returns nullopt when positivity fails; the caller halves dt.
inline std::optional<State> imex_step(const State& state, const Model& model, double dt) {
    if (!(dt > 0.0)) throw InvalidInput("imex_step: dt must be positive");
    const Grid1D& grid = model.grid;
    const std::size_t n = grid.n_cells;

    Field react_I = incidence(state.S, state.I, model.beta);
    for (std::size_t j = 0; j < n; ++j) react_I[j] -= model.gamma[j] * state.I[j];

    Field rhs_I(n);
    for (std::size_t j = 0; j < n; ++j) rhs_I[j] = state.I[j] + dt * react_I[j];
    const TridiagonalSystem mi = implicit_diffusion_matrix(grid, dt * model.params.d_I);
    Field I_new = solve_tridiagonal(mi, rhs_I);
    if (min_value(I_new) < 0.0) return std::nullopt;

    const Field cross = cross_diffusion_divergence(state.S, I_new, grid, model.params.chi);
    Field rhs_S(n);
    if (model.params.kind == ModelKind::Conserved) {
        for (std::size_t j = 0; j < n; ++j)
            rhs_S[j] = state.S[j] + dt * (cross[j] + (-react_I[j]));
    } else {
        for (std::size_t j = 0; j < n; ++j)
            rhs_S[j] = state.S[j] +
                       dt * (cross[j] + model.lambda[j] - state.S[j] + (-react_I[j]));
    }
    const TridiagonalSystem ms = implicit_diffusion_matrix(grid, dt * model.params.d_S);
    Field S_new = solve_tridiagonal(ms, rhs_S);
    if (min_value(S_new) < 0.0) return std::nullopt;

    return State{std::move(S_new), std::move(I_new), state.t + dt};
}

inline double default_dt(const Model& model, const Field& I0) {
    const double h = model.grid.h();
    const double rate =
        std::max({model.params.d_S, model.params.d_I, model.params.chi * sup_norm(I0)});
    return 0.1 * h * h / std::max(rate, 1e-300);
}

/// Adaptive IMEX integration with positivity rejection. Terminates at t_end,
/// after max_steps accepted steps, or once the state stops moving
/// (sup-norm change per unit time below 1e-12).
inline SimulateResult simulate(const Model& model, Field S0, Field I0,
                               const IntegratorConfig& cfg,
                               std::optional<std::pair<double, double>> lyapunov_ref = {}) {
    cfg.validate();
    const Grid1D& grid = model.grid;
    require_on_grid(S0, grid, "S0");
    require_on_grid(I0, grid, "I0");
    if (min_value(S0) < 0.0) throw InvalidInput("simulate: S0 must be nonnegative");
    if (min_value(I0) < 0.0 || max_value(I0) <= 0.0)
        throw InvalidInput("simulate: I0 must be nonnegative and not identically zero");

    const bool conserved = model.params.kind == ModelKind::Conserved;
    if (conserved) {
        const double mass0 = integrate(S0, grid) + integrate(I0, grid);
        if (std::abs(mass0 - model.params.N) > 1e-10 * model.params.N)
            throw InvalidInput("simulate: initial quadrature mass must equal N");
    }

    // Running Gronwall bound for the weighted mass of the source model.
    const double beta_sup = model.beta_max();
    const double gamma_inf = model.gamma_min();
    const double weight = 1.0 + 1.0 / (2.0 * beta_sup);
    double weighted_bound = 0.0;
    if (!conserved) {
        double wm0 = 0.0;
        for (std::size_t j = 0; j < grid.n_cells; ++j) wm0 += S0[j] + weight * I0[j];
        wm0 *= grid.h();
        const double decay = 0.5 * std::min(1.0, 2.0 * gamma_inf / (1.0 + 2.0 * beta_sup));
        weighted_bound = std::max(wm0, integrate(model.lambda, grid) / decay);
    }

    SimulateResult res;
    res.final_state = State{std::move(S0), std::move(I0), 0.0};
    State& state = res.final_state;

    const double dt0 = cfg.safety * (cfg.dt_init > 0.0 ? cfg.dt_init : default_dt(model, state.I));
    double dt_base = dt0;
    double dirichlet_w_acc = 0.0, dirichlet_S_acc = 0.0, dirichlet_I_acc = 0.0;

    auto record_row = [&](const State& s) {
        TrajectoryRecord& r = res.record;
        r.times.push_back(s.t);
        r.steps.push_back(res.steps_accepted);
        r.mass.push_back(integrate(s.S, grid) + integrate(s.I, grid));
        if (!conserved) {
            double wm = 0.0;
            for (std::size_t j = 0; j < grid.n_cells; ++j) wm += s.S[j] + weight * s.I[j];
            r.mass_weighted.push_back(grid.h() * wm);
        }
        r.sup_I.push_back(max_value(s.I));
        double lyap = std::numeric_limits<double>::quiet_NaN();
        if (lyapunov_ref && min_value(s.S) > 0.0 && min_value(s.I) > 0.0)
            lyap = lyapunov_value(s, lyapunov_ref->first, lyapunov_ref->second, grid);
        r.lyapunov.push_back(lyap);
        r.dirichlet_w.push_back(dirichlet_w_acc);
        r.dirichlet_S.push_back(dirichlet_S_acc);
        r.dirichlet_I.push_back(dirichlet_I_acc);
        if (cfg.store_snapshots) {
            r.S_snapshots.push_back(s.S);
            r.I_snapshots.push_back(s.I);
        }
    };

    res.max_sup_I = max_value(state.I);
    record_row(state);

    int consecutive_rejects = 0;
    while (state.t < cfg.t_end &&
           (cfg.max_steps == 0 || res.steps_accepted < cfg.max_steps)) {
        const double dt = std::min(dt_base, cfg.t_end - state.t);
        std::optional<State> next = imex_step(state, model, dt);
        if (!next) {
            ++res.steps_rejected;
            if (++consecutive_rejects > cfg.positivity_retries)
                throw SimulationError("simulate: positivity retries exhausted at t = " +
                                          std::to_string(state.t),
                                      std::move(res.record));
            dt_base *= 0.5;
            if (dt_base < cfg.dt_min)
                throw SimulationError(
                    "simulate: dt underflow below dt_min at t = " + std::to_string(state.t),
                    std::move(res.record));
            continue;
        }
        consecutive_rejects = 0;
        ++res.steps_accepted;

        const double change =
            std::max(sup_diff(next->S, state.S), sup_diff(next->I, state.I)) / dt;

        // Cumulative Dirichlet energies (left-endpoint rule in time).
        Field w(grid.n_cells);
        for (std::size_t j = 0; j < grid.n_cells; ++j) w[j] = state.S[j] + state.I[j];
        dirichlet_w_acc += dt * detail::dirichlet_increment(w, grid);
        dirichlet_S_acc += dt * detail::dirichlet_increment(state.S, grid);
        dirichlet_I_acc += dt * detail::dirichlet_increment(state.I, grid);

        state = std::move(*next);
        res.max_sup_I = std::max(res.max_sup_I, max_value(state.I));

        if (!conserved) {
            double wm = 0.0;
            for (std::size_t j = 0; j < grid.n_cells; ++j)
                wm += state.S[j] + weight * state.I[j];
            wm *= grid.h();
            if (wm > weighted_bound * (1.0 + 1e-9)) res.weighted_mass_bound_ok = false;
        }

        const bool due = res.steps_accepted % cfg.record_every == 0;
        const bool last = state.t >= cfg.t_end ||
                          (cfg.max_steps != 0 && res.steps_accepted >= cfg.max_steps);
        if (due || last) record_row(state);

        if (change < 1e-12) {
            res.reached_steady = true;
            if (!(due || last)) record_row(state);
            break;
        }
        dt_base = std::min(dt_base * 1.5, dt0);
    }
    return res;
}

struct EnvelopeReport {
    bool pass = false;
    double envelope_constant = 0.0; // smallest M with I0 <= M phi*
    double max_ratio = 0.0;         // worst I / (M exp(-lambda* t) phi*)
    long checked_rows = 0;
};

/// Verifies the exponential pointwise decay bound I(x, t) <= M exp(-lambda* t)
/// phi*(x) against the recorded snapshots, with a 1e-6 relative allowance.
inline EnvelopeReport decay_envelope_check(const TrajectoryRecord& record, double lambda_star,
                                           const Field& phi_star, const Field& I0) {
    if (!(lambda_star > 0.0))
        throw InvalidInput("decay_envelope_check: requires lambda* > 0 (R0 < 1)");
    if (record.I_snapshots.empty())
        throw InvalidInput("decay_envelope_check: record carries no snapshots");
    if (min_value(phi_star) <= 0.0)
        throw InvalidInput("decay_envelope_check: phi* must be positive");

    double big_m = 0.0;
    for (std::size_t j = 0; j < I0.size(); ++j) big_m = std::max(big_m, I0[j] / phi_star[j]);

    EnvelopeReport rep;
    rep.envelope_constant = big_m;
    rep.pass = true;
    for (std::size_t k = 0; k < record.I_snapshots.size(); ++k) {
        const double decay = big_m * std::exp(-lambda_star * record.times[k]);
        const Field& snap = record.I_snapshots[k];
        for (std::size_t j = 0; j < snap.size(); ++j) {
            const double bound = decay * phi_star[j];
            const double ratio = (bound > 0.0) ? snap[j] / bound : (snap[j] > 0.0 ? 2.0 : 0.0);
            rep.max_ratio = std::max(rep.max_ratio, ratio);
        }
        ++rep.checked_rows;
    }
    rep.pass = rep.max_ratio <= 1.0 + 1e-6;
    return rep;
}

} // namespace xdiffsis
