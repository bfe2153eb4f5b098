#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "asymptotics.hpp"
#include "config.hpp"
#include "spectral.hpp"
#include "steady.hpp"

namespace xdiffsis {

namespace io_detail {

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

using Column = std::pair<std::string, std::vector<double>>;

inline void write_table(const std::filesystem::path& dir, const std::string& stem,
                        const std::vector<Column>& cols, const OutputConfig& out) {
    std::filesystem::create_directories(dir);
    const std::size_t rows = cols.empty() ? 0 : cols.front().second.size();
    if (out.csv) {
        std::ofstream f(dir / (stem + ".csv"), std::ios::binary);
        for (std::size_t c = 0; c < cols.size(); ++c)
            f << (c ? "," : "") << cols[c].first;
        f << "\n";
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols.size(); ++c)
                f << (c ? "," : "") << fmt17(cols[c].second[r]);
            f << "\n";
        }
    }
    if (out.json) {
        nlohmann::json j;
        for (const auto& [name, values] : cols) j[name] = values;
        std::ofstream f(dir / (stem + ".json"), std::ios::binary);
        f << j.dump(2) << "\n";
    }
}

inline void write_json(const std::filesystem::path& dir, const std::string& stem,
                       const nlohmann::json& j) {
    std::filesystem::create_directories(dir);
    std::ofstream f(dir / (stem + ".json"), std::ios::binary);
    f << j.dump(2) << "\n";
}

inline std::vector<double> grid_centers(const Grid1D& grid) {
    std::vector<double> x(grid.n_cells);
    for (std::size_t j = 0; j < grid.n_cells; ++j) x[j] = grid.center(j);
    return x;
}

inline void write_profile(const std::filesystem::path& dir, const std::string& stem,
                          const Grid1D& grid, const Field& S, const Field& I,
                          const OutputConfig& out) {
    write_table(dir, stem, {{"x", grid_centers(grid)}, {"S", S}, {"I", I}}, out);
}

inline void write_trajectory(const std::filesystem::path& dir, const std::string& stem,
                             const TrajectoryRecord& rec, const OutputConfig& out) {
    write_table(dir, stem,
                {{"t", rec.times},
                 {"mass", rec.mass},
                 {"sup_I", rec.sup_I},
                 {"lyapunov", rec.lyapunov},
                 {"dirichlet_w", rec.dirichlet_w}},
                out);
}

} // namespace io_detail

namespace run_detail {

inline std::pair<Field, Field> initial_data(const ExperimentConfig& cfg, const Model& model) {
    const Grid1D& grid = model.grid;
    Field S0, I0;
    if (cfg.S0)
        S0 = evaluate_spec(*cfg.S0, grid);
    else if (model.params.kind == ModelKind::Conserved)
        S0 = constant_field(grid, 0.75 * model.params.N / grid.measure());
    else
        S0 = model.lambda;
    if (cfg.I0)
        I0 = evaluate_spec(*cfg.I0, grid);
    else if (model.params.kind == ModelKind::Conserved)
        I0 = constant_field(grid, 0.25 * model.params.N / grid.measure());
    else {
        I0 = model.lambda;
        for (double& v : I0) v *= 0.1;
    }
    return {std::move(S0), std::move(I0)};
}

inline std::vector<double> default_ds_list(const ExperimentConfig& cfg) {
    if (cfg.sweep) {
        if (cfg.sweep->parameter != "d_S")
            throw InvalidInput("config: sweep.parameter must be d_S for this command");
        return cfg.sweep->values;
    }
    return {1e-1, 1e-2, 1e-3, 1e-4};
}

inline ModelParams with_parameter(ModelParams p, const std::string& name, double value) {
    if (name == "d_S")
        p.d_S = value;
    else if (name == "d_I")
        p.d_I = value;
    else if (name == "chi")
        p.chi = value;
    else
        p.N = value;
    return p;
}

/// Fan-out over sweep values with a worker cap; results land in submission
/// order and files are written by the caller afterwards.
template <typename Fn>
std::vector<std::invoke_result_t<Fn, double>> sweep_map(const std::vector<double>& values,
                                                        unsigned workers, Fn&& fn) {
    using R = std::invoke_result_t<Fn, double>;
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<R> results(values.size());
    std::size_t next = 0;
    while (next < values.size()) {
        const std::size_t batch = std::min<std::size_t>(workers, values.size() - next);
        std::vector<std::future<R>> futs;
        futs.reserve(batch);
        for (std::size_t k = 0; k < batch; ++k)
            futs.push_back(std::async(std::launch::async, fn, values[next + k]));
        for (std::size_t k = 0; k < batch; ++k) results[next + k] = futs[k].get();
        next += batch;
    }
    return results;
}

} // namespace run_detail

/// Executes one parsed experiment: runs the command, writes its output
/// files, prints a one-line summary. Returns 0 on success, 2 when a
/// recipe's assertions fail. Module errors propagate as exceptions.
inline int run(const ExperimentConfig& cfg) {
    const std::filesystem::path dir = cfg.output.dir;
    const Grid1D grid = cfg.make_grid();
    const Model model(cfg.model, grid);

    if (cfg.command == "simulate") {
        if (cfg.sweep) {
            auto rows = run_detail::sweep_map(
                cfg.sweep->values, cfg.output.workers, [&](double v) {
                    Model pt(run_detail::with_parameter(cfg.model, cfg.sweep->parameter, v),
                             grid);
                    auto [S0, I0] = run_detail::initial_data(cfg, pt);
                    SimulateResult r = simulate(pt, std::move(S0), std::move(I0), cfg.integrator);
                    return std::pair<double, SimulateResult>(v, std::move(r));
                });
            std::vector<double> vals, final_sup, final_mass;
            for (std::size_t k = 0; k < rows.size(); ++k) {
                vals.push_back(rows[k].first);
                const SimulateResult& r = rows[k].second;
                final_sup.push_back(max_value(r.final_state.I));
                final_mass.push_back(integrate(r.final_state.S, grid) +
                                     integrate(r.final_state.I, grid));
                char sub[32];
                std::snprintf(sub, sizeof sub, "point_%03zu", k);
                io_detail::write_trajectory(dir / sub, "trajectory", r.record, cfg.output);
                io_detail::write_profile(dir / sub, "profile_final", grid, r.final_state.S,
                                         r.final_state.I, cfg.output);
            }
            io_detail::write_table(dir, "sweep_summary",
                                   {{cfg.sweep->parameter, vals},
                                    {"final_sup_I", final_sup},
                                    {"final_mass", final_mass}},
                                   cfg.output);
            std::printf("simulate sweep over %s: %zu points done\n",
                        cfg.sweep->parameter.c_str(), vals.size());
            return 0;
        }
        auto [S0, I0] = run_detail::initial_data(cfg, model);
        SimulateResult r = simulate(model, std::move(S0), std::move(I0), cfg.integrator);
        io_detail::write_trajectory(dir, "trajectory", r.record, cfg.output);
        io_detail::write_profile(dir, "profile_final", grid, r.final_state.S, r.final_state.I,
                                 cfg.output);
        std::printf("simulate: t=%g steps=%ld final sup_I=%.6e mass=%.12g steady=%d\n",
                    r.final_state.t, r.steps_accepted, max_value(r.final_state.I),
                    integrate(r.final_state.S, grid) + integrate(r.final_state.I, grid),
                    r.reached_steady ? 1 : 0);
        return 0;
    }

    if (cfg.command == "r0" || cfg.command == "eigen") {
        const bool want_r0 = cfg.command == "r0";
        if (cfg.sweep) {
            auto rows = run_detail::sweep_map(cfg.sweep->values, cfg.output.workers,
                                              [&](double v) {
                                                  ModelParams p = run_detail::with_parameter(
                                                      cfg.model, cfg.sweep->parameter, v);
                                                  Model pt(p, grid);
                                                  return want_r0
                                                             ? basic_reproduction_number(
                                                                   p.d_I, pt.beta, pt.gamma,
                                                                   grid, cfg.seed)
                                                                   .r0
                                                             : principal_eigenpair(
                                                                   p.d_I, pt.beta, pt.gamma,
                                                                   grid, cfg.seed)
                                                                   .lambda_star;
                                              });
            io_detail::write_table(dir, want_r0 ? "r0_sweep" : "eigen_sweep",
                                   {{cfg.sweep->parameter, cfg.sweep->values},
                                    {want_r0 ? "R0" : "lambda_star", rows}},
                                   cfg.output);
            std::printf("%s sweep over %s: %zu points done\n", cfg.command.c_str(),
                        cfg.sweep->parameter.c_str(), rows.size());
            return 0;
        }
        if (want_r0) {
            const R0Result r =
                basic_reproduction_number(cfg.model.d_I, model.beta, model.gamma, grid, cfg.seed);
            io_detail::write_table(dir, "maximizer",
                                   {{"x", io_detail::grid_centers(grid)}, {"phi", r.maximizer}},
                                   cfg.output);
            io_detail::write_json(dir, "result",
                                  {{"R0", r.r0},
                                   {"iterations", r.iterations},
                                   {"residual", r.residual}});
            std::printf("R0 = %.9f\n", r.r0);
        } else {
            const EigenResult e =
                principal_eigenpair(cfg.model.d_I, model.beta, model.gamma, grid, cfg.seed);
            io_detail::write_table(dir, "eigenfunction",
                                   {{"x", io_detail::grid_centers(grid)}, {"phi", e.phi_star}},
                                   cfg.output);
            io_detail::write_json(dir, "result",
                                  {{"lambda_star", e.lambda_star},
                                   {"iterations", e.iterations},
                                   {"residual", e.residual}});
            std::printf("lambda* = %.9f\n", e.lambda_star);
        }
        return 0;
    }

    if (cfg.command == "critical-di") {
        const double dstar = critical_diffusion(model.beta, model.gamma, grid,
                                                cfg.bracket->first, cfg.bracket->second, cfg.seed);
        io_detail::write_json(dir, "result",
                              {{"d_I_star", dstar},
                               {"bracket", {cfg.bracket->first, cfg.bracket->second}}});
        std::printf("d_I* = %.10g\n", dstar);
        return 0;
    }

    if (cfg.command == "ee") {
        const SteadyProfile ee = solve_endemic_model1(model);
        io_detail::write_profile(dir, "profile", grid, ee.S, ee.I, cfg.output);
        io_detail::write_json(dir, "result",
                              {{"kappa", ee.kappa},
                               {"pde_residual", ee.pde_residual},
                               {"mass_residual", ee.mass_residual}});
        std::printf("ee: kappa=%.10g pde_residual=%.3e mass_residual=%.3e\n", ee.kappa,
                    ee.pde_residual, ee.mass_residual);
        return 0;
    }

    if (cfg.command == "dfe2") {
        const Field S = solve_dfe_model2(cfg.model.d_S, model.lambda, grid);
        io_detail::write_profile(dir, "profile", grid, S, constant_field(grid, 0.0), cfg.output);
        io_detail::write_json(dir, "result",
                              {{"int_S", integrate(S, grid)},
                               {"int_Lambda", integrate(model.lambda, grid)}});
        std::printf("dfe2: sup_S=%.10g int_S=%.10g\n", max_value(S), integrate(S, grid));
        return 0;
    }

    if (cfg.command == "ee2") {
        std::optional<State> init;
        if (cfg.S0 && cfg.I0)
            init = State{evaluate_spec(*cfg.S0, grid), evaluate_spec(*cfg.I0, grid), 0.0};
        const SteadyProfile ee = solve_endemic_model2(model, std::move(init));
        io_detail::write_profile(dir, "profile", grid, ee.S, ee.I, cfg.output);
        io_detail::write_json(dir, "result",
                              {{"pde_residual", ee.pde_residual},
                               {"mass_residual", ee.mass_residual},
                               {"min_I", min_value(ee.I)}});
        std::printf("ee2: min_I=%.6e pde_residual=%.3e |int S - int Lambda|=%.3e\n",
                    min_value(ee.I), ee.pde_residual, ee.mass_residual);
        return 0;
    }

    if (cfg.command == "limit-high-risk") {
        const auto rep =
            verify_high_risk_limit(cfg.model, run_detail::default_ds_list(cfg), grid);
        io_detail::write_table(dir, "sweep",
                               {{"d_S", rep.ds_values}, {"gap", rep.gaps}, {"kappa", rep.kappas}},
                               cfg.output);
        io_detail::write_profile(dir, "limit_profile", grid, rep.limit.S_star,
                                 constant_field(grid, rep.limit.I_star), cfg.output);
        io_detail::write_json(dir, "result",
                              {{"I_star", rep.limit.I_star},
                               {"final_gap", rep.gaps.back()},
                               {"monotone", rep.monotone},
                               {"kappa_bounded_away", rep.kappa_bounded_away},
                               {"pass", rep.pass}});
        std::printf("limit-high-risk: %s (final gap %.3e over %zu points)\n",
                    rep.pass ? "PASS" : "FAIL", rep.gaps.back(), rep.gaps.size());
        return rep.pass ? 0 : 2;
    }

    if (cfg.command == "limit-sign-changing") {
        const auto [lim, rep] = sign_changing_limit(cfg.model, run_detail::default_ds_list(cfg),
                                                    grid, cfg.tol_one, cfg.richardson);
        std::vector<double> ratio(rep.ds_values.size());
        for (std::size_t k = 0; k < ratio.size(); ++k)
            ratio[k] = rep.kappas[k] / rep.ds_values[k];
        io_detail::write_table(dir, "sweep",
                               {{"d_S", rep.ds_values},
                                {"kappa", rep.kappas},
                                {"sup_I", rep.sup_I},
                                {"kappa_over_d_S", ratio}},
                               cfg.output);
        io_detail::write_profile(dir, "limit_profile", grid, lim.S_star,
                                 constant_field(grid, 0.0), cfg.output);
        io_detail::write_table(dir, "itilde_star",
                               {{"x", io_detail::grid_centers(grid)},
                                {"itilde", lim.itilde_star}},
                               cfg.output);
        nlohmann::json sets;
        sets["H_minus"] = lim.H_minus;
        sets["H_plus"] = lim.H_plus;
        sets["J_minus"] = lim.J_minus;
        sets["J_plus"] = lim.J_plus;
        io_detail::write_json(dir, "result",
                              {{"M", lim.M},
                               {"kappa_over_d_S", rep.kappa_over_ds},
                               {"int_S_star", rep.limit_mass},
                               {"sets", sets},
                               {"kappa_vanishing", rep.kappa_vanishing},
                               {"sup_I_vanishing", rep.sup_I_vanishing},
                               {"hminus_in_jminus", rep.hminus_in_jminus},
                               {"jplus_in_high_risk", rep.jplus_in_high_risk},
                               {"jplus_nonempty", rep.jplus_nonempty},
                               {"limit_mass_ok", rep.limit_mass_ok},
                               {"ratio_matches_M", rep.ratio_matches_M},
                               {"pass", rep.pass}});
        std::printf("limit-sign-changing: %s (M=%.6g, kappa/d_S=%.6g, |J+|=%zu)\n",
                    rep.pass ? "PASS" : "FAIL", lim.M, rep.kappa_over_ds, lim.J_plus.size());
        return rep.pass ? 0 : 2;
    }

    if (cfg.command == "persistence2") {
        const auto rep =
            model2_persistence_sweep(cfg.model, run_detail::default_ds_list(cfg), grid);
        std::vector<double> ds, min_i, int_s, int_i;
        for (const auto& row : rep.rows) {
            ds.push_back(row.d_S);
            min_i.push_back(row.min_I);
            int_s.push_back(row.int_S);
            int_i.push_back(row.int_I);
        }
        io_detail::write_table(
            dir, "sweep",
            {{"d_S", ds}, {"min_I", min_i}, {"int_S", int_s}, {"int_I", int_i}}, cfg.output);
        io_detail::write_json(dir, "result",
                              {{"eta", rep.eta},
                               {"int_Lambda", rep.int_lambda},
                               {"min_I_bounded", rep.min_I_bounded},
                               {"mass_identity_ok", rep.mass_identity_ok},
                               {"pass", rep.pass}});
        std::printf("persistence2: %s (eta=%.6e over %zu points)\n", rep.pass ? "PASS" : "FAIL",
                    rep.eta, rep.rows.size());
        return rep.pass ? 0 : 2;
    }

    if (cfg.command == "lyapunov-check") {
        if (cfg.model.kind != ModelKind::Conserved)
            throw InvalidInput("lyapunov-check: model kind must be conserved");
        // The reference equilibrium is spatially constant exactly when the
        // transmission rate is proportional to the recovery rate.
        const double r = model.beta[0] / model.gamma[0];
        for (std::size_t j = 0; j < grid.n_cells; ++j)
            if (std::abs(model.beta[j] / model.gamma[j] - r) > 1e-12 * r)
                throw InvalidInput(
                    "lyapunov-check: requires beta proportional to gamma (beta = r gamma)");
        if (!(r > 1.0)) throw InvalidInput("lyapunov-check: requires beta/gamma > 1");
        const double hatS = cfg.model.N / (r * grid.measure());
        const double hatI = (r - 1.0) / r * cfg.model.N / grid.measure();

        auto [S0, I0] = run_detail::initial_data(cfg, model);
        SimulateResult res = simulate(model, std::move(S0), std::move(I0), cfg.integrator,
                                      std::make_pair(hatS, hatI));
        io_detail::write_trajectory(dir, "trajectory", res.record, cfg.output);

        const double chi0 = 2.0 * std::sqrt((r - 1.0) * cfg.model.d_S * cfg.model.d_I) /
                            std::max(res.max_sup_I, 1e-300);
        const bool chi_small = cfg.model.chi < 0.5 * chi0;
        bool monotone = true;
        for (std::size_t k = 1; k < res.record.lyapunov.size(); ++k) {
            if (res.record.steps[k] <= 10) continue;
            if (!(res.record.lyapunov[k] <= res.record.lyapunov[k - 1] + 1e-10))
                monotone = false;
        }
        const bool pass = chi_small && monotone;
        io_detail::write_json(dir, "result",
                              {{"chi", cfg.model.chi},
                               {"chi0_estimate", chi0},
                               {"chi_below_half_estimate", chi_small},
                               {"lyapunov_monotone", monotone},
                               {"final_V", res.record.lyapunov.back()},
                               {"pass", pass}});
        std::printf("lyapunov-check: %s (chi=%.3g, chi0 estimate=%.3g, final V=%.3e)\n",
                    pass ? "PASS" : "FAIL", cfg.model.chi, chi0, res.record.lyapunov.back());
        return pass ? 0 : 2;
    }

    if (cfg.command == "decay-check") {
        const EigenResult e =
            principal_eigenpair(cfg.model.d_I, model.beta, model.gamma, grid, cfg.seed);
        if (!(e.lambda_star > 0.0))
            throw InvalidInput("decay-check: lambda* <= 0 (R0 >= 1), no decay envelope");
        auto [S0, I0] = run_detail::initial_data(cfg, model);
        const Field I0_copy = I0;
        SimulateResult res = simulate(model, std::move(S0), std::move(I0), cfg.integrator);
        const EnvelopeReport rep =
            decay_envelope_check(res.record, e.lambda_star, e.phi_star, I0_copy);
        io_detail::write_trajectory(dir, "trajectory", res.record, cfg.output);
        io_detail::write_json(dir, "result",
                              {{"lambda_star", e.lambda_star},
                               {"envelope_constant", rep.envelope_constant},
                               {"max_ratio", rep.max_ratio},
                               {"checked_rows", rep.checked_rows},
                               {"pass", rep.pass}});
        std::printf("decay-check: %s (lambda*=%.6g, max ratio %.9f over %ld rows)\n",
                    rep.pass ? "PASS" : "FAIL", e.lambda_star, rep.max_ratio, rep.checked_rows);
        return rep.pass ? 0 : 2;
    }

    throw InvalidInput("run: unhandled command " + cfg.command);
}

} // namespace xdiffsis
