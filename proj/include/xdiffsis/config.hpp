#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "evolve.hpp"
#include "model.hpp"

namespace xdiffsis {

struct OutputConfig {
    std::string dir = ".";
    bool csv = true;
    bool json = true;
    unsigned workers = 0; // 0: hardware concurrency
};

struct SweepConfig {
    std::string parameter; // one of d_S, d_I, chi, N
    std::vector<double> values;
};

/// One experiment: a command plus the blocks it needs. Parsed from a single
/// JSON document; unknown commands and malformed blocks are rejected with
/// the offending key path.
struct ExperimentConfig {
    std::string command;
    std::uint64_t seed = 0;
    ModelParams model;
    double x_left = 0.0;
    double x_right = 1.0;
    std::size_t n_cells = 256;
    IntegratorConfig integrator;
    std::optional<CoefficientSpec> S0;
    std::optional<CoefficientSpec> I0;
    std::optional<SweepConfig> sweep;
    std::optional<std::pair<double, double>> bracket;
    double tol_one = 1e-3;
    bool richardson = false;
    OutputConfig output;

    Grid1D make_grid() const { return Grid1D(x_left, x_right, n_cells); }
};

namespace cfg_detail {

using nlohmann::json;

[[noreturn]] inline void fail(const std::string& path, const std::string& why) {
    throw InvalidInput("config: " + path + " " + why);
}

inline const json* find(const json& j, const std::string& key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

inline double number(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "must be a number");
    return j.get<double>();
}

inline double number_or(const json& obj, const std::string& parent, const std::string& key,
                        double fallback) {
    const json* v = find(obj, key);
    return v ? number(*v, parent + "." + key) : fallback;
}

inline CoefficientSpec coefficient(const json& j, const std::string& path) {
    if (j.is_number()) return CoefficientSpec::constant(j.get<double>());
    if (!j.is_object()) fail(path, "must be a number or an object with a \"kind\"");
    const json* kind = find(j, "kind");
    if (!kind || !kind->is_string()) fail(path + ".kind", "is required");
    const std::string k = kind->get<std::string>();
    if (k == "constant") {
        const json* v = find(j, "value");
        if (!v) fail(path + ".value", "is required for kind constant");
        return CoefficientSpec::constant(number(*v, path + ".value"));
    }
    if (k == "affine")
        return CoefficientSpec::affine(number_or(j, path, "a", 0.0), number_or(j, path, "b", 0.0));
    if (k == "cosine") {
        int wave = 1;
        if (const json* w = find(j, "k")) {
            if (!w->is_number_integer()) fail(path + ".k", "must be an integer wavenumber");
            wave = w->get<int>();
        }
        return CoefficientSpec::cosine(number_or(j, path, "a", 0.0), number_or(j, path, "b", 0.0),
                                       wave);
    }
    if (k == "samples") {
        const json* v = find(j, "values");
        if (!v || !v->is_array()) fail(path + ".values", "must be an array of numbers");
        Field samples;
        samples.reserve(v->size());
        for (std::size_t i = 0; i < v->size(); ++i)
            samples.push_back(number((*v)[i], path + ".values[" + std::to_string(i) + "]"));
        return CoefficientSpec::from_samples(std::move(samples));
    }
    fail(path + ".kind", "must be one of constant|affine|cosine|samples");
}

} // namespace cfg_detail

inline const std::vector<std::string>& known_commands() {
    static const std::vector<std::string> cmds = {
        "simulate",       "r0",           "eigen",
        "critical-di",    "ee",           "dfe2",
        "ee2",            "limit-high-risk", "limit-sign-changing",
        "persistence2",   "lyapunov-check",  "decay-check"};
    return cmds;
}

/// Parses and validates an experiment description. The command may come from
/// the document or from the CLI; when both are present they must agree.
inline ExperimentConfig parse_config(const std::string& text,
                                     std::optional<std::string> command_override = {}) {
    using cfg_detail::fail;
    using cfg_detail::find;
    using cfg_detail::number;
    using cfg_detail::number_or;
    using nlohmann::json;

    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidInput(std::string("config: not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw InvalidInput("config: top level must be an object");

    ExperimentConfig out;

    if (const json* c = find(root, "command")) {
        if (!c->is_string()) fail("command", "must be a string");
        out.command = c->get<std::string>();
    }
    if (command_override) {
        if (!out.command.empty() && out.command != *command_override)
            fail("command", "disagrees with the command given on the command line");
        out.command = *command_override;
    }
    if (out.command.empty()) fail("command", "is required");
    const auto& cmds = known_commands();
    if (std::find(cmds.begin(), cmds.end(), out.command) == cmds.end())
        fail("command", "\"" + out.command + "\" is not a known command");

    if (const json* s = find(root, "seed")) {
        if (!s->is_number_unsigned()) fail("seed", "must be a nonnegative integer");
        out.seed = s->get<std::uint64_t>();
    }

    // Grid block.
    if (const json* g = find(root, "grid")) {
        if (!g->is_object()) fail("grid", "must be an object");
        out.x_left = number_or(*g, "grid", "x_left", 0.0);
        out.x_right = number_or(*g, "grid", "x_right", 1.0);
        if (const json* n = find(*g, "n_cells")) {
            if (!n->is_number_unsigned()) fail("grid.n_cells", "must be a positive integer");
            out.n_cells = n->get<std::size_t>();
        }
        if (!(out.x_right > out.x_left)) fail("grid.x_right", "must exceed grid.x_left");
        if (out.n_cells < 4) fail("grid.n_cells", "must be at least 4");
    }

    // Model block.
    const json* m = find(root, "model");
    if (!m) fail("model", "is required");
    if (!m->is_object()) fail("model", "must be an object");
    if (const json* k = find(*m, "kind")) {
        if (!k->is_string()) fail("model.kind", "must be a string");
        const std::string kind = k->get<std::string>();
        if (kind == "conserved")
            out.model.kind = ModelKind::Conserved;
        else if (kind == "source")
            out.model.kind = ModelKind::Source;
        else
            fail("model.kind", "must be conserved or source");
    }
    out.model.d_S = number_or(*m, "model", "d_S", 1.0);
    out.model.d_I = number_or(*m, "model", "d_I", 1.0);
    out.model.chi = number_or(*m, "model", "chi", 1.0);
    out.model.N = number_or(*m, "model", "N", 1.0);
    if (!(out.model.d_S > 0.0)) fail("model.d_S", "must be positive");
    if (!(out.model.d_I > 0.0)) fail("model.d_I", "must be positive");
    if (!(out.model.chi >= 0.0)) fail("model.chi", "must be nonnegative");
    if (out.model.kind == ModelKind::Conserved && !(out.model.N > 0.0))
        fail("model.N", "must be positive");

    const json* beta = find(*m, "beta");
    if (!beta) fail("model.beta", "is required");
    out.model.beta = cfg_detail::coefficient(*beta, "model.beta");
    const json* gamma = find(*m, "gamma");
    if (!gamma) fail("model.gamma", "is required");
    out.model.gamma = cfg_detail::coefficient(*gamma, "model.gamma");
    if (out.model.kind == ModelKind::Source) {
        if (const json* lam = find(*m, "Lambda"))
            out.model.lambda = cfg_detail::coefficient(*lam, "model.Lambda");
        else
            out.model.lambda = CoefficientSpec::constant(1.0);
    }

    // Rates must be positive on the actual grid; evaluating here surfaces the
    // violation with the config path instead of deep inside a solver.
    {
        Grid1D grid = out.make_grid();
        try {
            Model probe(out.model, grid);
        } catch (const InvalidInput& e) {
            throw InvalidInput(std::string("config: model block invalid: ") + e.what());
        }
    }

    // Integrator block.
    if (const json* integ = find(root, "integrator")) {
        if (!integ->is_object()) fail("integrator", "must be an object");
        out.integrator.dt_init = number_or(*integ, "integrator", "dt_init", 0.0);
        out.integrator.dt_min = number_or(*integ, "integrator", "dt_min", 1e-14);
        out.integrator.t_end = number_or(*integ, "integrator", "t_end", 50.0);
        out.integrator.safety = number_or(*integ, "integrator", "safety", 1.0);
        if (const json* r = find(*integ, "record_every")) {
            if (!r->is_number_unsigned() || r->get<long>() < 1)
                fail("integrator.record_every", "must be a positive integer");
            out.integrator.record_every = r->get<long>();
        }
        if (const json* r = find(*integ, "positivity_retries")) {
            if (!r->is_number_unsigned()) fail("integrator.positivity_retries",
                                               "must be a nonnegative integer");
            out.integrator.positivity_retries = r->get<int>();
        }
        if (const json* r = find(*integ, "max_steps")) {
            if (!r->is_number_unsigned()) fail("integrator.max_steps",
                                               "must be a nonnegative integer");
            out.integrator.max_steps = r->get<long>();
        }
        if (!(out.integrator.t_end > 0.0)) fail("integrator.t_end", "must be positive");
        if (!(out.integrator.safety > 0.0 && out.integrator.safety <= 1.0))
            fail("integrator.safety", "must lie in (0, 1]");
    }

    // Initial data block.
    if (const json* init = find(root, "initial")) {
        if (!init->is_object()) fail("initial", "must be an object");
        if (const json* s = find(*init, "S0")) out.S0 = cfg_detail::coefficient(*s, "initial.S0");
        if (const json* i = find(*init, "I0")) out.I0 = cfg_detail::coefficient(*i, "initial.I0");
    }

    // Sweep block.
    if (const json* sw = find(root, "sweep")) {
        if (!sw->is_object()) fail("sweep", "must be an object");
        SweepConfig sweep;
        const json* par = find(*sw, "parameter");
        if (!par || !par->is_string()) fail("sweep.parameter", "is required");
        sweep.parameter = par->get<std::string>();
        if (sweep.parameter != "d_S" && sweep.parameter != "d_I" && sweep.parameter != "chi" &&
            sweep.parameter != "N")
            fail("sweep.parameter", "must be one of d_S|d_I|chi|N");
        const json* vals = find(*sw, "values");
        if (!vals || !vals->is_array() || vals->empty())
            fail("sweep.values", "must be a nonempty array of numbers");
        for (std::size_t i = 0; i < vals->size(); ++i)
            sweep.values.push_back(
                number((*vals)[i], "sweep.values[" + std::to_string(i) + "]"));
        out.sweep = std::move(sweep);
    }

    // Bracket block (critical-di).
    if (const json* br = find(root, "bracket")) {
        if (!br->is_object()) fail("bracket", "must be an object");
        const double lo = number_or(*br, "bracket", "d_lo", 0.0);
        const double hi = number_or(*br, "bracket", "d_hi", 0.0);
        if (!(lo > 0.0) || !(hi > lo)) fail("bracket", "needs 0 < d_lo < d_hi");
        out.bracket = std::make_pair(lo, hi);
    }

    // Tolerances block.
    if (const json* tol = find(root, "tolerances")) {
        if (!tol->is_object()) fail("tolerances", "must be an object");
        out.tol_one = number_or(*tol, "tolerances", "tol_one", 1e-3);
        if (!(out.tol_one > 0.0 && out.tol_one < 1.0))
            fail("tolerances.tol_one", "must lie in (0, 1)");
        if (const json* r = find(*tol, "richardson")) {
            if (!r->is_boolean()) fail("tolerances.richardson", "must be a boolean");
            out.richardson = r->get<bool>();
        }
    }

    // Output block.
    if (const json* o = find(root, "output")) {
        if (!o->is_object()) fail("output", "must be an object");
        if (const json* d = find(*o, "dir")) {
            if (!d->is_string()) fail("output.dir", "must be a string");
            out.output.dir = d->get<std::string>();
        }
        if (const json* f = find(*o, "formats")) {
            if (!f->is_array()) fail("output.formats", "must be an array");
            out.output.csv = false;
            out.output.json = false;
            for (const auto& e : *f) {
                if (!e.is_string()) fail("output.formats", "entries must be strings");
                const std::string s = e.get<std::string>();
                if (s == "csv")
                    out.output.csv = true;
                else if (s == "json")
                    out.output.json = true;
                else
                    fail("output.formats", "entries must be csv or json");
            }
            if (!out.output.csv && !out.output.json)
                fail("output.formats", "must select at least one format");
        }
        if (const json* w = find(*o, "workers")) {
            if (!w->is_number_unsigned()) fail("output.workers", "must be a nonnegative integer");
            out.output.workers = w->get<unsigned>();
        }
        if (const json* r = find(*o, "record_every")) {
            if (!r->is_number_unsigned() || r->get<long>() < 1)
                fail("output.record_every", "must be a positive integer");
            out.integrator.record_every = r->get<long>();
        }
    }

    if (out.command == "critical-di" && !out.bracket)
        fail("bracket", "is required for critical-di");

    return out;
}

} // namespace xdiffsis
