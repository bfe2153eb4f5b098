#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "xdiffsis/steady.hpp"

using namespace xdiffsis;

namespace {

ModelParams conserved(double d_S, double d_I, double chi, double N = 1.0) {
    ModelParams p;
    p.kind = ModelKind::Conserved;
    p.d_S = d_S;
    p.d_I = d_I;
    p.chi = chi;
    p.N = N;
    p.beta = CoefficientSpec::constant(2.0);
    p.gamma = CoefficientSpec::constant(1.0);
    return p;
}

} // namespace

TEST_CASE("equilibrium map g") {
    ModelParams p = conserved(1.0, 1.0, 1.0);

    SECTION("vanishes at Itilde = 1") {
        CHECK(g_of_Itilde(1.0, 0.8, p) == 0.0);
    }
    SECTION("unit parameters at Itilde = 0 give e - 1") {
        // kappa chi / d_S = 1 with d_I = chi = 1.
        CHECK(g_of_Itilde(0.0, 1.0, p) == Catch::Approx(std::expm1(1.0)).epsilon(1e-14));
    }
    SECTION("strictly decreasing on (0, 1]") {
        double prev = g_of_Itilde(0.0, 0.7, p);
        for (double it = 0.1; it <= 1.0001; it += 0.1) {
            const double v = g_of_Itilde(it, 0.7, p);
            CHECK(v < prev);
            prev = v;
        }
    }
    SECTION("tiny chi matches the first-order expansion") {
        ModelParams q = conserved(0.5, 2.0, 1e-8);
        const double kappa = 0.9;
        for (double it : {0.0, 0.3, 0.9}) {
            const double linear = kappa * q.d_I / q.d_S * (1.0 - it);
            CHECK(g_of_Itilde(it, kappa, q) == Catch::Approx(linear).epsilon(1e-6));
        }
        // The analytic chi = 0 branch agrees with the expansion too.
        ModelParams z = conserved(0.5, 2.0, 0.0);
        CHECK(g_of_Itilde(0.3, kappa, z) == Catch::Approx(kappa * 4.0 * 0.7).epsilon(1e-14));
    }
    SECTION("overflow guard") {
        ModelParams q = conserved(1e-6, 1.0, 1.0);
        CHECK_THROWS_AS(g_of_Itilde(0.0, 1.0, q), KappaOverflow);
    }
}

TEST_CASE("scalar reduction on constant rates") {
    Grid1D g(0.0, 1.0, 64);
    Model m(conserved(1.0, 1.0, 1.0), g);
    const double kappa = 0.8;
    const Field itilde = solve_scalar_reduction(kappa, m);

    SECTION("solution is spatially constant with tiny residual") {
        CHECK(max_value(itilde) - min_value(itilde) < 1e-12);
        detail::ReductionTerms t = detail::reduction_terms(itilde, kappa, m);
        CHECK(sup_norm(detail::reduction_residual(itilde, t, m)) < 1e-10);
    }
    SECTION("strictly inside the unit interval") {
        CHECK(min_value(itilde) > 0.0);
        CHECK(max_value(itilde) < 1.0);
    }
    SECTION("parabolic march lands on the same profile") {
        const Field oracle = oracles::parabolic_reduction_march(kappa, m);
        CHECK(sup_diff(itilde, oracle) < 1e-6);
    }
}

TEST_CASE("scalar reduction on heterogeneous rates vs parabolic oracle") {
    Grid1D g(0.0, 1.0, 128);
    ModelParams p = conserved(1.0, 1.0, 1.0);
    p.beta = CoefficientSpec::cosine(1.5, 1.0, 1);
    Model m(p, g);
    const double kappa = 0.85;
    const Field itilde = solve_scalar_reduction(kappa, m);
    CHECK(min_value(itilde) > 0.0);
    CHECK(max_value(itilde) < 1.0);
    const Field oracle = oracles::parabolic_reduction_march(kappa, m);
    CHECK(sup_diff(itilde, oracle) < 1e-6);
}

TEST_CASE("scalar reduction refuses subcritical landscapes") {
    Grid1D g(0.0, 1.0, 32);
    Model m(conserved(1.0, 1.0, 1.0), g);
    ModelParams sub = conserved(1.0, 1.0, 1.0);
    sub.beta = CoefficientSpec::constant(0.5);
    Model msub(sub, g);
    CHECK_THROWS_AS(solve_scalar_reduction(0.5, msub), InvalidInput);
}

TEST_CASE("kappa residual brackets the mass constraint") {
    Grid1D g(0.0, 1.0, 64);
    ModelParams p = conserved(1.0, 1.0, 1.0);
    p.beta = CoefficientSpec::cosine(1.5, 1.0, 1);
    Model m(p, g);

    SECTION("small kappa undershoots toward -N") {
        const double r = kappa_residual(1e-6, m);
        CHECK(r < 0.0);
        CHECK(r == Catch::Approx(-1.0).margin(1e-3));
    }
    SECTION("large kappa overshoots") {
        CHECK(kappa_residual(4.0, m) > 0.0);
    }
}

TEST_CASE("endemic equilibrium of the conserved model, constant rates") {
    Grid1D g(0.0, 1.0, 64);
    for (double chi : {1e-3, 0.1}) {
        Model m(conserved(0.7, 1.3, chi), g);
        const SteadyProfile ee = solve_endemic_model1(m);
        CHECK(sup_diff(ee.S, constant_field(g, 0.5)) < 1e-8);
        CHECK(sup_diff(ee.I, constant_field(g, 0.5)) < 1e-8);
        CHECK(ee.mass_residual <= 1e-8 * m.params.N);
        // Conserved quantity evaluated at the constant equilibrium.
        const double kappa_expected =
            m.params.d_S / chi * std::log1p(chi * 0.5 / m.params.d_I) + 0.5;
        CHECK(ee.kappa == Catch::Approx(kappa_expected).epsilon(1e-6));
    }
}

TEST_CASE("endemic equilibrium satisfies the full discrete system") {
    Grid1D g(0.0, 1.0, 256);
    ModelParams p = conserved(1.0, 1.0, 1.0);
    p.beta = CoefficientSpec::cosine(1.5, 1.0, 1);
    Model m(p, g);
    const EndemicModel1Result ee = solve_endemic_model1_full(m);

    SECTION("residuals at the reported profile") {
        CHECK(ee.profile.pde_residual < 1e-8);
        CHECK(ee.profile.mass_residual < 1e-8 * p.N);
        CHECK(std::abs(kappa_residual(ee.profile.kappa, m)) <= 1e-8 * p.N);
    }
    SECTION("Itilde strictly inside (0, 1)") {
        CHECK(min_value(ee.itilde) > 0.0);
        CHECK(max_value(ee.itilde) < 1.0);
    }
    SECTION("reduction reconstruction nearly solves the coupled system") {
        Field S(g.n_cells), I(g.n_cells);
        for (std::size_t j = 0; j < g.n_cells; ++j) {
            S[j] = g_of_Itilde(ee.itilde[j], ee.profile.kappa, p);
            I[j] = ee.profile.kappa * ee.itilde[j];
        }
        const auto [rS, rI] = steady_residual(m, S, I);
        CHECK(std::max(sup_norm(rS), sup_norm(rI)) < 1e-8);
    }
    SECTION("conserved relation d_S Stilde + Itilde = 1 at the polished profile") {
        for (std::size_t j = 0; j < g.n_cells; ++j) {
            const double stilde = std::log1p(p.chi * ee.profile.S[j] / p.d_I) /
                                  (ee.profile.kappa * p.chi);
            const double itilde = ee.profile.I[j] / ee.profile.kappa;
            CHECK(p.d_S * stilde + itilde == Catch::Approx(1.0).margin(1e-8));
        }
    }
    SECTION("rejects subcritical landscapes") {
        ModelParams sub = p;
        sub.beta = CoefficientSpec::constant(0.5);
        Model msub(sub, g);
        CHECK_THROWS_AS(solve_endemic_model1(msub), InvalidInput);
    }
}

TEST_CASE("dynamic and static routes agree on the endemic state") {
    Grid1D g(0.0, 1.0, 48);
    Model m(conserved(1.0, 1.0, 0.1), g);
    const SteadyProfile ee = solve_endemic_model1(m);

    IntegratorConfig cfg;
    cfg.t_end = 80.0;
    cfg.dt_init = 0.02;
    cfg.store_snapshots = false;
    Field S0(g.n_cells), I0(g.n_cells);
    for (std::size_t j = 0; j < g.n_cells; ++j) {
        const double bump = 0.15 * std::cos(std::numbers::pi * g.center(j));
        S0[j] = 0.7 + bump;
        I0[j] = 0.3 - bump;
    }
    const auto sim = simulate(m, S0, I0, cfg);
    CHECK(sup_diff(sim.final_state.S, ee.S) < 1e-4);
    CHECK(sup_diff(sim.final_state.I, ee.I) < 1e-4);
}

TEST_CASE("disease-free state of the source model") {
    Grid1D g(0.0, 1.0, 128);

    SECTION("constant recruitment gives S = Lambda") {
        const Field s = solve_dfe_model2(0.8, constant_field(g, 1.7), g);
        CHECK(sup_diff(s, constant_field(g, 1.7)) < 1e-12);
    }
    SECTION("recruitment mass is preserved") {
        const Field lam = evaluate_spec(CoefficientSpec::cosine(1.0, 0.5, 2), g);
        const Field s = solve_dfe_model2(0.35, lam, g);
        CHECK(integrate(s, g) == Catch::Approx(integrate(lam, g)).margin(1e-12));
        CHECK(min_value(s) > 0.0);
    }
    SECTION("heterogeneous recruitment solves the discrete equation") {
        // n = 64 keeps the evaluation round-off of d_S*lap below the 1e-12 bar.
        Grid1D g64(0.0, 1.0, 64);
        const Field lam = evaluate_spec(CoefficientSpec::cosine(1.0, 1.0, 1), g64);
        const double d_S = 0.5;
        const Field s = solve_dfe_model2(d_S, lam, g64);
        const Field lap = neumann_laplacian(s, g64);
        for (std::size_t j = 0; j < g64.n_cells; ++j)
            CHECK(std::abs(d_S * lap[j] + lam[j] - s[j]) < 1e-12 * (1.0 + std::abs(s[j])));
    }
}

TEST_CASE("endemic equilibrium of the source model") {
    Grid1D g(0.0, 1.0, 48);
    ModelParams p;
    p.kind = ModelKind::Source;
    p.d_S = 0.6;
    p.d_I = 1.1;
    p.chi = 0.3;
    p.beta = CoefficientSpec::constant(2.0);
    p.gamma = CoefficientSpec::constant(1.0);
    p.lambda = CoefficientSpec::constant(1.0);

    SECTION("constant rates land on (Lambda, (beta-gamma)/gamma Lambda)") {
        Model m(p, g);
        const SteadyProfile ee = solve_endemic_model2(m);
        CHECK(sup_diff(ee.S, constant_field(g, 1.0)) < 1e-6);
        CHECK(sup_diff(ee.I, constant_field(g, 1.0)) < 1e-6);
    }
    SECTION("heterogeneous rates: integral identities at the equilibrium") {
        ModelParams q = p;
        q.beta = CoefficientSpec::cosine(2.0, 0.8, 2);
        q.lambda = CoefficientSpec::cosine(1.0, 0.4, 1);
        Model m(q, g);
        const SteadyProfile ee = solve_endemic_model2(m);
        const double int_lambda = integrate(m.lambda, g);
        CHECK(integrate(ee.S, g) == Catch::Approx(int_lambda).margin(1e-6));
        // gamma_min int I <= beta_max int Lambda
        CHECK(m.gamma_min() * integrate(ee.I, g) <= m.beta_max() * int_lambda + 1e-12);
        CHECK(min_value(ee.I) > 0.0);
        CHECK(ee.pde_residual < 1e-8);
    }
    SECTION("rejects subcritical landscapes") {
        ModelParams q = p;
        q.beta = CoefficientSpec::constant(0.5);
        Model m(q, g);
        CHECK_THROWS_AS(solve_endemic_model2(m), InvalidInput);
    }
}

TEST_CASE("Itilde decreases pointwise in d_S at matched kappa-solved equilibria") {
    // Shrinking the susceptible motility raises the normalized infected
    // profile everywhere: Itilde(d_S = 1e-3) >= Itilde(d_S = 1e-1).
    Grid1D g(0.0, 1.0, 64);
    ModelParams p = conserved(0.1, 1.0, 1.0);
    p.beta = CoefficientSpec::cosine(1.5, 1.0, 1);
    Model big(p, g);
    const EndemicModel1Result hi = solve_endemic_model1_full(big);
    p.d_S = 1e-3;
    Model small(p, g);
    const EndemicModel1Result lo = solve_endemic_model1_full(small);
    for (std::size_t j = 0; j < g.n_cells; ++j)
        CHECK(hi.itilde[j] <= lo.itilde[j] + 1e-6);

    // Same direction for the scalar reduction at one fixed kappa.
    const double kappa = 0.5;
    p.d_S = 0.1;
    Model big2(p, g);
    const Field it_hi = solve_scalar_reduction(kappa, big2);
    p.d_S = 1e-3;
    Model small2(p, g);
    const Field it_lo = solve_scalar_reduction(kappa, small2);
    for (std::size_t j = 0; j < g.n_cells; ++j)
        CHECK(it_hi[j] <= it_lo[j] + 1e-6);
}
