#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "xdiffsis/asymptotics.hpp"

using namespace xdiffsis;

namespace {

ModelParams conserved_template() {
    ModelParams p;
    p.kind = ModelKind::Conserved;
    p.d_S = 1.0;
    p.d_I = 1.0;
    p.chi = 0.5;
    p.N = 1.0;
    p.beta = CoefficientSpec::constant(2.0);
    p.gamma = CoefficientSpec::constant(1.0);
    return p;
}

} // namespace

TEST_CASE("high-risk limit profile") {
    Grid1D g(0.0, 1.0, 64);

    SECTION("constants beta=2, gamma=1: even split") {
        const auto lim = limit_profile_high_risk(constant_field(g, 2.0), constant_field(g, 1.0),
                                                 1.0, g);
        CHECK(lim.I_star == Catch::Approx(0.5).margin(1e-14));
        for (double v : lim.S_star) CHECK(v == Catch::Approx(0.5).margin(1e-14));
    }
    SECTION("constants beta=3, gamma=1: one-third split") {
        const auto lim = limit_profile_high_risk(constant_field(g, 3.0), constant_field(g, 1.0),
                                                 1.0, g);
        CHECK(lim.I_star == Catch::Approx(2.0 / 3.0).margin(1e-14));
        for (double v : lim.S_star) CHECK(v == Catch::Approx(1.0 / 3.0).margin(1e-14));
    }
    SECTION("heterogeneous beta = 2 + x: mass identity") {
        const Field beta = evaluate_spec(CoefficientSpec::affine(2.0, 1.0), g);
        const Field gamma = constant_field(g, 1.0);
        const auto lim = limit_profile_high_risk(beta, gamma, 1.0, g);
        Field total = lim.S_star;
        for (double& v : total) v += lim.I_star;
        CHECK(std::abs(integrate(total, g) - 1.0) <= 1e-10);
    }
    SECTION("rejects landscapes with low-risk sites") {
        CHECK_THROWS_AS(limit_profile_high_risk(constant_field(g, 0.9), constant_field(g, 1.0),
                                                1.0, g),
                        InvalidInput);
    }
}

TEST_CASE("high-risk sweep converges to the limit") {
    Grid1D g(0.0, 1.0, 64);

    SECTION("constant rates: every solve already sits on the limit") {
        const auto rep = verify_high_risk_limit(conserved_template(), {1e-1, 1e-2, 1e-3, 1e-4}, g);
        CHECK(rep.pass);
        CHECK(rep.gaps.back() < 1e-3);
    }
    SECTION("heterogeneous rates: genuine monotone convergence") {
        ModelParams p = conserved_template();
        p.beta = CoefficientSpec::affine(2.0, 1.0);
        const auto rep = verify_high_risk_limit(p, {1e-1, 1e-2, 1e-3, 1e-4}, g);
        CHECK(rep.monotone);
        CHECK(rep.final_below_threshold);
        CHECK(rep.kappa_bounded_away);
        CHECK(rep.gaps.front() > rep.gaps.back());
    }
}

TEST_CASE("mass-equation root M") {
    Grid1D g(0.0, 1.0, 64);

    SECTION("constant Itilde*: closed form") {
        const double c = 0.4, chi = 0.8, d_I = 1.3, N = 2.0;
        const double m = solve_M(constant_field(g, c), chi, d_I, N, g);
        const double closed = std::log(N * chi / (d_I * g.measure()) + 1.0) / (chi * (1.0 - c));
        CHECK(m == Catch::Approx(closed).epsilon(1e-10));
    }
    SECTION("Itilde* identically 1 has no root") {
        CHECK_THROWS_AS(solve_M(constant_field(g, 1.0), 1.0, 1.0, 1.0, g), InvalidInput);
    }
    SECTION("heterogeneous Itilde*: residual at the root") {
        Field itilde(g.n_cells);
        for (std::size_t j = 0; j < g.n_cells; ++j)
            itilde[j] = 0.9 + 0.09 * std::cos(2.0 * std::numbers::pi * g.center(j));
        const double chi = 1.0, d_I = 1.0, N = 1.0;
        const double m = solve_M(itilde, chi, d_I, N, g);
        double lhs = 0.0;
        for (std::size_t j = 0; j < g.n_cells; ++j)
            lhs += std::exp(chi * (1.0 - itilde[j]) * m);
        lhs *= g.h();
        const double rhs = N * chi / d_I + g.measure();
        CHECK(std::abs(lhs - rhs) <= 1e-10 * rhs);
    }
    SECTION("left side grows in M") {
        Field itilde = constant_field(g, 0.5);
        auto lhs = [&](double m) {
            double s = 0.0;
            for (std::size_t j = 0; j < g.n_cells; ++j)
                s += std::exp(1.0 * (1.0 - itilde[j]) * m);
            return g.h() * s;
        };
        CHECK(lhs(0.5) < lhs(1.0));
        CHECK(lhs(1.0) < lhs(2.0));
    }
}

TEST_CASE("limit susceptible profile around the plateau") {
    Grid1D g(0.0, 1.0, 64);
    // Synthetic Itilde* hitting 1 exactly on a block of cells.
    Field itilde(g.n_cells, 1.0);
    for (std::size_t j = 0; j < g.n_cells / 2; ++j) itilde[j] = 0.6;
    const double chi = 0.7, d_I = 1.2, N = 1.0;
    const double m = solve_M(itilde, chi, d_I, N, g);

    SECTION("S* vanishes exactly on the plateau and is positive off it") {
        for (std::size_t j = 0; j < g.n_cells; ++j) {
            const double s = d_I / chi * std::expm1(chi * (1.0 - itilde[j]) * m);
            if (itilde[j] == 1.0)
                CHECK(s == 0.0);
            else
                CHECK(s > 0.0);
        }
    }
    SECTION("S* carries the whole mass") {
        Field sstar(g.n_cells);
        for (std::size_t j = 0; j < g.n_cells; ++j)
            sstar[j] = d_I / chi * std::expm1(chi * (1.0 - itilde[j]) * m);
        CHECK(integrate(sstar, g) == Catch::Approx(N).margin(1e-9));
    }
    SECTION("small chi matches the cross-diffusion-free form") {
        const double chi0 = 1e-6;
        const double m0 = solve_M(itilde, chi0, d_I, N, g);
        Field one_minus(g.n_cells);
        for (std::size_t j = 0; j < g.n_cells; ++j) one_minus[j] = 1.0 - itilde[j];
        const double nstar = N / (d_I * integrate(one_minus, g));
        for (std::size_t j = 0; j < g.n_cells; ++j) {
            const double s = d_I / chi0 * std::expm1(chi0 * (1.0 - itilde[j]) * m0);
            const double ref = d_I * (1.0 - itilde[j]) * nstar;
            if (ref > 0.0) CHECK(s == Catch::Approx(ref).epsilon(1e-4));
        }
    }
}

TEST_CASE("sign-changing landscape: full d_S sweep") {
    Grid1D g(0.0, 1.0, 128);
    ModelParams p = conserved_template();
    p.chi = 1.0;
    p.beta = CoefficientSpec::cosine(1.05, 0.9, 2); // low-risk belt around x = 1/2
    p.gamma = CoefficientSpec::constant(1.0);
    const auto [lim, rep] = sign_changing_limit(p, {1e-1, 1e-2, 1e-3, 1e-4}, g, 1e-3);

    CHECK(rep.kappa_vanishing);
    CHECK(rep.sup_I_vanishing);
    CHECK(rep.hminus_in_jminus);
    CHECK(rep.jplus_in_high_risk);
    CHECK(rep.jplus_nonempty);
    CHECK(rep.limit_mass_ok);
    CHECK(rep.ratio_matches_M);
    CHECK(rep.pass);
    CHECK(lim.M > 0.0);
    CHECK(lim.J_minus.size() + lim.J_plus.size() == g.n_cells);
    // Low-risk cells keep susceptibles in the limit; the plateau sits inside
    // the high-risk region.
    CHECK(lim.H_minus.size() > 0);
    CHECK(lim.J_plus.size() < g.n_cells / 2);
}

TEST_CASE("source-model persistence sweep") {
    Grid1D g(0.0, 1.0, 48);
    ModelParams p;
    p.kind = ModelKind::Source;
    p.d_S = 1.0;
    p.d_I = 1.0;
    p.chi = 0.5;
    p.beta = CoefficientSpec::constant(2.0);
    p.gamma = CoefficientSpec::constant(1.0);
    p.lambda = CoefficientSpec::constant(1.0);

    SECTION("constant rates: the equilibrium ignores d_S") {
        const auto rep = model2_persistence_sweep(p, {1e-1, 1e-2, 1e-3}, g);
        CHECK(rep.pass);
        for (const auto& row : rep.rows) CHECK(row.min_I == Catch::Approx(1.0).margin(1e-5));
    }
    SECTION("sign-changing rates with R0 > 1: infection survives small d_S") {
        ModelParams q = p;
        q.beta = CoefficientSpec::cosine(1.6, 0.8, 2);
        const auto rep = model2_persistence_sweep(q, {1e-1, 1e-2, 1e-3, 1e-4}, g);
        CHECK(rep.min_I_bounded);
        CHECK(rep.mass_identity_ok);
        CHECK(rep.eta > 0.0);
        CHECK(rep.pass);
    }
}
