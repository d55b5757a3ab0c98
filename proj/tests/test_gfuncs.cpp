#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "nanopnp/gfuncs.hpp"

using namespace nanopnp;
using Catch::Approx;

TEST_CASE("strong-charge branch values", "[gfuncs]") {
    // (beta^2 + 12 beta + 48)/(beta (beta+4)) / (48 lambda^2)
    CHECK(g1_large(3.0, 50.0) == Approx(3148.0 / 1166400.0).epsilon(1e-14));
    CHECK(g1_large(3.0, 50.0) == Approx(2.699e-3).epsilon(1e-3));
    CHECK(g1_large(1.0, 50.0) == Approx(0.0242901).epsilon(1e-5));
    CHECK_THROWS_AS(g1_large(1.0, 0.0), DomainError);
    CHECK_THROWS_AS(g1_large(1.0, -5.0), DomainError);
    CHECK_THROWS_AS(g1_large(0.0, 5.0), NonPositiveInput);
}

TEST_CASE("thin-layer branch values and exact identity", "[gfuncs]") {
    CHECK(g1_small(0.1, 50.0) == Approx(0.3958064).epsilon(1e-6));
    CHECK(g2_small(0.1, 50.0) - g1_small(0.1, 50.0) == Approx(0.5).margin(1e-14));
    // The pair satisfies g2 - g1 = lambda^2 beta identically, any beta sign.
    for (double lambda : {0.02, 0.1, 0.3}) {
        for (double beta : {-60.0, -5.0, 1.0, 10.0, 50.0}) {
            CHECK(g2_small(lambda, beta) - g1_small(lambda, beta) ==
                  Approx(lambda * lambda * beta).margin(1e-13));
        }
    }
    // Sign mirror: g1(-B) = g2(+B).
    CHECK(g1_small(0.1, -50.0) == Approx(g2_small(0.1, 50.0)).margin(1e-14));
}

TEST_CASE("switching weight midpoint and limits", "[gfuncs]") {
    CHECK(lambda_switch(50.0) == Approx(0.294));
    CHECK(switching_weight(0.294, 50.0) == Approx(0.5).margin(1e-12));
    CHECK(switching_weight(3.0, 50.0) == Approx(1.0).margin(1e-10));
    CHECK(switching_weight(0.02, 50.0) == Approx(0.0).margin(2e-3));
    CHECK(switching_weight(1.176, 1.0) == Approx(0.5).margin(1e-12));
}

TEST_CASE("smoothed blend limits at the regime extremes", "[gfuncs]") {
    CHECK(g1_smooth(3.0, 50.0) == Approx(g1_large(3.0, 50.0)).epsilon(1e-8));
    // The frozen strong-charge value at the cutoff still carries a small
    // weight near lambda = 0.02, so the limit is only reached to ~1%.
    CHECK(g1_smooth(0.02, 50.0) == Approx(g1_small(0.02, 50.0)).epsilon(1e-2));
    CHECK_THROWS_AS(g1_smooth(1.0, -3.0), DomainError);
}

TEST_CASE("smoothed blend is continuous across the cutoff", "[gfuncs]") {
    // The strong-charge branch freezes below lambda = 0.1. The freeze pins the
    // branch at its cutoff value, so the blend is continuous there.
    for (double beta : {5.0, 50.0}) {
        const double below = g1_smooth(0.1 - 1e-9, beta);
        const double above = g1_smooth(0.1 + 1e-9, beta);
        CHECK(std::abs(above - below) / below < 1e-6);
    }
    // Dense scan: no step may spike far above its neighbours (a jump would show
    // as one step much larger than the smooth slope on either side).
    for (double beta : {5.0, 50.0}) {
        std::vector<double> step(400);
        double prev = g1_smooth(0.05, beta);
        for (int i = 1; i <= 400; ++i) {
            const double lambda = 0.05 + 0.25 * i / 400.0;
            const double cur = g1_smooth(lambda, beta);
            step[static_cast<std::size_t>(i - 1)] = std::abs(cur - prev);
            prev = cur;
        }
        for (std::size_t i = 1; i + 1 < step.size(); ++i) {
            const double neighbours = 0.5 * (step[i - 1] + step[i + 1]);
            CHECK(step[i] < 2.0 * neighbours + 1e-12);
        }
    }
}

TEST_CASE("smoothed blend nonincreasing in beta", "[gfuncs]") {
    // Stronger wall charge depletes the co-ion further. Both branches assume
    // beta well above one, so the chain starts where the blend is meaningful.
    for (double lambda : {0.05, 0.1, 0.2, 0.3, 0.5, 1.0, 3.0}) {
        double prev = g1_smooth(lambda, 5.0);
        for (double beta : {10.0, 20.0, 50.0, 100.0}) {
            const double cur = g1_smooth(lambda, beta);
            CHECK(cur <= prev + 1e-9);
            prev = cur;
        }
    }
}

TEST_CASE("branches agree with the radial oracle in their windows", "[gfuncs]") {
    for (double lambda : {1.0, 2.0, 3.0}) {
        RadialProblem prob;
        prob.lambda = lambda;
        prob.beta = 50.0;
        prob.n_intervals = 2048;
        const double oracle = solve_psi(prob).g1;
        CHECK(std::abs(g1_large(lambda, 50.0) - oracle) / oracle < 0.10);
    }
    for (double lambda : {0.05, 0.02}) {
        RadialProblem prob;
        prob.lambda = lambda;
        prob.beta = 50.0;
        prob.n_intervals = 2048;
        const double oracle = solve_psi(prob).g1;
        CHECK(std::abs(g1_small(lambda, 50.0) - oracle) / oracle < 0.10);
    }
}

TEST_CASE("g2 closure and its failure mode", "[gfuncs]") {
    CHECK(g2_from_g1(0.4, 0.1, 50.0) == Approx(0.9));
    CHECK_THROWS_AS(g2_from_g1(0.0, 0.1, 50.0), NonPositiveG);
    CHECK_THROWS_AS(g2_from_g1(0.1, 1.0, -1.0), NonPositiveG);
}

TEST_CASE("moment pair evaluation across beta signs", "[gfuncs]") {
    const auto zero = eval_g(0.7, 0.0);
    CHECK(zero.g1 == 0.5);
    CHECK(zero.g2 == 0.5);
    CHECK(zero.regime == GRegime::Trivial);

    const auto plus = eval_g(0.3, 20.0);
    CHECK(plus.regime == GRegime::Smoothed);
    CHECK(plus.g2 - plus.g1 == Approx(0.09 * 20.0).margin(1e-12));
    CHECK(plus.g1 == Approx(g1_smooth(0.3, 20.0)));

    const auto minus = eval_g(0.3, -20.0);
    CHECK(minus.g1 == Approx(plus.g2));
    CHECK(minus.g2 == Approx(plus.g1));
    CHECK(minus.g2 - minus.g1 == Approx(-0.09 * 20.0).margin(1e-12));

    // Oracle mode: mirrored evaluation matches a direct radial solve.
    const auto om = eval_g(0.4, -12.0, GMode::NumericOracle);
    RadialProblem prob;
    prob.lambda = 0.4;
    prob.beta = -12.0;
    prob.n_intervals = 384;
    const auto direct = solve_psi(prob);
    CHECK(om.g2 == Approx(direct.g2).epsilon(1e-6));
    CHECK(om.g2 - om.g1 == Approx(-0.16 * 12.0).margin(1e-12));
}

TEST_CASE("smoothed blend against the oracle, spot values", "[gfuncs]") {
    // Unit-level spot checks of the blend quality; the acceptance suite scans
    // the full 50-point grid. The blend's worst error at beta=50 sits near
    // lambda 0.41 at just over 5%.
    struct Row { double lambda, beta, tol; };
    for (const Row& r : {Row{0.05, 50.0, 0.02}, Row{0.15, 50.0, 0.03},
                         Row{0.3, 50.0, 0.03}, Row{1.0, 50.0, 0.01},
                         Row{3.0, 50.0, 0.01}, Row{0.6, 5.0, 0.10}}) {
        RadialProblem prob;
        prob.lambda = r.lambda;
        prob.beta = r.beta;
        prob.n_intervals = 2048;
        const double oracle = solve_psi(prob).g1;
        INFO("lambda=" << r.lambda << " beta=" << r.beta);
        CHECK(std::abs(g1_smooth(r.lambda, r.beta) - oracle) / oracle < r.tol);
    }
}
