#include <catch2/catch_amalgamated.hpp>

#include "nanopnp/scenario.hpp"

using namespace nanopnp;
using Catch::Approx;

namespace {

PoreScenario tenth_molar_trumpet() {
    PoreScenario sc;
    sc.name = "trumpet";
    sc.electrolyte.conc_scale_mol_l = 0.1;
    sc.geometry.length_nm = 1000.0;
    sc.geometry.radius_scale_nm = 1.0;
    sc.geometry.profile = TrumpetProfile{10.0, 1.5};
    sc.surface_charge = {1.0, 100.0, 900.0};
    sc.boundary.voltage = 0.2;
    sc.boundary.conc_left_p_mol_l = sc.boundary.conc_left_n_mol_l = 0.1;
    sc.boundary.conc_right_p_mol_l = sc.boundary.conc_right_n_mol_l = 0.1;
    return sc;
}

} // namespace

TEST_CASE("radius evaluation per profile kind", "[model]") {
    PoreGeometry g;
    g.length_nm = 1000.0;
    g.radius_scale_nm = 1.0;

    g.profile = CylindricalProfile{5.0};
    CHECK(eval_radius(g, 0.0) == Approx(5.0));
    CHECK(eval_radius(g, 0.37) == Approx(5.0));
    CHECK(eval_radius_derivative(g, 0.37) == 0.0);

    g.profile = TrumpetProfile{10.0, 1.5};
    CHECK(eval_radius(g, 0.0) == Approx(10.0));
    CHECK(eval_radius(g, 1.0) == Approx(10.0));
    CHECK(eval_radius(g, 0.5) == Approx(1.5));
    CHECK(eval_radius(g, 0.25) == Approx(3.625)); // quadratic 34x^2 - 34x + 10
    CHECK(eval_radius_derivative(g, 0.25) == Approx(68.0 * 0.25 - 34.0));
    CHECK(eval_radius_derivative(g, 0.5) == Approx(0.0).margin(1e-12));

    g.profile = ConicalProfile{1.5, 10.0};
    CHECK(eval_radius(g, 0.5) == Approx(5.75));
    CHECK(eval_radius_derivative(g, 0.2) == Approx(8.5));

    g.profile = PiecewiseProfile{{{0.0, 7.5}, {250.0, 1.5}, {750.0, 10.0}, {1000.0, 50.0}}};
    CHECK(eval_radius(g, 0.0) == Approx(7.5));
    CHECK(eval_radius(g, 0.25) == Approx(1.5));
    CHECK(eval_radius(g, 0.5) == Approx(5.75)); // midway on the middle segment
    CHECK(eval_radius(g, 1.0) == Approx(50.0));
    // slope of the middle segment: (10-1.5)nm over 500nm, times L/R0
    CHECK(eval_radius_derivative(g, 0.5) == Approx((10.0 - 1.5) / 500.0 * 1000.0));
}

TEST_CASE("geometry validation rejects broken inputs", "[model]") {
    PoreGeometry g;
    g.profile = PiecewiseProfile{{{0.0, 5.0}, {0.0, 4.0}}};
    CHECK_THROWS_AS(validate_geometry(g), DegenerateGeometry);

    g.profile = PiecewiseProfile{{{0.0, 5.0}, {500.0, -1.0}, {1000.0, 5.0}}};
    CHECK_THROWS_AS(validate_geometry(g), DegenerateGeometry);

    g.profile = CylindricalProfile{5.0};
    g.length_nm = -1.0;
    CHECK_THROWS_AS(validate_geometry(g), NonPositiveInput);

    g.length_nm = 1000.0;
    CHECK_THROWS_AS(eval_radius(g, 1.5), OutOfDomain);
    CHECK_THROWS_AS(eval_radius(g, -0.2), OutOfDomain);
}

TEST_CASE("surface charge profile and averaging", "[model]") {
    auto sc = tenth_molar_trumpet();
    const auto& g = sc.geometry;
    const auto& e = sc.electrolyte;
    const auto& s = sc.surface_charge;
    CHECK(eval_sigma(s, g, e, 0.05) == 0.0);
    CHECK(eval_sigma(s, g, e, 0.5) == Approx(1.0));
    CHECK(eval_sigma(s, g, e, 0.95) == 0.0);
    // window straddling the support edge picks up exactly the covered fraction
    CHECK(average_sigma(s, g, e, 0.05, 0.15) == Approx(0.5));
    CHECK(average_sigma(s, g, e, 0.2, 0.3) == Approx(1.0));
    CHECK(average_sigma(s, g, e, 0.91, 0.99) == Approx(0.0));
}

TEST_CASE("nondimensional groups at bench values", "[model]") {
    auto sc = tenth_molar_trumpet();
    const auto p = nondimensionalize(sc);

    CHECK(p.delta == Approx(1e-3));
    CHECK(p.kappa_p == Approx(1.33));
    CHECK(p.kappa_n == Approx(0.79));
    CHECK(p.thermal_voltage == Approx(0.025));
    CHECK(p.thermal_voltage_kT == Approx(0.02585).epsilon(1e-3));

    // Screening length at 0.1 M: sqrt(eps V_T / (cbar F)) = 1.341 nm.
    CHECK(p.debye_length_m == Approx(1.3411e-9).epsilon(1e-3));
    CHECK(p.lambda_big == Approx(1.3411).epsilon(1e-3));

    // Wall-charge group at R0 = 1 nm, sigma_bar = 1 e/nm^2, V_T = 25 mV.
    CHECK(p.upsilon == Approx(9.2322).epsilon(1e-3));

    // Current scale F Dbar cbar R0^2 / L.
    CHECK(p.current_scale == Approx(9.6485e-15).epsilon(1e-3));

    CHECK(p.phi_right(sc.boundary) == Approx(8.0));
}

TEST_CASE("screening length at one molar", "[model]") {
    auto sc = tenth_molar_trumpet();
    sc.electrolyte.conc_scale_mol_l = 1.0;
    const auto p = nondimensionalize(sc);
    CHECK(p.debye_length_m == Approx(4.2409e-10).epsilon(1e-3));
}

TEST_CASE("local wall-charge and screening parameters", "[model]") {
    auto sc = tenth_molar_trumpet();
    const auto p = nondimensionalize(sc);

    auto [beta0, lambda0] = local_beta_lambda(p, 0.0, 5.0, 1.0);
    CHECK(beta0 == 0.0);
    CHECK(lambda0 == Approx(p.lambda_big / 5.0));

    auto [beta1, lambda1] = local_beta_lambda(p, 1.0, 1.5, 1.0);
    CHECK(beta1 == Approx(p.upsilon * 1.5));
    CHECK(lambda1 == Approx(p.lambda_big / 1.5));

    // (QS)^(1/4) enters the screening parameter only.
    auto [beta2, lambda2] = local_beta_lambda(p, 1.0, 1.5, 16.0);
    CHECK(beta2 == beta1);
    CHECK(lambda2 == Approx(lambda1 / 2.0));

    CHECK_THROWS_AS(local_beta_lambda(p, 1.0, 1.5, 0.0), NonPositiveConcentration);
    CHECK_THROWS_AS(local_beta_lambda(p, 1.0, 1.5, -1.0), NonPositiveConcentration);
    CHECK_THROWS_AS(local_beta_lambda(p, 1.0, 0.0, 1.0), NonPositiveInput);
}

TEST_CASE("upsilon override mismatch is flagged, not applied", "[model]") {
    auto sc = tenth_molar_trumpet();
    sc.upsilon_override = 3.4; // far from the recomputed 9.23
    const auto p = nondimensionalize(sc);
    CHECK(p.upsilon == Approx(9.2322).epsilon(1e-3));
    CHECK(p.upsilon_override_mismatch);

    sc.upsilon_override = p.upsilon * 1.001;
    CHECK_FALSE(nondimensionalize(sc).upsilon_override_mismatch);
}

TEST_CASE("nondimensionalize rejects non-positive inputs", "[model]") {
    auto sc = tenth_molar_trumpet();
    sc.electrolyte.diff_p = 0.0;
    CHECK_THROWS_AS(nondimensionalize(sc), NonPositiveInput);
    sc = tenth_molar_trumpet();
    sc.electrolyte.conc_scale_mol_l = -0.1;
    CHECK_THROWS_AS(nondimensionalize(sc), NonPositiveInput);
}
