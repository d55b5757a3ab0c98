#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "nanopnp/muphi.hpp"
#include "nanopnp/quasi1d.hpp"

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
    sc.boundary.conc_left_p_mol_l = sc.boundary.conc_left_n_mol_l = 0.1;
    sc.boundary.conc_right_p_mol_l = sc.boundary.conc_right_n_mol_l = 0.1;
    return sc;
}

PoreScenario charged_cone() {
    PoreScenario sc;
    sc.name = "cone";
    sc.electrolyte.conc_scale_mol_l = 0.1;
    sc.geometry.length_nm = 1000.0;
    sc.geometry.radius_scale_nm = 1.0;
    sc.geometry.profile = ConicalProfile{1.5, 10.0};
    sc.surface_charge = {1.0, 100.0, 900.0};
    sc.boundary.conc_left_p_mol_l = sc.boundary.conc_left_n_mol_l = 0.1;
    sc.boundary.conc_right_p_mol_l = sc.boundary.conc_right_n_mol_l = 0.1;
    return sc;
}

PoreScenario uncharged_cylinder() {
    PoreScenario sc;
    sc.name = "cylinder";
    sc.electrolyte.conc_scale_mol_l = 0.1;
    sc.geometry.length_nm = 1000.0;
    sc.geometry.radius_scale_nm = 1.0;
    sc.geometry.profile = CylindricalProfile{5.0};
    sc.surface_charge = {0.0, 0.0, 0.0};
    sc.boundary.conc_left_p_mol_l = sc.boundary.conc_left_n_mol_l = 0.1;
    sc.boundary.conc_right_p_mol_l = sc.boundary.conc_right_n_mol_l = 0.1;
    return sc;
}

} // namespace

TEST_CASE("boundary lift at zero and finite voltage", "[quasi1d]") {
    const PoreScenario sc = uncharged_cylinder();
    const DimensionlessParams params = nondimensionalize(sc);

    const BoundaryLift zero = boundary_lift(sc.boundary, sc.electrolyte, params, 0.0);
    CHECK(zero.q_left == Approx(1.0));
    CHECK(zero.s_left == Approx(1.0));
    CHECK(zero.q_right == Approx(1.0));
    CHECK(zero.s_right == Approx(1.0));

    // 0.2 V over V_T = 0.025 V puts the right bath at phi = 8.
    const BoundaryLift lifted = boundary_lift(sc.boundary, sc.electrolyte, params, 0.2);
    CHECK(lifted.s_right == Approx(std::exp(8.0)).epsilon(1e-12));
    CHECK(lifted.q_right == Approx(std::exp(-8.0)).epsilon(1e-12));
    CHECK(lifted.s_left == Approx(1.0));
    CHECK(lifted.q_left == Approx(1.0));

    // Sign flip swaps the roles when the baths are symmetric.
    const BoundaryLift neg = boundary_lift(sc.boundary, sc.electrolyte, params, -0.2);
    CHECK(neg.s_right == Approx(lifted.q_right).epsilon(1e-12));
    CHECK(neg.q_right == Approx(lifted.s_right).epsilon(1e-12));

    BoundaryConditions bad = sc.boundary;
    bad.conc_left_p_mol_l = 0.0;
    CHECK_THROWS_AS(boundary_lift(bad, sc.electrolyte, params, 0.0), NonPositiveConcentration);
}

TEST_CASE("residual vanishes for exact states", "[quasi1d]") {
    const PoreScenario sc = uncharged_cylinder();
    const DimensionlessParams params = nondimensionalize(sc);
    const AxialGrid grid = AxialGrid::uniform(64);
    const std::size_t n = grid.x.size();

    // Constant state in an uncharged uniform pore.
    std::vector<double> q(n, 1.0), s(n, 1.0);
    ResidualArrays res = assemble_residual(q, s, grid, sc, params);
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(std::abs(res.res_s[i]) < 1e-14);
        CHECK(std::abs(res.res_q[i]) < 1e-14);
    }

    // Equal linear profiles keep Theta1 and Theta2 constant, so the linear
    // interpolant solves both equations exactly.
    for (std::size_t i = 0; i < n; ++i) q[i] = s[i] = 1.0 + 0.5 * grid.x[i];
    res = assemble_residual(q, s, grid, sc, params);
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(std::abs(res.res_s[i]) < 1e-12);
        CHECK(std::abs(res.res_q[i]) < 1e-12);
    }

    q[3] = -1.0;
    CHECK_THROWS_AS(assemble_residual(q, s, grid, sc, params), NonPositiveConcentration);
}

TEST_CASE("equilibrium states carry no current", "[quasi1d]") {
    // Uncharged, symmetric baths, zero volts: constant solution, exactly.
    {
        const QuasiSolution sol = solve_steady(uncharged_cylinder(), 0.0);
        for (double v : sol.q) CHECK(v == Approx(1.0).margin(1e-13));
        for (double v : sol.s) CHECK(v == Approx(1.0).margin(1e-13));
        CHECK(std::abs(sol.current_I) < 1e-12);
    }
    // Charged trumpet at zero volts: Q and S stay at their (equal) bath
    // values; the current must vanish despite the strongly varying g's.
    {
        const QuasiSolution sol = solve_steady(tenth_molar_trumpet(), 0.0);
        for (double v : sol.q) CHECK(v == Approx(1.0).margin(1e-10));
        for (double v : sol.s) CHECK(v == Approx(1.0).margin(1e-10));
        CHECK(std::abs(sol.current_I) < 1e-9);
    }
}

TEST_CASE("uncharged cylinder matches the drift-diffusion closed form", "[quasi1d]") {
    const PoreScenario sc = uncharged_cylinder();
    const DimensionlessParams params = nondimensionalize(sc);
    const double v = 0.05;
    const QuasiSolution sol = solve_steady(sc, v);
    // Exact steady solution: S = e^{phi_r x}, Q = e^{-phi_r x}, giving
    // I = -(A/2) (kappa_p + kappa_n) phi_r for unit baths.
    const double phi_r = v / params.thermal_voltage;
    const double area = std::numbers::pi * 25.0;
    const double exact = -0.5 * area * (params.kappa_p + params.kappa_n) * phi_r;
    CHECK(sol.current_I == Approx(exact).epsilon(1e-5));
    CHECK(sol.current_max_deviation / std::abs(sol.current_I) < 1e-10);
}

TEST_CASE("solution endpoints equal the boundary lift bitwise", "[quasi1d]") {
    const PoreScenario sc = tenth_molar_trumpet();
    const DimensionlessParams params = nondimensionalize(sc);
    const double v = 0.1;
    const QuasiSolution sol = solve_steady(sc, v);
    const BoundaryLift lift = boundary_lift(sc.boundary, sc.electrolyte, params, v);
    CHECK(sol.q.front() == lift.q_left);
    CHECK(sol.s.front() == lift.s_left);
    CHECK(sol.q.back() == lift.q_right);
    CHECK(sol.s.back() == lift.s_right);
}

TEST_CASE("converged trumpet state conserves flux and stays positive", "[quasi1d]") {
    const PoreScenario sc = tenth_molar_trumpet();
    const DimensionlessParams params = nondimensionalize(sc);
    for (double v : {0.2, -0.2}) {
        const QuasiSolution sol = solve_steady(sc, v);
        for (double q : sol.q) CHECK(q > 0.0);
        for (double s : sol.s) CHECK(s > 0.0);
        const CurrentEstimate est = current(sol, sc, params);
        CHECK(est.max_abs_deviation / std::abs(est.value) < 1e-6);
        CHECK(est.value == Approx(sol.current_I).epsilon(1e-12));

        // Per-species discrete fluxes are constant across faces.
        const auto coeffs = detail::transport_coefficients(
            sol.q, sol.s, sol.x, sc, params, GMode::Smoothed, {});
        const auto c1 = detail::face_conductance(coeffs.theta1, sol.x);
        const auto c2 = detail::face_conductance(coeffs.theta2, sol.x);
        double f1_min = 1e300, f1_max = -1e300, f2_min = 1e300, f2_max = -1e300;
        for (std::size_t f = 0; f < c1.size(); ++f) {
            const double f1 = c1[f] * (sol.s[f + 1] - sol.s[f]);
            const double f2 = c2[f] * (sol.q[f + 1] - sol.q[f]);
            f1_min = std::min(f1_min, f1);
            f1_max = std::max(f1_max, f1);
            f2_min = std::min(f2_min, f2);
            f2_max = std::max(f2_max, f2);
        }
        CHECK((f1_max - f1_min) / std::abs(f1_max) < 1e-6);
        CHECK((f2_max - f2_min) / std::abs(f2_max) < 1e-6);
    }
}

TEST_CASE("reflection antisymmetry of the current", "[quasi1d]") {
    // Trumpet geometry and charge are symmetric about x = 1/2 and the baths
    // match, so reversing the voltage reflects the solution and flips I.
    const PoreScenario sc = tenth_molar_trumpet();
    const QuasiSolution plus = solve_steady(sc, 0.1);
    const QuasiSolution minus = solve_steady(sc, -0.1);
    CHECK(std::abs(plus.current_I + minus.current_I) <
          1e-8 * std::max(1.0, std::abs(plus.current_I)));
}

TEST_CASE("gauge shift leaves the current unchanged", "[quasi1d]") {
    const PoreScenario sc = tenth_molar_trumpet();
    QuasiOptions opts;
    const QuasiSolution base = solve_steady(sc, 0.1, opts);
    opts.phi_gauge = 1.7;
    const QuasiSolution shifted = solve_steady(sc, 0.1, opts);
    CHECK(std::abs(base.current_I - shifted.current_I) <
          1e-10 * std::max(1.0, std::abs(base.current_I)));
}

TEST_CASE("identical inputs give identical outputs", "[quasi1d]") {
    const PoreScenario sc = tenth_molar_trumpet();
    const QuasiSolution a = solve_steady(sc, 0.15);
    const QuasiSolution b = solve_steady(sc, 0.15);
    CHECK(a.current_I == b.current_I);
    CHECK(a.iterations == b.iterations);
    CHECK(a.q == b.q);
    CHECK(a.s == b.s);
}

TEST_CASE("failure reporting carries the residual history", "[quasi1d]") {
    QuasiOptions opts;
    opts.max_iterations = 3;
    opts.continuation = false;
    try {
        solve_steady(tenth_molar_trumpet(), 0.2, opts);
        FAIL("expected NoConvergence");
    } catch (const NoConvergence& e) {
        CHECK(e.iterations == 3);
        CHECK(e.history.size() == 3);
        CHECK(e.residual > 0.0);
    }
}

TEST_CASE("voltage sweep warm start and rectification", "[quasi1d]") {
    const PoreScenario sc = tenth_molar_trumpet();
    std::vector<double> voltages;
    for (int k = -4; k <= 4; ++k) voltages.push_back(0.05 * k);
    const IVCurve curve = iv_sweep(sc, voltages);
    REQUIRE(curve.points.size() == voltages.size());
    for (const IVPoint& pt : curve.points) CHECK(pt.converged);
    // Positive bias drives cations toward the left bath, so the axial current
    // is negative there and the curve decreases monotonically with voltage.
    for (std::size_t k = 1; k < curve.points.size(); ++k)
        CHECK(curve.points[k].current < curve.points[k - 1].current);
    // Zero bias sits at equilibrium.
    CHECK(std::abs(curve.points[4].current) < 1e-9);
    // The trumpet is mirror symmetric about the midpoint, so reversing the
    // bias reverses the current exactly and the pore cannot rectify.
    const double fwd = curve.points.back().current;
    const double rev = curve.points.front().current;
    CHECK(std::abs(fwd + rev) < 1e-6 * std::abs(fwd));
    // Physical current carries the amperes scale.
    const DimensionlessParams params = nondimensionalize(sc);
    CHECK(curve.points.back().current_A ==
          Approx(curve.points.back().current * params.current_scale));

    CHECK_THROWS_AS(iv_sweep(sc, {0.1, 0.1}), ConfigError);
    CHECK_THROWS_AS(iv_sweep(sc, {}), ConfigError);

    // A cone breaks the mirror symmetry and does rectify.
    const IVCurve cone = iv_sweep(charged_cone(), {-0.2, 0.2});
    REQUIRE(cone.points[0].converged);
    REQUIRE(cone.points[1].converged);
    const double ratio = std::abs(cone.points[1].current / cone.points[0].current);
    CHECK(std::abs(ratio - 1.0) > 0.05);
}

TEST_CASE("two-thread sweep equals the chunked sequential result", "[quasi1d]") {
    const PoreScenario sc = tenth_molar_trumpet();
    const std::vector<double> voltages{-0.1, -0.05, 0.0, 0.05, 0.1, 0.15};
    const IVCurve two = iv_sweep(sc, voltages, {}, 2);
    // Same chunk layout run on one thread: first half cold-starts at -0.1,
    // second half cold-starts at 0.05.
    const IVCurve left = iv_sweep(sc, {-0.1, -0.05, 0.0}, {}, 1);
    const IVCurve right = iv_sweep(sc, {0.05, 0.1, 0.15}, {}, 1);
    for (int k = 0; k < 3; ++k) {
        CHECK(two.points[k].current == left.points[k].current);
        CHECK(two.points[k + 3].current == right.points[k].current);
    }
}

TEST_CASE("field reconstruction preserves the product invariant", "[quasi1d]") {
    const PoreScenario sc = tenth_molar_trumpet();
    const QuasiSolution sol = solve_steady(sc, 0.1);
    const ReconstructedFields fields = reconstruct_fields(sol, sc, 32);
    REQUIRE(fields.x.size() == sol.x.size());
    REQUIRE(fields.xi.size() == 33);
    for (std::size_t i = 0; i < fields.x.size(); i += 97) {
        for (std::size_t j = 0; j < fields.xi.size(); ++j) {
            const double np = fields.n[i][j] * fields.p[i][j];
            const double qs = sol.q[i] * sol.s[i];
            CHECK(np == Approx(qs).epsilon(1e-10));
        }
        // phi - psi is radially constant: at the axis-side sample the wall
        // value minus the centre value equals psi(wall) - psi(0).
        CHECK(fields.r[i].back() == Approx(eval_radius(sc.geometry, fields.x[i])));
    }
    // Uncharged scenario reconstructs radially uniform fields: with symmetric
    // baths both concentrations equal sqrt(Q S), which is 1 across the pore.
    const PoreScenario cyl = uncharged_cylinder();
    const QuasiSolution flat = solve_steady(cyl, 0.05);
    const ReconstructedFields uf = reconstruct_fields(flat, cyl, 8);
    for (std::size_t j = 0; j < uf.xi.size(); ++j) {
        const double root = std::sqrt(flat.q[500] * flat.s[500]);
        CHECK(uf.n[500][j] == Approx(root).epsilon(1e-12));
        CHECK(uf.p[500][j] == Approx(root).epsilon(1e-12));
        CHECK(uf.phi[500][j] ==
              Approx(0.5 * std::log(flat.s[500] / flat.q[500])).epsilon(1e-12));
    }
}

TEST_CASE("chemical-potential formulation matches the prefactor solver", "[muphi]") {
    const PoreScenario sc = tenth_molar_trumpet();
    for (double v : {0.1, -0.2, 0.2}) {
        const QuasiSolution qs_sol = solve_steady(sc, v);
        const MuPhiSolution mp_sol = solve_steady_mu_phi(sc, v);
        CHECK(mp_sol.current_I == Approx(qs_sol.current_I).epsilon(5e-3));
        const std::vector<double> q = mp_sol.q();
        const std::vector<double> s = mp_sol.s();
        double sup_q = 0.0, sup_s = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) {
            sup_q = std::max(sup_q, std::abs(q[i] - qs_sol.q[i]) / qs_sol.q[i]);
            sup_s = std::max(sup_s, std::abs(s[i] - qs_sol.s[i]) / qs_sol.s[i]);
        }
        CHECK(sup_q < 5e-3);
        CHECK(sup_s < 5e-3);
    }
}

TEST_CASE("local charge balance holds to roundoff", "[muphi]") {
    const PoreScenario sc = tenth_molar_trumpet();
    const DimensionlessParams params = nondimensionalize(sc);
    const MuPhiSolution sol = solve_steady_mu_phi(sc, 0.2);
    const std::vector<double> neut = neutrality_residual(sol, sc, params);
    for (double r : neut) CHECK(std::abs(r) < 1e-8);
}

TEST_CASE("uncharged pore reduces to constant mu and linear Phi", "[muphi]") {
    const PoreScenario sc = uncharged_cylinder();
    const DimensionlessParams params = nondimensionalize(sc);
    const double v = 0.05;
    const MuPhiSolution sol = solve_steady_mu_phi(sc, v);
    const double phi_r = v / params.thermal_voltage;
    for (std::size_t i = 0; i < sol.x.size(); ++i) {
        CHECK(std::abs(sol.mu_e[i]) < 1e-8);
        CHECK(sol.phi_tilde[i] == Approx(phi_r * sol.x[i]).margin(1e-8));
        CHECK(sol.psi_hat[i] == Approx(1.0).margin(1e-12));
    }
    const double area = std::numbers::pi * 25.0;
    const double exact = -0.5 * area * (params.kappa_p + params.kappa_n) * phi_r;
    CHECK(sol.current_I == Approx(exact).epsilon(1e-5));
    CHECK(sol.current_max_deviation / std::abs(sol.current_I) < 1e-9);
}

TEST_CASE("chemical-potential solver failure escalation", "[muphi]") {
    MuPhiOptions opts;
    opts.max_newton = 1;
    opts.continuation = false;
    CHECK_THROWS_AS(solve_steady_mu_phi(tenth_molar_trumpet(), 0.2, opts), NoConvergence);
}
