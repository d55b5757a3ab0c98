#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <vector>

#include "nanopnp/quasi1d.hpp"

namespace nanopnp {

// ---------------------------------------------------------------------------
// Alternative formulation of the steady axial problem in the electrolyte
// chemical potential mu_e = ln((QS)^(1/2)) and effective potential
// Phi~ = ln((S/Q)^(1/2)). The cross-section averages
//   Pbar = e^{mu} g1,  Nbar = e^{mu} g2,   lambda = Lambda e^{-mu/2} / R,
// carry the radial structure, and the two species fluxes
//   Jp = -kappa_p (A Pbar) d(mu + Phi)/dx,
//   Jn = -kappa_n (A Nbar) d(mu - Phi)/dx
// are each conserved. Solved by damped Newton on the 2x2 block-tridiagonal
// system; serves as an independent route to cross-check the (Q, S) solver.
// ---------------------------------------------------------------------------

struct MuPhiOptions {
    double tol = 1e-12;          // on the flux-scaled residual sup norm
    int max_newton = 60;
    int max_backtrack = 40;
    int n_intervals = 1000;
    bool graded = false;
    double grading_strength = 1.0;
    GMode g_mode = GMode::Smoothed;
    GOracleOptions oracle;
    double phi_gauge = 0.0;
    bool continuation = true;
};

struct MuPhiSolution {
    std::vector<double> x;
    std::vector<double> mu_e, phi_tilde;
    std::vector<double> psi_hat;       // g1 + g2
    std::vector<double> g1, g2, lambda, beta;
    std::vector<double> p_bar, n_bar;  // e^{mu} g1, e^{mu} g2
    double current_I = 0.0;
    double current_max_deviation = 0.0;
    int iterations = 0;
    double residual = 0.0;
    double v_applied = 0.0;

    // The map to the Boltzmann prefactors is bijective: Q = e^{mu - Phi},
    // S = e^{mu + Phi}.
    std::vector<double> q() const {
        std::vector<double> out(mu_e.size());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = std::exp(mu_e[i] - phi_tilde[i]);
        return out;
    }
    std::vector<double> s() const {
        std::vector<double> out(mu_e.size());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = std::exp(mu_e[i] + phi_tilde[i]);
        return out;
    }
};

namespace detail {

struct MuPhiNodeCoeffs {
    std::vector<double> ap;    // A Pbar per node
    std::vector<double> an;    // A Nbar per node
    std::vector<double> dap;   // d(A Pbar)/dmu per node
    std::vector<double> dan;
    std::vector<double> g1, g2, lambda, beta, psi_hat;
};

// e^{mu} g1(lambda(mu), beta) and its mu-derivative (central difference; the
// smoothed closure is C^1 so a fixed small step is adequate).
inline MuPhiNodeCoeffs muphi_coefficients(const std::vector<double>& mu,
                                          const std::vector<double>& x,
                                          const PoreScenario& sc,
                                          const DimensionlessParams& params,
                                          GMode mode, const GOracleOptions& oracle) {
    const std::size_t n = x.size();
    MuPhiNodeCoeffs c;
    c.ap.resize(n);
    c.an.resize(n);
    c.dap.resize(n);
    c.dan.resize(n);
    c.g1.resize(n);
    c.g2.resize(n);
    c.lambda.resize(n);
    c.beta.resize(n);
    c.psi_hat.resize(n);
    const double fd_step = 1e-6;
    for (std::size_t i = 0; i < n; ++i) {
        const double radius = eval_radius(sc.geometry, x[i]);
        const double sigma = eval_sigma(sc.surface_charge, sc.geometry, sc.electrolyte, x[i]);
        const double area = std::numbers::pi * radius * radius;
        double lambda_here = 0.0;
        auto moments = [&](double m, double& pb, double& nb) {
            const auto [beta, lambda] =
                local_beta_lambda(params, sigma, radius, std::exp(2.0 * m));
            const GEval ge = eval_g(lambda, beta, mode, oracle);
            pb = std::exp(m) * ge.g1;
            nb = std::exp(m) * ge.g2;
            lambda_here = lambda;
        };
        double pb, nb, pb_hi, nb_hi, pb_lo, nb_lo;
        moments(mu[i] + fd_step, pb_hi, nb_hi);
        moments(mu[i] - fd_step, pb_lo, nb_lo);
        moments(mu[i], pb, nb);
        c.ap[i] = area * pb;
        c.an[i] = area * nb;
        c.dap[i] = area * (pb_hi - pb_lo) / (2.0 * fd_step);
        c.dan[i] = area * (nb_hi - nb_lo) / (2.0 * fd_step);
        c.lambda[i] = lambda_here;
        c.beta[i] = params.upsilon * sigma * radius;
        c.g1[i] = pb * std::exp(-mu[i]);
        c.g2[i] = nb * std::exp(-mu[i]);
        c.psi_hat[i] = c.g1[i] + c.g2[i];
    }
    return c;
}

// Residual F and, optionally, the block-tridiagonal Jacobian of the two
// conserved-flux equations at the interior nodes. Unknown ordering per node:
// (mu, Phi). Returns the flux scale used to normalize the convergence test.
struct MuPhiSystem {
    std::vector<double> residual;     // 2*(n-2), interior nodes only
    std::vector<Block2> lower, diag, upper;
    double flux_scale = 0.0;
    std::vector<double> jp_face, jn_face;
};

inline MuPhiSystem muphi_system(const std::vector<double>& mu,
                                const std::vector<double>& phi,
                                const std::vector<double>& x,
                                const MuPhiNodeCoeffs& c,
                                const DimensionlessParams& params,
                                bool with_jacobian) {
    const std::size_t n = x.size();
    const std::size_t m = n - 2;
    MuPhiSystem sys;
    sys.residual.assign(2 * m, 0.0);
    if (with_jacobian) {
        sys.lower.assign(m, Block2{});
        sys.diag.assign(m, Block2{});
        sys.upper.assign(m, Block2{});
    }
    sys.jp_face.resize(n - 1);
    sys.jn_face.resize(n - 1);

    // Face fluxes with harmonic-mean coefficients.
    std::vector<double> cp(n - 1), cn(n - 1);
    for (std::size_t f = 0; f + 1 < n; ++f) {
        const double h = x[f + 1] - x[f];
        cp[f] = 2.0 * c.ap[f] * c.ap[f + 1] / ((c.ap[f] + c.ap[f + 1]) * h);
        cn[f] = 2.0 * c.an[f] * c.an[f + 1] / ((c.an[f] + c.an[f + 1]) * h);
        const double dp = (mu[f + 1] + phi[f + 1]) - (mu[f] + phi[f]);
        const double dn = (mu[f + 1] - phi[f + 1]) - (mu[f] - phi[f]);
        sys.jp_face[f] = -params.kappa_p * cp[f] * dp;
        sys.jn_face[f] = -params.kappa_n * cn[f] * dn;
        sys.flux_scale =
            std::max(sys.flux_scale, std::abs(sys.jp_face[f]) + std::abs(sys.jn_face[f]));
    }

    for (std::size_t i = 1; i + 1 < n; ++i) {
        const std::size_t k = i - 1;
        sys.residual[2 * k] = sys.jp_face[i] - sys.jp_face[i - 1];
        sys.residual[2 * k + 1] = sys.jn_face[i] - sys.jn_face[i - 1];
    }
    if (!with_jacobian) return sys;

    // d(harmonic mean)/d(node value): H(a,b) = 2ab/(a+b), dH/da = 2 b^2/(a+b)^2.
    auto dharm = [](double a, double b) { return 2.0 * b * b / ((a + b) * (a + b)); };
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const std::size_t k = i - 1;
        for (int side = 0; side < 2; ++side) {
            const std::size_t f = side == 0 ? i - 1 : i; // lower face, upper face
            const double sgn = side == 0 ? -1.0 : 1.0;   // residual adds sgn * J_f
            const double h = x[f + 1] - x[f];
            const double dp = (mu[f + 1] + phi[f + 1]) - (mu[f] + phi[f]);
            const double dn = (mu[f + 1] - phi[f + 1]) - (mu[f] - phi[f]);
            // Nodes at the two ends of face f.
            for (int end = 0; end < 2; ++end) {
                const std::size_t node = f + static_cast<std::size_t>(end);
                if (node == 0 || node + 1 == n) continue; // Dirichlet
                const double ddelta = end == 0 ? -1.0 : 1.0;
                const double dcp_dmu =
                    (end == 0 ? dharm(c.ap[f], c.ap[f + 1]) * c.dap[f]
                              : dharm(c.ap[f + 1], c.ap[f]) * c.dap[f + 1]) / h;
                const double dcn_dmu =
                    (end == 0 ? dharm(c.an[f], c.an[f + 1]) * c.dan[f]
                              : dharm(c.an[f + 1], c.an[f]) * c.dan[f + 1]) / h;
                const double djp_dmu = -params.kappa_p * (dcp_dmu * dp + cp[f] * ddelta);
                const double djp_dphi = -params.kappa_p * cp[f] * ddelta;
                const double djn_dmu = -params.kappa_n * (dcn_dmu * dn + cn[f] * ddelta);
                const double djn_dphi = -params.kappa_n * cn[f] * (-ddelta);
                Block2* blk = nullptr;
                if (node == i) blk = &sys.diag[k];
                else if (node == i - 1) blk = &sys.lower[k];
                else blk = &sys.upper[k];
                blk->m[0] += sgn * djp_dmu;
                blk->m[1] += sgn * djp_dphi;
                blk->m[2] += sgn * djn_dmu;
                blk->m[3] += sgn * djn_dphi;
            }
        }
    }
    return sys;
}

inline double muphi_residual_norm(const MuPhiSystem& sys) {
    double sup = 0.0;
    for (double r : sys.residual) sup = std::max(sup, std::abs(r));
    return sup / (1.0 + sys.flux_scale);
}

inline MuPhiSolution solve_mu_phi_impl(const PoreScenario& sc,
                                       const DimensionlessParams& params,
                                       double v_applied, const MuPhiOptions& opts,
                                       const MuPhiSolution* warm) {
    const BoundaryLift lift =
        boundary_lift(sc.boundary, sc.electrolyte, params, v_applied, opts.phi_gauge);
    AxialGrid grid = opts.graded
        ? AxialGrid::graded_by_radius(sc.geometry, opts.n_intervals, opts.grading_strength)
        : AxialGrid::uniform(opts.n_intervals);
    const std::size_t n = grid.x.size();

    const double mu_l = 0.5 * std::log(lift.q_left * lift.s_left);
    const double mu_r = 0.5 * std::log(lift.q_right * lift.s_right);
    const double ph_l = 0.5 * std::log(lift.s_left / lift.q_left);
    const double ph_r = 0.5 * std::log(lift.s_right / lift.q_right);

    std::vector<double> mu(n), phi(n);
    if (warm && warm->x.size() == n) {
        mu = warm->mu_e;
        phi = warm->phi_tilde;
        mu.front() = mu_l;
        mu.back() = mu_r;
        phi.front() = ph_l;
        phi.back() = ph_r;
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            mu[i] = mu_l + (mu_r - mu_l) * grid.x[i];
            phi[i] = ph_l + (ph_r - ph_l) * grid.x[i];
        }
    }

    std::vector<double> history;
    double res_norm = std::numeric_limits<double>::infinity();
    int iter = 0;
    bool converged = false;
    while (iter < opts.max_newton) {
        const MuPhiNodeCoeffs coeffs =
            muphi_coefficients(mu, grid.x, sc, params, opts.g_mode, opts.oracle);
        MuPhiSystem sys = muphi_system(mu, phi, grid.x, coeffs, params, true);
        res_norm = muphi_residual_norm(sys);
        history.push_back(res_norm);
        if (res_norm < opts.tol) {
            converged = true;
            break;
        }
        std::vector<double> rhs(sys.residual.size());
        for (std::size_t k = 0; k < rhs.size(); ++k) rhs[k] = -sys.residual[k];
        const std::vector<double> step =
            solve_block_tridiagonal_2x2(sys.lower, sys.diag, sys.upper, rhs);

        // Backtracking on the scaled residual.
        double t = 1.0;
        bool accepted = false;
        std::vector<double> mu_try(n), phi_try(n);
        for (int bt = 0; bt < opts.max_backtrack; ++bt) {
            mu_try = mu;
            phi_try = phi;
            for (std::size_t i = 1; i + 1 < n; ++i) {
                mu_try[i] += t * step[2 * (i - 1)];
                phi_try[i] += t * step[2 * (i - 1) + 1];
            }
            try {
                const MuPhiNodeCoeffs ctry =
                    muphi_coefficients(mu_try, grid.x, sc, params, opts.g_mode, opts.oracle);
                const MuPhiSystem stry = muphi_system(mu_try, phi_try, grid.x, ctry, params, false);
                const double res_try = muphi_residual_norm(stry);
                if (res_try <= (1.0 - 1e-4 * t) * res_norm) {
                    mu.swap(mu_try);
                    phi.swap(phi_try);
                    accepted = true;
                    break;
                }
            } catch (const Error&) {
                // overflowed coefficients at this step length; shorten
            }
            t *= 0.5;
        }
        ++iter;
        if (!accepted) {
            // Tiny steps that no longer reduce the residual: accept a state
            // already near the floor, otherwise report failure.
            if (res_norm < 1e3 * opts.tol) {
                converged = true;
                break;
            }
            throw NoConvergence("chemical-potential Newton stalled", iter, res_norm, history);
        }
    }
    if (!converged) {
        const MuPhiNodeCoeffs coeffs =
            muphi_coefficients(mu, grid.x, sc, params, opts.g_mode, opts.oracle);
        const MuPhiSystem sys = muphi_system(mu, phi, grid.x, coeffs, params, false);
        res_norm = muphi_residual_norm(sys);
        if (res_norm >= opts.tol)
            throw NoConvergence("chemical-potential Newton ran out of iterations",
                                iter, res_norm, history);
    }

    MuPhiSolution sol;
    sol.x = grid.x;
    sol.mu_e = std::move(mu);
    sol.phi_tilde = std::move(phi);
    sol.iterations = iter;
    sol.residual = res_norm;
    sol.v_applied = v_applied;
    const MuPhiNodeCoeffs coeffs =
        muphi_coefficients(sol.mu_e, grid.x, sc, params, opts.g_mode, opts.oracle);
    const MuPhiSystem sys = muphi_system(sol.mu_e, sol.phi_tilde, grid.x, coeffs, params, false);
    sol.g1 = coeffs.g1;
    sol.g2 = coeffs.g2;
    sol.lambda = coeffs.lambda;
    sol.beta = coeffs.beta;
    sol.psi_hat = coeffs.psi_hat;
    sol.p_bar.resize(n);
    sol.n_bar.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        sol.p_bar[i] = std::exp(sol.mu_e[i]) * coeffs.g1[i];
        sol.n_bar[i] = std::exp(sol.mu_e[i]) * coeffs.g2[i];
    }
    double acc = 0.0;
    for (std::size_t f = 0; f + 1 < n; ++f) acc += sys.jp_face[f] - sys.jn_face[f];
    sol.current_I = acc / static_cast<double>(n - 1);
    for (std::size_t f = 0; f + 1 < n; ++f)
        sol.current_max_deviation = std::max(
            sol.current_max_deviation,
            std::abs(sys.jp_face[f] - sys.jn_face[f] - sol.current_I));
    return sol;
}

} // namespace detail

// Steady solve in (mu_e, Phi~) variables at one applied voltage (volts), with
// the same voltage-ramp escalation as the (Q, S) solver.
inline MuPhiSolution solve_steady_mu_phi(const PoreScenario& sc, double v_applied,
                                         const MuPhiOptions& opts = {},
                                         const MuPhiSolution* warm = nullptr) {
    const DimensionlessParams params = nondimensionalize(sc);
    try {
        return detail::solve_mu_phi_impl(sc, params, v_applied, opts, warm);
    } catch (const NoConvergence&) {
        if (!opts.continuation || v_applied == 0.0) throw;
    }
    const double full_step = 2.0 * params.thermal_voltage * (v_applied > 0 ? 1.0 : -1.0);
    const double min_step = std::abs(v_applied) * 1e-3;
    MuPhiSolution carry;
    bool have_carry = false;
    double v = 0.0;
    double step = full_step;
    while (v != v_applied) {
        double v_next = v + step;
        if ((v_applied > 0 && v_next > v_applied) || (v_applied < 0 && v_next < v_applied))
            v_next = v_applied;
        try {
            carry = detail::solve_mu_phi_impl(sc, params, v_next, opts,
                                              have_carry ? &carry : nullptr);
            have_carry = true;
            v = v_next;
            step = full_step;
        } catch (const NoConvergence&) {
            step *= 0.5;
            if (std::abs(step) < min_step) throw;
        }
    }
    return carry;
}

// Local charge-balance diagnostic: A (Pbar - Nbar) + Sigma_l per node, with
// the wall line charge Sigma_l = Lambda^2 Upsilon pi R sigma. Zero up to
// roundoff because g2 - g1 = lambda^2 beta holds exactly in every g mode.
inline std::vector<double> neutrality_residual(const MuPhiSolution& sol,
                                               const PoreScenario& sc,
                                               const DimensionlessParams& params) {
    std::vector<double> out(sol.x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double radius = eval_radius(sc.geometry, sol.x[i]);
        const double sigma = eval_sigma(sc.surface_charge, sc.geometry, sc.electrolyte, sol.x[i]);
        const double area = std::numbers::pi * radius * radius;
        const double line_charge =
            params.lambda_big * params.lambda_big * params.upsilon *
            std::numbers::pi * radius * sigma;
        out[i] = area * (sol.p_bar[i] - sol.n_bar[i]) + line_charge;
    }
    return out;
}

} // namespace nanopnp
