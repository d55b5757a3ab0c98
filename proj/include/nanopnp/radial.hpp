#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "nanopnp/errors.hpp"
#include "nanopnp/grid.hpp"
#include "nanopnp/tridiag.hpp"

namespace nanopnp {

// Cross-section potential psi(xi) of a 1:1 electrolyte in a charged cylinder:
//
//   (1/xi) d/dxi (xi dpsi/dxi) = (e^psi - e^-psi) / lambda^2,
//   psi'(0) = 0,   psi'(1) = beta,
//
// with lambda the screening length in wall-radius units and beta the scaled
// wall charge. Discretized in finite-volume form on a grid graded toward the
// wall; solved by damped Newton with parameter continuation for stiff cases.

struct RadialProblem {
    double lambda = 1.0;
    double beta = 0.0;
    int n_intervals = 256;       // >= 16 for anything quantitative
    double grading_ratio = 0.0;  // 0 = choose from lambda
    double tol = 1e-10;          // scaled sup-norm residual
    int max_newton = 60;
};

struct RadialProfile {
    std::vector<double> xi;
    std::vector<double> psi;
    double lambda = 0.0;
    double beta = 0.0;
    double g1 = 0.0; // int_0^1 xi e^-psi dxi, co-ion moment for beta > 0
    double g2 = 0.0; // int_0^1 xi e^+psi dxi
    int newton_iterations = 0;
};

namespace detail {

// Faces midway between nodes, closed by 0 and 1; cell weight is the exact
// integral of xi over the cell, so summed source terms telescope against the
// wall flux and the moment identity g2 - g1 = lambda^2 beta survives
// discretization.
struct RadialLayout {
    std::vector<double> xi, face, w;
    explicit RadialLayout(const std::vector<double>& nodes) : xi(nodes) {
        const std::size_t n = xi.size();
        face.resize(n + 1);
        face[0] = 0.0;
        face[n] = 1.0;
        for (std::size_t i = 1; i < n; ++i) face[i] = 0.5 * (xi[i - 1] + xi[i]);
        w.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            w[i] = 0.5 * (face[i + 1] * face[i + 1] - face[i] * face[i]);
    }
};

// Scaled residual of the finite-volume system; also used as the convergence
// measure. resid[i] is the flux imbalance per unit cell weight minus the
// source; the convergence norm divides by the magnitudes of the terms that
// cancel, so the tolerance stays meaningful at any resolution (the absolute
// imbalance is roundoff-limited by the flux subtraction on fine grids).
inline double radial_residual(const RadialLayout& lay, const std::vector<double>& psi,
                              double lambda, double beta, std::vector<double>& resid) {
    const std::size_t n = psi.size();
    const double il2 = 1.0 / (lambda * lambda);
    resid.resize(n);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double flux_out, flux_in = 0.0;
        if (i + 1 < n)
            flux_out = lay.face[i + 1] * (psi[i + 1] - psi[i]) / (lay.xi[i + 1] - lay.xi[i]);
        else
            flux_out = beta; // wall Neumann enters as the outer flux
        if (i > 0)
            flux_in = lay.face[i] * (psi[i] - psi[i - 1]) / (lay.xi[i] - lay.xi[i - 1]);
        const double source = 2.0 * std::sinh(psi[i]) * il2;
        const double r = (flux_out - flux_in) / lay.w[i] - source;
        resid[i] = r;
        const double scale = 1.0 + (std::abs(flux_out) + std::abs(flux_in)) / lay.w[i] +
                             2.0 * std::cosh(psi[i]) * il2;
        worst = std::max(worst, std::abs(r) / scale);
    }
    return worst;
}

// One damped Newton solve at fixed (lambda, beta) from the given initial
// state. Returns iterations used; throws NoConvergence on failure.
inline int radial_newton(const RadialLayout& lay, std::vector<double>& psi,
                         double lambda, double beta, double tol, int max_newton) {
    const std::size_t n = psi.size();
    const double il2 = 1.0 / (lambda * lambda);
    std::vector<double> resid, lower(n), diag(n), upper(n), rhs(n);
    std::vector<double> history;
    for (int it = 0; it < max_newton; ++it) {
        const double err = radial_residual(lay, psi, lambda, beta, resid);
        history.push_back(err);
        if (err <= tol) return it;
        for (std::size_t i = 0; i < n; ++i) {
            double d = -2.0 * std::cosh(psi[i]) * il2;
            lower[i] = upper[i] = 0.0;
            if (i + 1 < n) {
                const double c = lay.face[i + 1] / ((lay.xi[i + 1] - lay.xi[i]) * lay.w[i]);
                upper[i] = c;
                d -= c;
            }
            if (i > 0) {
                const double c = lay.face[i] / ((lay.xi[i] - lay.xi[i - 1]) * lay.w[i]);
                lower[i] = c;
                d -= c;
            }
            diag[i] = d;
            rhs[i] = -resid[i];
        }
        std::vector<double> step = solve_tridiagonal(lower, diag, upper, rhs);
        double sup = 0.0;
        for (double s : step) sup = std::max(sup, std::abs(s));
        const double damp = sup > 4.0 ? 4.0 / sup : 1.0;
        double move = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            psi[i] += damp * step[i];
            move = std::max(move, std::abs(damp * step[i]));
        }
        if (move < 1e-14) {
            // Stationary to machine precision; accept if close to tolerance.
            const double fin = radial_residual(lay, psi, lambda, beta, resid);
            if (fin <= 100.0 * tol) return it + 1;
        }
    }
    const double fin = radial_residual(lay, psi, lambda, beta, resid);
    throw NoConvergence("radial Poisson-Boltzmann Newton stalled", max_newton, fin,
                        std::move(history));
}

} // namespace detail

// Moments of e^{-psi} and e^{+psi} against xi dxi using the cell weights of
// the finite-volume layout (exact per-cell integrals of xi).
inline std::pair<double, double> compute_G(const RadialProfile& prof) {
    if (prof.xi.size() != prof.psi.size() || prof.xi.size() < 2)
        throw GridMismatch("radial profile grid and values disagree");
    detail::RadialLayout lay(prof.xi);
    double g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < prof.psi.size(); ++i) {
        g1 += lay.w[i] * std::exp(-prof.psi[i]);
        g2 += lay.w[i] * std::exp(prof.psi[i]);
    }
    return {g1, g2};
}

inline RadialProfile solve_psi(const RadialProblem& prob) {
    if (prob.lambda <= 0.0) throw NonPositiveInput("lambda must be > 0");
    if (prob.n_intervals < 16) throw NonPositiveInput("radial solve needs >= 16 intervals");
    if (!(std::isfinite(prob.beta))) throw NonPositiveInput("beta must be finite");

    double ratio = prob.grading_ratio;
    if (ratio <= 0.0) {
        const double target = std::min(0.25 * prob.lambda, 1.0 / prob.n_intervals);
        ratio = ratio_for_wall_cell(prob.n_intervals, target);
    }
    detail::RadialLayout lay(graded_radial_nodes(prob.n_intervals, ratio));
    const std::size_t n = lay.xi.size();
    std::vector<double> psi(n, 0.0);

    // Continuation from a mild parameter pair when the target is stiff.
    const double lam_start = std::max(prob.lambda, 0.3);
    const double beta_mag = std::abs(prob.beta);
    const double beta_start_mag = beta_mag > 10.0 ? 10.0 : beta_mag;
    int steps = 1;
    if (prob.lambda < 0.05 || beta_mag > 20.0) {
        const double sev_l = std::log2(lam_start / prob.lambda);
        const double sev_b = beta_start_mag > 0.0 ? std::log2(std::max(1.0, beta_mag / beta_start_mag)) : 0.0;
        steps = std::clamp(static_cast<int>(std::ceil(std::max(sev_l, sev_b))), 1, 8);
    } else if (prob.lambda < lam_start || beta_mag > beta_start_mag) {
        steps = 2;
    }

    int total_iters = 0;
    const double sgn = prob.beta >= 0.0 ? 1.0 : -1.0;
    for (int attempt = 0; attempt < 2; ++attempt) {
        try {
            std::fill(psi.begin(), psi.end(), 0.0);
            total_iters = 0;
            for (int k = 1; k <= steps; ++k) {
                const double t = static_cast<double>(k) / steps;
                const double lam = lam_start * std::pow(prob.lambda / lam_start, t);
                double bet;
                if (beta_mag == 0.0)
                    bet = 0.0;
                else
                    bet = sgn * beta_start_mag * std::pow(beta_mag / beta_start_mag, t);
                if (k == steps) bet = prob.beta; // exact target, no pow() roundoff
                total_iters += detail::radial_newton(lay, psi, lam, bet, prob.tol,
                                                     prob.max_newton);
            }
            break;
        } catch (const NoConvergence&) {
            if (attempt == 1 || steps == 8) throw;
            steps = 8; // retry once on the finest ladder
        }
    }

    RadialProfile prof;
    prof.xi = lay.xi;
    prof.psi = std::move(psi);
    prof.lambda = prob.lambda;
    prof.beta = prob.beta;
    prof.newton_iterations = total_iters;
    std::tie(prof.g1, prof.g2) = compute_G(prof);
    return prof;
}

// Closed-form approximations to psi.

// Wide-pore / strong-charge shape, valid for lambda not far below O(1) and
// beta large. Exact limit 3 ln 2 + 2 ln lambda - 2 arcoth((beta+2)/2) at xi=0.
inline double psi_large_beta(double xi, double lambda, double beta) {
    if (beta <= 0.0) throw DomainError("large-beta potential needs beta > 0");
    if (lambda <= 0.0) throw NonPositiveInput("lambda must be > 0");
    if (xi < 0.0 || xi > 1.0) throw OutOfDomain("xi outside [0,1]");
    const double a = std::atanh(2.0 / (beta + 2.0)); // arcoth((beta+2)/2)
    if (xi < 1e-12) return 3.0 * std::log(2.0) + 2.0 * std::log(lambda) - 2.0 * a;
    const double y = a - std::log(xi);
    return -2.0 * std::log(std::sinh(y)) - 2.0 * std::log(xi) + std::log(2.0 * lambda * lambda);
}

inline double psi_centerline_large_beta(double lambda, double beta) {
    return psi_large_beta(0.0, lambda, beta);
}

// Thin-layer (small lambda) wall solution in the stretched coordinate
// zeta = (1 - xi)/lambda; depends on beta only through B = lambda * beta.
// Antisymmetric under B -> -B; identically zero for B = 0.
inline double psi_debye_layer(double xi, double lambda, double beta) {
    if (lambda <= 0.0) throw NonPositiveInput("lambda must be > 0");
    if (xi < 0.0 || xi > 1.0) throw OutOfDomain("xi outside [0,1]");
    const double cap_b = lambda * beta;
    if (cap_b == 0.0) return 0.0;
    if (cap_b < 0.0) return -psi_debye_layer(xi, lambda, -beta);
    const double zeta = (1.0 - xi) / lambda;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    const double shift = inv_sqrt2 * std::asinh(2.0 * std::sqrt(2.0) / cap_b);
    const double arg = (zeta + shift) * inv_sqrt2;
    // coth(arg) > 1 for arg > 0, so psi > 0 at the wall decaying into the bulk.
    return 2.0 * std::log(1.0 / std::tanh(arg));
}

} // namespace nanopnp
