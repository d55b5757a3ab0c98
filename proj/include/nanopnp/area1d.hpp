#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include "nanopnp/errors.hpp"
#include "nanopnp/grid.hpp"
#include "nanopnp/quasi1d.hpp"
#include "nanopnp/scenario.hpp"
#include "nanopnp/tridiag.hpp"

namespace nanopnp {

// ---------------------------------------------------------------------------
// Cross-section averaged drift-diffusion through the pore: the wall charge
// is smeared over the disc, giving the one-dimensional system
//     delta^2 (R^2 phi')' = -(R^2 / Lambda^2)(p - n) - 2 Upsilon sigma R,
//     ( A j_p )' = 0,   j_p = -kappa_p (p' + p phi'),
//     ( A j_n )' = 0,   j_n = -kappa_n (n' - n phi'),
// with A = pi R^2, solved by Gummel sweeps: a damped Newton update of the
// potential with frozen Slotboom densities, then exponential-fitted linear
// solves for each species. The reported current uses the same cross-section
// moment as the reduced solver, I = pi * integral r (j_p - j_n) dr, which for
// radially uniform fluxes is A (j_p - j_n) / 2.
// ---------------------------------------------------------------------------

struct AreaOptions {
    double tol = 1e-10;          // stop when the sup-norm Gummel update < tol
    int max_gummel = 2000;
    int max_newton = 60;         // potential update inner iterations
    int max_backtrack = 40;
    double relaxation = 0.1;     // potential damping at or above the threshold
    double relax_threshold_volts = -1.0; // < 0 means 4 * V_T at solve time
    int n_intervals = 1000;
    bool graded = false;
    double grading_strength = 1.0;
    double phi_gauge = 0.0;      // additive shift on both bath potentials
    bool continuation = true;    // voltage ramp fallback when a cold solve fails
};

struct AreaAveragedSolution {
    std::vector<double> x;
    std::vector<double> phi;     // units of V_T
    std::vector<double> n, p;    // units of cbar, > 0
    double current_I = 0.0;      // dimensionless, mean over faces
    double current_max_deviation = 0.0;
    int iterations = 0;          // Gummel sweeps
    double residual = 0.0;       // final sup-norm update
    double v_applied = 0.0;      // volts
};

namespace detail {

// B(z) = z / (e^z - 1), the exponential-fitting weight. B(z) - B(-z) = -z.
inline double bernoulli(double z) {
    if (std::abs(z) < 1e-12) return 1.0 - 0.5 * z;
    if (z > 500.0) return z * std::exp(-z);
    return z / std::expm1(z);
}

// Geometry factors frozen per grid: face spacings and areas, node control
// volumes, and the wall-charge source averaged over each control volume so
// support edges that fall inside a cell are weighted by the overlap.
struct AreaLayout {
    std::vector<double> x;
    std::vector<double> h, area_face, pois_cond; // per face; cond = R_mid^2 / h
    std::vector<double> weight, rsq, sigma_cv;   // per node
};

inline AreaLayout build_area_layout(const AxialGrid& grid, const PoreScenario& sc) {
    AreaLayout lay;
    lay.x = grid.x;
    const std::size_t n = grid.x.size();
    lay.h.resize(n - 1);
    lay.area_face.resize(n - 1);
    lay.pois_cond.resize(n - 1);
    for (std::size_t f = 0; f + 1 < n; ++f) {
        lay.h[f] = grid.x[f + 1] - grid.x[f];
        const double r_mid = eval_radius(sc.geometry, 0.5 * (grid.x[f] + grid.x[f + 1]));
        lay.area_face[f] = std::numbers::pi * r_mid * r_mid;
        lay.pois_cond[f] = r_mid * r_mid / lay.h[f];
    }
    lay.weight.resize(n, 0.0);
    lay.rsq.resize(n);
    lay.sigma_cv.resize(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = eval_radius(sc.geometry, grid.x[i]);
        lay.rsq[i] = r * r;
        const double lo = i == 0 ? grid.x[0] : 0.5 * (grid.x[i - 1] + grid.x[i]);
        const double hi = i + 1 == n ? grid.x[n - 1] : 0.5 * (grid.x[i] + grid.x[i + 1]);
        lay.weight[i] = hi - lo;
        lay.sigma_cv[i] = average_sigma(sc.surface_charge, sc.geometry, sc.electrolyte, lo, hi);
    }
    return lay;
}

// Total exponential-fitted flux through each face for one species.
// drift_sign is +1 for the positive carrier and -1 for the negative one.
inline std::vector<double> species_face_fluxes(const AreaLayout& lay,
                                               const std::vector<double>& phi,
                                               const std::vector<double>& conc,
                                               double kappa, double drift_sign) {
    const std::size_t nf = lay.h.size();
    std::vector<double> flux(nf);
    for (std::size_t f = 0; f < nf; ++f) {
        const double dphi = drift_sign * (phi[f + 1] - phi[f]);
        flux[f] = kappa * lay.area_face[f] / lay.h[f] *
                  (bernoulli(dphi) * conc[f] - bernoulli(-dphi) * conc[f + 1]);
    }
    return flux;
}

// Linear solve of (A j)' = 0 for one species at frozen potential, Dirichlet
// ends. The Bernoulli weights are positive, so the matrix is an M-matrix and
// the solution inherits positivity from the boundary data.
inline std::vector<double> continuity_solve(const AreaLayout& lay,
                                            const std::vector<double>& phi,
                                            double left, double right,
                                            double kappa, double drift_sign) {
    const std::size_t n = lay.x.size();
    const std::size_t m = n - 2;
    std::vector<double> lower(m, 0.0), diag(m, 0.0), upper(m, 0.0), rhs(m, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const std::size_t k = i - 1;
        const double dphi_l = drift_sign * (phi[i] - phi[i - 1]);
        const double dphi_r = drift_sign * (phi[i + 1] - phi[i]);
        const double cl = kappa * lay.area_face[i - 1] / lay.h[i - 1];
        const double cr = kappa * lay.area_face[i] / lay.h[i];
        // Flux out through the right face minus flux in through the left.
        diag[k] = cr * bernoulli(dphi_r) + cl * bernoulli(-dphi_l);
        if (k > 0) lower[k] = -cl * bernoulli(dphi_l);
        else rhs[k] += cl * bernoulli(dphi_l) * left;
        if (k + 1 < m) upper[k] = -cr * bernoulli(-dphi_r);
        else rhs[k] += cr * bernoulli(-dphi_r) * right;
    }
    const std::vector<double> interior = solve_tridiagonal(lower, diag, upper, rhs);
    std::vector<double> conc(n);
    conc.front() = left;
    conc.back() = right;
    std::copy(interior.begin(), interior.end(), conc.begin() + 1);
    return conc;
}

// Damped Newton for the averaged Poisson equation with Slotboom densities
// sp, sn frozen, so the source reads (R^2/Lambda^2)(sp e^-phi - sn e^phi).
// Updates phi in place; the end values are Dirichlet and never touched.
inline void poisson_update(const AreaLayout& lay, std::vector<double>& phi,
                           const std::vector<double>& sp, const std::vector<double>& sn,
                           const DimensionlessParams& params, const AreaOptions& opts) {
    const std::size_t n = lay.x.size();
    const std::size_t m = n - 2;
    const double dsq = params.delta * params.delta;
    const double inv_lsq = 1.0 / (params.lambda_big * params.lambda_big);

    std::vector<double> res(m), scratch(n);
    // Residual of the interior equations; also reports the largest additive
    // term so the stop test can be scaled to the problem.
    const auto assemble = [&](const std::vector<double>& f, std::vector<double>& out) {
        double scale = 0.0;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double flux = dsq * (lay.pois_cond[i] * (f[i + 1] - f[i]) -
                                       lay.pois_cond[i - 1] * (f[i] - f[i - 1]));
            const double charge = lay.weight[i] * lay.rsq[i] * inv_lsq *
                                  (sp[i] * std::exp(-f[i]) - sn[i] * std::exp(f[i]));
            const double wall = lay.weight[i] * 2.0 * params.upsilon *
                                lay.sigma_cv[i] * std::sqrt(lay.rsq[i]);
            out[i - 1] = flux + charge + wall;
            scale = std::max({scale, std::abs(charge), std::abs(wall)});
        }
        return scale;
    };

    double source_scale = assemble(phi, res);
    double res_norm = 0.0;
    for (double r : res) res_norm = std::max(res_norm, std::abs(r));

    std::vector<double> lower(m), diag(m), upper(m), rhs(m), trial_res(m);
    std::vector<double> history;
    for (int it = 0; it < opts.max_newton; ++it) {
        const double stop = 1e-13 * (1.0 + source_scale);
        if (res_norm <= stop) return;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const std::size_t k = i - 1;
            lower[k] = k > 0 ? dsq * lay.pois_cond[i - 1] : 0.0;
            upper[k] = k + 1 < m ? dsq * lay.pois_cond[i] : 0.0;
            diag[k] = -dsq * (lay.pois_cond[i] + lay.pois_cond[i - 1]) -
                      lay.weight[i] * lay.rsq[i] * inv_lsq *
                          (sp[i] * std::exp(-phi[i]) + sn[i] * std::exp(phi[i]));
            rhs[k] = -res[k];
        }
        const std::vector<double> step = solve_tridiagonal(lower, diag, upper, rhs);

        double t = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < opts.max_backtrack; ++bt) {
            scratch = phi;
            bool in_range = true;
            for (std::size_t k = 0; k < m; ++k) {
                scratch[k + 1] += t * step[k];
                if (std::abs(scratch[k + 1]) > 200.0) in_range = false;
            }
            if (in_range) {
                const double trial_scale = assemble(scratch, trial_res);
                double trial_norm = 0.0;
                for (double r : trial_res) trial_norm = std::max(trial_norm, std::abs(r));
                if (trial_norm <= (1.0 - 1e-4 * t) * res_norm) {
                    phi.swap(scratch);
                    res.swap(trial_res);
                    res_norm = trial_norm;
                    source_scale = trial_scale;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        history.push_back(res_norm);
        if (!accepted)
            throw NoConvergence("potential update stalled", it + 1, res_norm, history);
    }
    if (res_norm > 1e-8 * (1.0 + source_scale))
        throw NoConvergence("potential update ran out of iterations",
                            opts.max_newton, res_norm, history);
}

inline CurrentEstimate area_face_current(const AreaLayout& lay,
                                         const std::vector<double>& phi,
                                         const std::vector<double>& n_conc,
                                         const std::vector<double>& p_conc,
                                         const DimensionlessParams& params) {
    const std::vector<double> fp = species_face_fluxes(lay, phi, p_conc, params.kappa_p, 1.0);
    const std::vector<double> fn = species_face_fluxes(lay, phi, n_conc, params.kappa_n, -1.0);
    CurrentEstimate est;
    est.per_face.resize(fp.size());
    double acc = 0.0;
    for (std::size_t f = 0; f < fp.size(); ++f) {
        est.per_face[f] = 0.5 * (fp[f] - fn[f]);
        acc += est.per_face[f];
    }
    est.value = acc / static_cast<double>(fp.size());
    for (double c : est.per_face)
        est.max_abs_deviation = std::max(est.max_abs_deviation, std::abs(c - est.value));
    return est;
}

inline AreaAveragedSolution solve_area_impl(const PoreScenario& sc,
                                            const DimensionlessParams& params,
                                            double v_applied, const AreaOptions& opts,
                                            const AreaAveragedSolution* warm) {
    if (sc.boundary.conc_left_p_mol_l <= 0.0 || sc.boundary.conc_left_n_mol_l <= 0.0 ||
        sc.boundary.conc_right_p_mol_l <= 0.0 || sc.boundary.conc_right_n_mol_l <= 0.0)
        throw NonPositiveConcentration("bath concentrations must be > 0");
    AxialGrid grid = opts.graded
        ? AxialGrid::graded_by_radius(sc.geometry, opts.n_intervals, opts.grading_strength)
        : AxialGrid::uniform(opts.n_intervals);
    const AreaLayout lay = build_area_layout(grid, sc);
    const std::size_t n = grid.x.size();

    const double cbar = sc.electrolyte.conc_scale_mol_l;
    const double phi_l = opts.phi_gauge;
    const double phi_r = v_applied / params.thermal_voltage + opts.phi_gauge;
    const double p_left = sc.boundary.conc_left_p_mol_l / cbar;
    const double p_right = sc.boundary.conc_right_p_mol_l / cbar;
    const double n_left = sc.boundary.conc_left_n_mol_l / cbar;
    const double n_right = sc.boundary.conc_right_n_mol_l / cbar;

    std::vector<double> phi(n), p_conc(n), n_conc(n);
    if (warm && warm->x.size() == n) {
        phi = warm->phi;
        p_conc = warm->p;
        n_conc = warm->n;
        phi.front() = phi_l;
        phi.back() = phi_r;
        p_conc.front() = p_left;
        p_conc.back() = p_right;
        n_conc.front() = n_left;
        n_conc.back() = n_right;
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const double t = grid.x[i];
            phi[i] = (1.0 - t) * phi_l + t * phi_r;
            p_conc[i] = std::pow(p_left, 1.0 - t) * std::pow(p_right, t);
            n_conc[i] = std::pow(n_left, 1.0 - t) * std::pow(n_right, t);
        }
    }

    const double v_threshold = opts.relax_threshold_volts >= 0.0
        ? opts.relax_threshold_volts
        : 4.0 * params.thermal_voltage;
    const bool relax = std::abs(v_applied) >= v_threshold;
    const double theta = opts.relaxation;

    std::vector<double> history;
    std::vector<double> sp(n), sn(n), phi_next(n);
    double err = std::numeric_limits<double>::infinity();
    int m = 0;
    bool converged = false;
    while (m < opts.max_gummel) {
        for (std::size_t i = 0; i < n; ++i) {
            sp[i] = p_conc[i] * std::exp(phi[i]);
            sn[i] = n_conc[i] * std::exp(-phi[i]);
        }
        phi_next = phi;
        poisson_update(lay, phi_next, sp, sn, params, opts);
        if (relax)
            for (std::size_t i = 1; i + 1 < n; ++i)
                phi_next[i] = phi[i] + theta * (phi_next[i] - phi[i]);
        const std::vector<double> p_next =
            continuity_solve(lay, phi_next, p_left, p_right, params.kappa_p, 1.0);
        const std::vector<double> n_next =
            continuity_solve(lay, phi_next, n_left, n_right, params.kappa_n, -1.0);
        for (std::size_t i = 0; i < n; ++i)
            if (p_next[i] <= 0.0 || n_next[i] <= 0.0)
                throw NonPositiveConcentration("concentrations must stay > 0 during iteration");

        err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            err = std::max(err, std::abs(phi_next[i] - phi[i]));
            err = std::max(err, std::abs(p_next[i] - p_conc[i]));
            err = std::max(err, std::abs(n_next[i] - n_conc[i]));
        }
        history.push_back(err);
        phi = phi_next;
        p_conc = p_next;
        n_conc = n_next;
        ++m;
        if (err < opts.tol) {
            converged = true;
            break;
        }
    }
    if (!converged) throw NoConvergence("averaged solver stalled", m, err, history);

    AreaAveragedSolution sol;
    sol.x = grid.x;
    sol.phi = std::move(phi);
    sol.n = std::move(n_conc);
    sol.p = std::move(p_conc);
    sol.v_applied = v_applied;
    sol.iterations = m;
    sol.residual = err;
    const CurrentEstimate est = area_face_current(lay, sol.phi, sol.n, sol.p, params);
    sol.current_I = est.value;
    sol.current_max_deviation = est.max_abs_deviation;
    return sol;
}

} // namespace detail

// Recompute the face currents of a converged state; exposes the conservation
// defect for diagnostics without trusting the stored figure.
inline CurrentEstimate area_current(const AreaAveragedSolution& sol, const PoreScenario& sc,
                                    const DimensionlessParams& params) {
    AxialGrid grid;
    grid.x = sol.x;
    const detail::AreaLayout lay = detail::build_area_layout(grid, sc);
    if (sol.phi.size() != sol.x.size() || sol.n.size() != sol.x.size() ||
        sol.p.size() != sol.x.size())
        throw GridMismatch("solution arrays must match the stored grid");
    return detail::area_face_current(lay, sol.phi, sol.n, sol.p, params);
}

// Steady solve at one applied voltage (volts), with the same voltage-ramp
// escalation as the reduced solver when a cold start fails.
inline AreaAveragedSolution solve_area_averaged(const PoreScenario& sc, double v_applied,
                                                const AreaOptions& opts = {},
                                                const AreaAveragedSolution* warm = nullptr) {
    const DimensionlessParams params = nondimensionalize(sc);
    try {
        return detail::solve_area_impl(sc, params, v_applied, opts, warm);
    } catch (const NoConvergence&) {
        if (!opts.continuation || v_applied == 0.0) throw;
    }
    const double full_step = 2.0 * params.thermal_voltage * (v_applied > 0 ? 1.0 : -1.0);
    const double min_step = std::abs(v_applied) * 1e-3;
    AreaAveragedSolution carry;
    bool have_carry = false;
    double v = 0.0;
    double step = full_step;
    while (v != v_applied) {
        double v_next = v + step;
        if ((v_applied > 0 && v_next > v_applied) || (v_applied < 0 && v_next < v_applied))
            v_next = v_applied;
        try {
            carry = detail::solve_area_impl(sc, params, v_next, opts,
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

// One steady solve per voltage, chunked exactly like the reduced solver's
// sweep so results depend only on (voltages, n_threads).
inline IVCurve iv_sweep_area(const PoreScenario& sc, const std::vector<double>& voltages,
                             const AreaOptions& opts = {}, int n_threads = 1) {
    if (voltages.empty()) throw ConfigError("voltage sweep list is empty");
    for (std::size_t i = 1; i < voltages.size(); ++i)
        if (voltages[i] <= voltages[i - 1])
            throw ConfigError("voltage sweep list must be strictly increasing");
    const DimensionlessParams params = nondimensionalize(sc);
    IVCurve curve;
    curve.points.resize(voltages.size());

    const int workers = std::max(1, std::min<int>(n_threads, static_cast<int>(voltages.size())));
    const std::size_t per_chunk =
        (voltages.size() + static_cast<std::size_t>(workers) - 1) / static_cast<std::size_t>(workers);

    auto run_chunk = [&](std::size_t begin, std::size_t end) {
        AreaAveragedSolution carry;
        bool have_carry = false;
        for (std::size_t k = begin; k < end; ++k) {
            IVPoint& pt = curve.points[k];
            pt.voltage_V = voltages[k];
            try {
                const AreaAveragedSolution sol = solve_area_averaged(sc, voltages[k], opts,
                                                                     have_carry ? &carry : nullptr);
                pt.current = sol.current_I;
                pt.current_A = sol.current_I * params.current_scale;
                pt.iterations = sol.iterations;
                pt.residual = sol.residual;
                pt.converged = true;
                carry = sol;
                have_carry = true;
            } catch (const NoConvergence& e) {
                pt.converged = false;
                pt.error = e.what();
                have_carry = false;
            }
        }
    };

    if (workers == 1) {
        run_chunk(0, voltages.size());
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            const std::size_t begin = static_cast<std::size_t>(w) * per_chunk;
            const std::size_t end = std::min(voltages.size(), begin + per_chunk);
            if (begin >= end) break;
            pool.emplace_back(run_chunk, begin, end);
        }
        for (auto& t : pool) t.join();
    }
    return curve;
}

} // namespace nanopnp
