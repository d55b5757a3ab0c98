#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "nanopnp/errors.hpp"
#include "nanopnp/gfuncs.hpp"
#include "nanopnp/grid.hpp"
#include "nanopnp/radial.hpp"
#include "nanopnp/scenario.hpp"
#include "nanopnp/tridiag.hpp"

namespace nanopnp {

// ---------------------------------------------------------------------------
// Reduced axial transport of a 1:1 electrolyte through a narrow charged pore.
//
// The cross-section is collapsed onto two Boltzmann prefactors Q(x), S(x)
// (negative/positive carriers), with the radial structure supplied by the
// screening moments g1, g2 at the local (lambda, beta). The steady state
// solves the pair of conservative two-point problems
//     d/dx( Theta1 dS/dx ) = 0,   Theta1 = A (Q/S)^(1/2) g1,
//     d/dx( Theta2 dQ/dx ) = 0,   Theta2 = A (S/Q)^(1/2) g2,
// with A = pi R^2, by a fixed point that refreshes the coefficients from the
// previous iterate and re-solves the frozen linear problems.
// ---------------------------------------------------------------------------

struct QuasiOptions {
    double tol = 1e-9;           // stop when ||dQ||_2 + ||dS||_2 < tol
    int max_iterations = 5000;
    double relaxation = 0.1;     // theta, applied at or above the threshold
    double relax_threshold_volts = -1.0; // < 0 means 4 * V_T at solve time
    int n_intervals = 1000;
    bool graded = false;         // grade node density by 1/R(x)
    double grading_strength = 1.0;
    GMode g_mode = GMode::Smoothed;
    GOracleOptions oracle;
    double phi_gauge = 0.0;      // additive shift on both bath potentials
    bool continuation = true;    // voltage ramp fallback when a cold solve fails
    bool polish = true;          // iterate past tol toward the roundoff floor
};

struct BoundaryLift {
    double q_left = 1.0;
    double s_left = 1.0;
    double q_right = 1.0;
    double s_right = 1.0;
};

// Dirichlet data for (Q, S) from the bath concentrations and potentials.
// With phi_l = phi_gauge and phi_r = v/V_T + phi_gauge:
//   S = p e^{phi},  Q = n e^{-phi}  at each end, concentrations in cbar units.
inline BoundaryLift boundary_lift(const BoundaryConditions& bc, const Electrolyte& elec,
                                  const DimensionlessParams& params,
                                  double v_applied, double phi_gauge = 0.0) {
    if (bc.conc_left_p_mol_l <= 0.0 || bc.conc_left_n_mol_l <= 0.0 ||
        bc.conc_right_p_mol_l <= 0.0 || bc.conc_right_n_mol_l <= 0.0)
        throw NonPositiveConcentration("bath concentrations must be > 0");
    if (params.thermal_voltage <= 0.0)
        throw NonPositiveInput("thermal voltage must be > 0");
    const double cbar = elec.conc_scale_mol_l;
    const double phi_l = phi_gauge;
    const double phi_r = v_applied / params.thermal_voltage + phi_gauge;
    BoundaryLift lift;
    lift.s_left = bc.conc_left_p_mol_l / cbar * std::exp(phi_l);
    lift.q_left = bc.conc_left_n_mol_l / cbar * std::exp(-phi_l);
    lift.s_right = bc.conc_right_p_mol_l / cbar * std::exp(phi_r);
    lift.q_right = bc.conc_right_n_mol_l / cbar * std::exp(-phi_r);
    return lift;
}

struct QuasiSolution {
    std::vector<double> x;
    std::vector<double> q, s;          // Boltzmann prefactors, > 0
    std::vector<double> g1, g2;        // screening moments at the final state
    std::vector<double> lambda, beta;  // local Debye ratio and wall charge
    double current_I = 0.0;            // dimensionless, mean over faces
    double current_max_deviation = 0.0;
    int iterations = 0;
    double residual = 0.0;             // final ||dQ||_2 + ||dS||_2
    double v_applied = 0.0;            // volts
};

struct ResidualArrays {
    std::vector<double> res_s; // net face flux of the S equation per node
    std::vector<double> res_q;
};

struct CurrentEstimate {
    double value = 0.0;               // mean of the per-face currents
    double max_abs_deviation = 0.0;   // conservation diagnostic
    std::vector<double> per_face;
};

namespace detail {

struct TransportCoeffs {
    std::vector<double> theta1, theta2;
    std::vector<double> lambda, beta, g1, g2;
};

inline double l2_norm_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

inline double l2_norm(const std::vector<double>& a) {
    return std::sqrt(std::inner_product(a.begin(), a.end(), a.begin(), 0.0));
}

inline TransportCoeffs transport_coefficients(const std::vector<double>& q,
                                              const std::vector<double>& s,
                                              const std::vector<double>& x,
                                              const PoreScenario& sc,
                                              const DimensionlessParams& params,
                                              GMode mode, const GOracleOptions& oracle) {
    const std::size_t n = x.size();
    TransportCoeffs c;
    c.theta1.resize(n);
    c.theta2.resize(n);
    c.lambda.resize(n);
    c.beta.resize(n);
    c.g1.resize(n);
    c.g2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (q[i] <= 0.0 || s[i] <= 0.0)
            throw NonPositiveConcentration("Q and S must stay > 0 during iteration");
        const double radius = eval_radius(sc.geometry, x[i]);
        const double sigma = eval_sigma(sc.surface_charge, sc.geometry, sc.electrolyte, x[i]);
        const auto [beta, lambda] = local_beta_lambda(params, sigma, radius, q[i] * s[i]);
        const GEval ge = eval_g(lambda, beta, mode, oracle);
        const double area = std::numbers::pi * radius * radius;
        c.lambda[i] = lambda;
        c.beta[i] = beta;
        c.g1[i] = ge.g1;
        c.g2[i] = ge.g2;
        c.theta1[i] = area * std::sqrt(q[i] / s[i]) * ge.g1;
        c.theta2[i] = area * std::sqrt(s[i] / q[i]) * ge.g2;
    }
    return c;
}

// Face conductance between nodes i and i+1: harmonic mean of the nodal
// coefficients over the interval length. Harmonic averaging keeps the flux
// continuous across jumps in the coefficient (the wall charge switches on
// and off mid-pore).
inline std::vector<double> face_conductance(const std::vector<double>& theta,
                                            const std::vector<double>& x) {
    std::vector<double> cond(x.size() - 1);
    for (std::size_t f = 0; f < cond.size(); ++f) {
        const double h = x[f + 1] - x[f];
        const double a = theta[f], b = theta[f + 1];
        cond[f] = 2.0 * a * b / ((a + b) * h);
    }
    return cond;
}

// Solve d/dx(theta du/dx) = 0 with Dirichlet ends for frozen coefficients.
// The tridiagonal system is an M-matrix, so positive boundary data give a
// positive solution (discrete maximum principle).
inline std::vector<double> solve_transport(const std::vector<double>& theta,
                                           const std::vector<double>& x,
                                           double left, double right) {
    const std::size_t n = x.size();
    const std::vector<double> cond = face_conductance(theta, x);
    const std::size_t m = n - 2; // interior unknowns
    std::vector<double> lower(m, 0.0), diag(m, 0.0), upper(m, 0.0), rhs(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        const double cl = cond[k];     // face (k, k+1) in node numbering
        const double cr = cond[k + 1]; // face (k+1, k+2)
        diag[k] = cl + cr;
        if (k > 0) lower[k] = -cl;
        if (k + 1 < m) upper[k] = -cr;
        if (k == 0) rhs[k] += cl * left;
        if (k + 1 == m) rhs[k] += cr * right;
    }
    const std::vector<double> interior = solve_tridiagonal(lower, diag, upper, rhs);
    std::vector<double> u(n);
    u.front() = left;
    u.back() = right;
    std::copy(interior.begin(), interior.end(), u.begin() + 1);
    return u;
}

inline CurrentEstimate face_current(const std::vector<double>& q,
                                    const std::vector<double>& s,
                                    const TransportCoeffs& coeffs,
                                    const std::vector<double>& x,
                                    const DimensionlessParams& params) {
    const std::vector<double> c1 = face_conductance(coeffs.theta1, x);
    const std::vector<double> c2 = face_conductance(coeffs.theta2, x);
    CurrentEstimate est;
    est.per_face.resize(c1.size());
    double acc = 0.0;
    for (std::size_t f = 0; f < c1.size(); ++f) {
        const double flux_s = c1[f] * (s[f + 1] - s[f]); // Theta1 dS/dx at the face
        const double flux_q = c2[f] * (q[f + 1] - q[f]);
        est.per_face[f] = -params.kappa_p * flux_s + params.kappa_n * flux_q;
        acc += est.per_face[f];
    }
    est.value = acc / static_cast<double>(est.per_face.size());
    for (double i_f : est.per_face)
        est.max_abs_deviation = std::max(est.max_abs_deviation, std::abs(i_f - est.value));
    return est;
}

} // namespace detail

// Net face flux per interior node for each species equation, at the given
// state. Zero (to discretization tolerance) exactly when (Q, S) solve the
// steady problem on this grid.
inline ResidualArrays assemble_residual(const std::vector<double>& q,
                                        const std::vector<double>& s,
                                        const AxialGrid& grid,
                                        const PoreScenario& sc,
                                        const DimensionlessParams& params,
                                        GMode mode = GMode::Smoothed,
                                        const GOracleOptions& oracle = {}) {
    if (q.size() != grid.x.size() || s.size() != grid.x.size())
        throw GridMismatch("Q, S arrays must match the axial grid");
    const auto coeffs = detail::transport_coefficients(q, s, grid.x, sc, params, mode, oracle);
    const auto c1 = detail::face_conductance(coeffs.theta1, grid.x);
    const auto c2 = detail::face_conductance(coeffs.theta2, grid.x);
    ResidualArrays res;
    res.res_s.assign(grid.x.size(), 0.0);
    res.res_q.assign(grid.x.size(), 0.0);
    for (std::size_t i = 1; i + 1 < grid.x.size(); ++i) {
        res.res_s[i] = c1[i] * (s[i + 1] - s[i]) - c1[i - 1] * (s[i] - s[i - 1]);
        res.res_q[i] = c2[i] * (q[i + 1] - q[i]) - c2[i - 1] * (q[i] - q[i - 1]);
    }
    return res;
}

// Per-face current recomputed from a solution's stored arrays:
//   I = -kappa_p Theta1 dS/dx + kappa_n Theta2 dQ/dx.
// The mean is the reported current; the max deviation measures how far the
// state is from discrete flux conservation.
inline CurrentEstimate current(const QuasiSolution& sol, const PoreScenario& sc,
                               const DimensionlessParams& params) {
    detail::TransportCoeffs coeffs;
    const std::size_t n = sol.x.size();
    coeffs.theta1.resize(n);
    coeffs.theta2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double radius = eval_radius(sc.geometry, sol.x[i]);
        const double area = std::numbers::pi * radius * radius;
        coeffs.theta1[i] = area * std::sqrt(sol.q[i] / sol.s[i]) * sol.g1[i];
        coeffs.theta2[i] = area * std::sqrt(sol.s[i] / sol.q[i]) * sol.g2[i];
    }
    return detail::face_current(sol.q, sol.s, coeffs, sol.x, params);
}

namespace detail {

inline QuasiSolution solve_steady_impl(const PoreScenario& sc,
                                       const DimensionlessParams& params,
                                       double v_applied, const QuasiOptions& opts,
                                       const QuasiSolution* warm) {
    const BoundaryLift lift =
        boundary_lift(sc.boundary, sc.electrolyte, params, v_applied, opts.phi_gauge);
    AxialGrid grid = opts.graded
        ? AxialGrid::graded_by_radius(sc.geometry, opts.n_intervals, opts.grading_strength)
        : AxialGrid::uniform(opts.n_intervals);
    const std::size_t n = grid.x.size();

    std::vector<double> q(n), s(n);
    if (warm && warm->x.size() == n) {
        q = warm->q;
        s = warm->s;
        q.front() = lift.q_left;
        q.back() = lift.q_right;
        s.front() = lift.s_left;
        s.back() = lift.s_right;
    } else {
        // Geometric interpolation between the lifted end values keeps the
        // initial chemical potential linear in x.
        for (std::size_t i = 0; i < n; ++i) {
            const double t = grid.x[i];
            q[i] = std::pow(lift.q_left, 1.0 - t) * std::pow(lift.q_right, t);
            s[i] = std::pow(lift.s_left, 1.0 - t) * std::pow(lift.s_right, t);
        }
    }

    const double v_threshold = opts.relax_threshold_volts >= 0.0
        ? opts.relax_threshold_volts
        : 4.0 * params.thermal_voltage;
    const bool relax = std::abs(v_applied) >= v_threshold;
    const double theta = opts.relaxation;

    std::vector<double> history;
    double err = std::numeric_limits<double>::infinity();
    int m = 0;
    bool converged = false;
    std::vector<double> q_next(n), s_next(n);
    while (m < opts.max_iterations) {
        const TransportCoeffs coeffs =
            transport_coefficients(q, s, grid.x, sc, params, opts.g_mode, opts.oracle);
        const std::vector<double> s_star =
            solve_transport(coeffs.theta1, grid.x, lift.s_left, lift.s_right);
        const std::vector<double> q_star =
            solve_transport(coeffs.theta2, grid.x, lift.q_left, lift.q_right);
        if (relax) {
            for (std::size_t i = 0; i < n; ++i) {
                q_next[i] = theta * q_star[i] + (1.0 - theta) * q[i];
                s_next[i] = theta * s_star[i] + (1.0 - theta) * s[i];
            }
        } else {
            q_next = q_star;
            s_next = s_star;
        }
        err = l2_norm_diff(q_next, q) + l2_norm_diff(s_next, s);
        history.push_back(err);
        q.swap(q_next);
        s.swap(s_next);
        ++m;
        if (err < opts.tol) {
            converged = true;
            break;
        }
    }
    if (!converged) throw NoConvergence("fixed point stalled", m, err, history);

    if (opts.polish) {
        // Keep iterating toward the roundoff floor so the returned state
        // satisfies the discrete system far more tightly than the stop rule
        // requires; downstream conservation checks rely on this.
        const double floor = 1e-13 * (1.0 + l2_norm(q) + l2_norm(s));
        double prev_err = err;
        int stale = 0;
        for (int extra = 0; extra < 500 && err > floor; ++extra) {
            const TransportCoeffs coeffs =
                transport_coefficients(q, s, grid.x, sc, params, opts.g_mode, opts.oracle);
            const std::vector<double> s_star =
                solve_transport(coeffs.theta1, grid.x, lift.s_left, lift.s_right);
            const std::vector<double> q_star =
                solve_transport(coeffs.theta2, grid.x, lift.q_left, lift.q_right);
            if (relax) {
                for (std::size_t i = 0; i < n; ++i) {
                    q_next[i] = theta * q_star[i] + (1.0 - theta) * q[i];
                    s_next[i] = theta * s_star[i] + (1.0 - theta) * s[i];
                }
            } else {
                q_next = q_star;
                s_next = s_star;
            }
            err = l2_norm_diff(q_next, q) + l2_norm_diff(s_next, s);
            q.swap(q_next);
            s.swap(s_next);
            ++m;
            stale = err < 0.5 * prev_err ? 0 : stale + 1;
            if (stale > 25) break;
            prev_err = std::min(prev_err, err);
        }
    }

    QuasiSolution sol;
    sol.x = grid.x;
    sol.q = std::move(q);
    sol.s = std::move(s);
    sol.v_applied = v_applied;
    sol.iterations = m;
    sol.residual = err;
    const TransportCoeffs coeffs =
        transport_coefficients(sol.q, sol.s, sol.x, sc, params, opts.g_mode, opts.oracle);
    sol.g1 = coeffs.g1;
    sol.g2 = coeffs.g2;
    sol.lambda = coeffs.lambda;
    sol.beta = coeffs.beta;
    const CurrentEstimate est = face_current(sol.q, sol.s, coeffs, sol.x, params);
    sol.current_I = est.value;
    sol.current_max_deviation = est.max_abs_deviation;
    return sol;
}

} // namespace detail

// Steady solve at one applied voltage (volts). A failed cold start escalates
// to a voltage ramp: advance from 0 toward the target in steps of at most
// 2 V_T, warm-starting each rung, halving the step on failure.
inline QuasiSolution solve_steady(const PoreScenario& sc, double v_applied,
                                  const QuasiOptions& opts = {},
                                  const QuasiSolution* warm = nullptr) {
    const DimensionlessParams params = nondimensionalize(sc);
    try {
        return detail::solve_steady_impl(sc, params, v_applied, opts, warm);
    } catch (const NoConvergence&) {
        if (!opts.continuation || v_applied == 0.0) throw;
    }
    const double full_step = 2.0 * params.thermal_voltage * (v_applied > 0 ? 1.0 : -1.0);
    const double min_step = std::abs(v_applied) * 1e-3;
    QuasiSolution carry;
    bool have_carry = false;
    double v = 0.0;
    double step = full_step;
    while (v != v_applied) {
        double v_next = v + step;
        if ((v_applied > 0 && v_next > v_applied) || (v_applied < 0 && v_next < v_applied))
            v_next = v_applied;
        try {
            carry = detail::solve_steady_impl(sc, params, v_next, opts,
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

// ---------------------------------------------------------------------------
// IV sweep with warm-started continuation along the voltage list.
// ---------------------------------------------------------------------------

struct IVPoint {
    double voltage_V = 0.0;
    double current = 0.0;      // dimensionless
    double current_A = 0.0;    // amperes
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
    std::string error;
};

struct IVCurve {
    std::vector<IVPoint> points;
};

// One steady solve per voltage. The list is split into contiguous chunks, one
// per worker; inside a chunk each point warm-starts from its predecessor, so
// the result depends only on (voltages, n_threads), not on scheduling.
inline IVCurve iv_sweep(const PoreScenario& sc, const std::vector<double>& voltages,
                        const QuasiOptions& opts = {}, int n_threads = 1) {
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
        QuasiSolution carry;
        bool have_carry = false;
        for (std::size_t k = begin; k < end; ++k) {
            IVPoint& pt = curve.points[k];
            pt.voltage_V = voltages[k];
            try {
                const QuasiSolution sol = solve_steady(sc, voltages[k], opts,
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

// ---------------------------------------------------------------------------
// Radial reconstruction of the full fields from an axial solution.
// ---------------------------------------------------------------------------

struct ReconstructedFields {
    std::vector<double> x;
    std::vector<double> xi; // shared radial grid, uniform on [0,1]
    std::vector<std::vector<double>> r;   // [ix][ir], units of R0
    std::vector<std::vector<double>> phi; // thermal-voltage units
    std::vector<std::vector<double>> n;   // cbar units
    std::vector<std::vector<double>> p;
};

// For each axial station solve the radial screening problem at the local
// (lambda, beta) and evaluate
//   n = (QS)^(1/2) e^{psi},  p = (QS)^(1/2) e^{-psi},  phi = ln(S/Q)/2 + psi.
// The wall-graded radial solution is interpolated onto a common uniform grid.
inline ReconstructedFields reconstruct_fields(const QuasiSolution& sol,
                                              const PoreScenario& sc,
                                              int radial_resolution = 64) {
    if (radial_resolution < 4) throw NonPositiveInput("radial resolution must be >= 4");
    const std::size_t nx = sol.x.size();
    const std::size_t nr = static_cast<std::size_t>(radial_resolution) + 1;
    ReconstructedFields out;
    out.x = sol.x;
    out.xi.resize(nr);
    for (std::size_t j = 0; j < nr; ++j)
        out.xi[j] = static_cast<double>(j) / radial_resolution;
    out.r.assign(nx, std::vector<double>(nr));
    out.phi.assign(nx, std::vector<double>(nr));
    out.n.assign(nx, std::vector<double>(nr));
    out.p.assign(nx, std::vector<double>(nr));

    for (std::size_t i = 0; i < nx; ++i) {
        const double radius = eval_radius(sc.geometry, sol.x[i]);
        const double root_qs = std::sqrt(sol.q[i] * sol.s[i]);
        const double phi_axial = 0.5 * std::log(sol.s[i] / sol.q[i]);
        std::vector<double> psi(nr, 0.0);
        if (sol.beta[i] != 0.0) {
            RadialProblem prob;
            prob.lambda = sol.lambda[i];
            prob.beta = sol.beta[i];
            const RadialProfile prof = solve_psi(prob);
            // Linear interpolation onto the shared grid; psi is smooth and the
            // solve grid already resolves the wall layer.
            std::size_t k = 0;
            for (std::size_t j = 0; j < nr; ++j) {
                const double xi = out.xi[j];
                while (k + 2 < prof.xi.size() && prof.xi[k + 1] < xi) ++k;
                const double t = (xi - prof.xi[k]) / (prof.xi[k + 1] - prof.xi[k]);
                psi[j] = prof.psi[k] + t * (prof.psi[k + 1] - prof.psi[k]);
            }
        }
        for (std::size_t j = 0; j < nr; ++j) {
            out.r[i][j] = out.xi[j] * radius;
            out.phi[i][j] = phi_axial + psi[j];
            out.n[i][j] = root_qs * std::exp(psi[j]);
            out.p[i][j] = root_qs * std::exp(-psi[j]);
        }
    }
    return out;
}

} // namespace nanopnp
