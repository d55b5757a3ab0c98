#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "nanopnp/area1d.hpp"
#include "nanopnp/errors.hpp"
#include "nanopnp/grid.hpp"
#include "nanopnp/scenario.hpp"

namespace nanopnp {

// ---------------------------------------------------------------------------
// Axisymmetric drift-diffusion reference solver on the boundary-fitted grid
// (x, xi) with xi = r / R(x), so the wall is the grid line xi = 1. In mapped
// conservative form each equation reads
//     d/dx Fx + d/dxi Fxi = source,
// with, for a species of Slotboom density chi = c e^{+-phi} and mobility
// weight m = e^{-+phi},
//     Fx  = -kappa m ( R^2 xi chi_x - R R' xi^2 chi_xi ),
//     Fxi = -kappa m ( (xi/delta^2 + R'^2 xi^3) chi_xi - R R' xi^2 chi_x ),
// and for the potential the same structure with delta^2 R^2 xi, the radial
// coefficient (xi + delta^2 R'^2 xi^3), cross term delta^2 R R' xi^2, and
// charge source R^2 xi (n - p) / Lambda^2. The mapped wall flux vanishes for
// the species (no-flux) and equals R Upsilon sqrt(1 + delta^2 R'^2) sigma for
// the potential, so both wall conditions enter as boundary face fluxes.
// Gummel iteration alternates a damped Newton solve of the potential with
// frozen Slotboom densities against exponential-fitted species solves.
// ---------------------------------------------------------------------------

struct Pnp2dOptions {
    double tol = 1e-7;           // sup-norm of successive potential updates
    int max_gummel = 500;
    int max_newton = 50;         // potential inner iterations
    int max_backtrack = 40;
    double damp_threshold = 2.0; // halve a potential update larger than this
    int nx = 256;                // axial cells
    int nr = 64;                 // radial cells
    double grading = 1.15;       // radial stretch toward the wall
    double phi_gauge = 0.0;      // additive shift on both bath potentials
    bool continuation = true;    // voltage ramp fallback when a cold solve fails
};

struct AxiMesh {
    int nx = 0, nr = 0;          // cell counts
    double grading = 1.0;
    std::vector<double> x;       // nx + 1 axial nodes on [0, 1]
    std::vector<double> xi;      // nr + 1 radial nodes on [0, 1], graded to 1
    std::vector<double> radius;  // R at each column, pore-radius units

    double r(int i, int j) const { return radius[i] * xi[j]; }
    double wall_cell_xi() const { return xi[nr] - xi[nr - 1]; }
};

inline AxiMesh build_mesh(const PoreGeometry& geom, int nx, int nr, double grading) {
    if (nx < 8 || nr < 8) throw NonPositiveInput("2d mesh needs >= 8 cells each way");
    validate_geometry(geom);
    AxiMesh mesh;
    mesh.nx = nx;
    mesh.nr = nr;
    mesh.grading = grading;
    mesh.x.resize(static_cast<std::size_t>(nx) + 1);
    for (int i = 0; i <= nx; ++i) mesh.x[i] = static_cast<double>(i) / nx;
    mesh.x.back() = 1.0;
    mesh.xi = graded_radial_nodes(nr, grading);
    mesh.radius.resize(static_cast<std::size_t>(nx) + 1);
    for (int i = 0; i <= nx; ++i) {
        mesh.radius[i] = eval_radius(geom, mesh.x[i]);
        if (mesh.radius[i] <= 1e-6)
            throw DegenerateGeometry("pore radius too small to mesh");
    }
    return mesh;
}

struct Field2D {
    AxiMesh mesh;
    std::vector<std::vector<double>> phi, n, p; // [column][radial node]
    std::vector<double> face_x;          // axial face midpoints
    std::vector<double> current_profile; // cross-section current per face
    double current_I = 0.0;              // mean over faces
    double current_spread = 0.0;         // max |I_face - mean|
    int iterations = 0;                  // Gummel sweeps
    double residual = 0.0;               // final potential update sup-norm
    double v_applied = 0.0;              // volts
};

namespace detail {

using SparseMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Face and cell factors frozen per (mesh, scenario). The radial weight of an
// axial strip is integrated exactly (ix = int xi, jx = int xi^2 over the dual
// cell) so the axis row keeps a regular equation.
struct Stencil2D {
    int nx = 0, nr = 0;
    std::vector<double> hx, hxi;         // cell sizes
    std::vector<double> wx, wxi;         // dual widths per node
    std::vector<double> ix, jx;          // per radial node, strip integrals
    std::vector<double> xi_face;         // radial face positions
    std::vector<double> r_node, rp_node; // per column
    std::vector<double> r_face, rp_face; // per axial face
    std::vector<double> wall_source;     // potential wall flux per column

    int id(int i, int j) const { return i * (nr + 1) + j; }
    int size() const { return (nx + 1) * (nr + 1); }
};

inline Stencil2D build_stencil(const AxiMesh& mesh, const PoreScenario& sc,
                               const DimensionlessParams& params) {
    Stencil2D st;
    st.nx = mesh.nx;
    st.nr = mesh.nr;
    const int nx = mesh.nx, nr = mesh.nr;
    st.hx.resize(nx);
    st.hxi.resize(nr);
    for (int i = 0; i < nx; ++i) st.hx[i] = mesh.x[i + 1] - mesh.x[i];
    for (int j = 0; j < nr; ++j) st.hxi[j] = mesh.xi[j + 1] - mesh.xi[j];

    st.wx.resize(nx + 1);
    st.wxi.resize(nr + 1);
    st.ix.resize(nr + 1);
    st.jx.resize(nr + 1);
    for (int i = 0; i <= nx; ++i) {
        const double lo = i == 0 ? 0.0 : 0.5 * (mesh.x[i - 1] + mesh.x[i]);
        const double hi = i == nx ? 1.0 : 0.5 * (mesh.x[i] + mesh.x[i + 1]);
        st.wx[i] = hi - lo;
    }
    for (int j = 0; j <= nr; ++j) {
        const double lo = j == 0 ? 0.0 : 0.5 * (mesh.xi[j - 1] + mesh.xi[j]);
        const double hi = j == nr ? 1.0 : 0.5 * (mesh.xi[j] + mesh.xi[j + 1]);
        st.wxi[j] = hi - lo;
        st.ix[j] = 0.5 * (hi * hi - lo * lo);
        st.jx[j] = (hi * hi * hi - lo * lo * lo) / 3.0;
    }
    st.xi_face.resize(nr);
    for (int j = 0; j < nr; ++j) st.xi_face[j] = 0.5 * (mesh.xi[j] + mesh.xi[j + 1]);

    st.r_face.resize(nx);
    st.rp_face.resize(nx);
    for (int i = 0; i < nx; ++i) {
        const double xm = 0.5 * (mesh.x[i] + mesh.x[i + 1]);
        st.r_face[i] = eval_radius(sc.geometry, xm);
        st.rp_face[i] = eval_radius_derivative(sc.geometry, xm);
    }
    st.r_node = mesh.radius;
    st.rp_node.resize(nx + 1);
    for (int i = 0; i <= nx; ++i) {
        if (i == 0) st.rp_node[i] = st.rp_face[0];
        else if (i == nx) st.rp_node[i] = st.rp_face[nx - 1];
        else st.rp_node[i] = 0.5 * (st.rp_face[i - 1] + st.rp_face[i]);
    }

    const double dsq = params.delta * params.delta;
    st.wall_source.resize(nx + 1, 0.0);
    for (int i = 1; i < nx; ++i) {
        const double lo = 0.5 * (mesh.x[i - 1] + mesh.x[i]);
        const double hi = 0.5 * (mesh.x[i] + mesh.x[i + 1]);
        const double sig = average_sigma(sc.surface_charge, sc.geometry, sc.electrolyte, lo, hi);
        const double rp = st.rp_node[i];
        st.wall_source[i] = st.wx[i] * st.r_node[i] * params.upsilon *
                            std::sqrt(1.0 + dsq * rp * rp) * sig;
    }
    return st;
}

// Tangential derivative stencils, central inside the domain and one-sided on
// its edges. Each entry is (node id, coefficient).
struct TwoPoint {
    int a = 0, b = 0;
    double c = 0.0; // derivative = c * (value[a] - value[b])
};

inline TwoPoint dxi_stencil(const Stencil2D& st, const std::vector<double>& xi, int i, int j) {
    if (j == 0) return {st.id(i, 1), st.id(i, 0), 1.0 / st.hxi[0]};
    if (j == st.nr) return {st.id(i, st.nr), st.id(i, st.nr - 1), 1.0 / st.hxi[st.nr - 1]};
    return {st.id(i, j + 1), st.id(i, j - 1), 1.0 / (xi[j + 1] - xi[j - 1])};
}

inline TwoPoint dx_stencil(const Stencil2D& st, const std::vector<double>& x, int i, int j) {
    if (i == 0) return {st.id(1, j), st.id(0, j), 1.0 / st.hx[0]};
    if (i == st.nx) return {st.id(st.nx, j), st.id(st.nx - 1, j), 1.0 / st.hx[st.nx - 1]};
    return {st.id(i + 1, j), st.id(i - 1, j), 1.0 / (x[i + 1] - x[i - 1])};
}

// Potential flux operator: linear, mesh-only, with identity rows on the two
// Dirichlet columns. Built once per solve and reused by every Newton step.
inline SparseMat build_poisson_operator(const AxiMesh& mesh, const Stencil2D& st,
                                        const DimensionlessParams& params) {
    const double dsq = params.delta * params.delta;
    const int nx = st.nx, nr = st.nr;
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(st.size()) * 12);
    const auto add = [&](int row, int col, double v) {
        const int i = row / (nr + 1);
        if (i == 0 || i == nx) return; // Dirichlet rows stay identity
        trip.emplace_back(row, col, v);
    };
    for (int k = 0; k < st.size(); ++k) trip.emplace_back(k, k, 0.0); // keep diagonal present
    for (int i = 0; i <= nx; ++i)
        for (int j = 0; j <= nr; ++j)
            if (i == 0 || i == nx) trip.emplace_back(st.id(i, j), st.id(i, j), 1.0);

    // Axial faces: flux  a (phi_R - phi_L) - b * avg dphi/dxi, signed + into
    // the left owner and - into the right owner.
    for (int i = 0; i < nx; ++i) {
        for (int j = 0; j <= nr; ++j) {
            const double a = dsq * st.r_face[i] * st.r_face[i] * st.ix[j] / st.hx[i];
            const double b = dsq * st.r_face[i] * st.rp_face[i] * st.jx[j];
            const int left = st.id(i, j), right = st.id(i + 1, j);
            add(left, right, a);
            add(left, left, -a);
            add(right, right, -a);
            add(right, left, a);
            const TwoPoint dl = dxi_stencil(st, mesh.xi, i, j);
            const TwoPoint dr = dxi_stencil(st, mesh.xi, i + 1, j);
            add(left, dl.a, -0.5 * b * dl.c);
            add(left, dl.b, 0.5 * b * dl.c);
            add(left, dr.a, -0.5 * b * dr.c);
            add(left, dr.b, 0.5 * b * dr.c);
            add(right, dl.a, 0.5 * b * dl.c);
            add(right, dl.b, -0.5 * b * dl.c);
            add(right, dr.a, 0.5 * b * dr.c);
            add(right, dr.b, -0.5 * b * dr.c);
        }
    }
    // Radial faces, interior columns only.
    for (int i = 1; i < nx; ++i) {
        const double rp = st.rp_node[i];
        for (int j = 0; j < nr; ++j) {
            const double xf = st.xi_face[j];
            const double a = (xf + dsq * rp * rp * xf * xf * xf) * st.wx[i] / st.hxi[j];
            const double b = dsq * st.r_node[i] * rp * xf * xf * st.wx[i];
            const int bot = st.id(i, j), top = st.id(i, j + 1);
            add(bot, top, a);
            add(bot, bot, -a);
            add(top, top, -a);
            add(top, bot, a);
            const TwoPoint db = dx_stencil(st, mesh.x, i, j);
            const TwoPoint dt = dx_stencil(st, mesh.x, i, j + 1);
            add(bot, db.a, -0.5 * b * db.c);
            add(bot, db.b, 0.5 * b * db.c);
            add(bot, dt.a, -0.5 * b * dt.c);
            add(bot, dt.b, 0.5 * b * dt.c);
            add(top, db.a, 0.5 * b * db.c);
            add(top, db.b, -0.5 * b * db.c);
            add(top, dt.a, 0.5 * b * dt.c);
            add(top, dt.b, -0.5 * b * dt.c);
        }
    }
    SparseMat op(st.size(), st.size());
    op.setFromTriplets(trip.begin(), trip.end());
    op.makeCompressed();
    return op;
}

// Exponential-fitting mobility between two nodes: the flux-preserving mean of
// e^{-phi} (positive carrier, sign +1) or e^{+phi} (negative carrier, -1).
inline double sg_mean(double phi_a, double phi_b, double sign) {
    if (sign > 0) return std::exp(-phi_a) * bernoulli(phi_b - phi_a);
    return std::exp(phi_a) * bernoulli(phi_a - phi_b);
}

// Species system in Slotboom form at frozen potential. Dirichlet on the two
// end columns, natural no-flux elsewhere.
inline void assemble_species(const AxiMesh& mesh, const Stencil2D& st,
                             const DimensionlessParams& params,
                             const Eigen::VectorXd& phi, double kappa, double sign,
                             double chi_left, double chi_right,
                             SparseMat& a_out, Eigen::VectorXd& b_out) {
    const double dsq = params.delta * params.delta;
    const int nx = st.nx, nr = st.nr;
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(st.size()) * 12);
    b_out = Eigen::VectorXd::Zero(st.size());
    const auto add = [&](int row, int col, double v) {
        const int i = row / (nr + 1);
        if (i == 0 || i == nx) return;
        trip.emplace_back(row, col, v);
    };
    for (int k = 0; k < st.size(); ++k) trip.emplace_back(k, k, 0.0);
    for (int j = 0; j <= nr; ++j) {
        trip.emplace_back(st.id(0, j), st.id(0, j), 1.0);
        b_out[st.id(0, j)] = chi_left;
        trip.emplace_back(st.id(nx, j), st.id(nx, j), 1.0);
        b_out[st.id(nx, j)] = chi_right;
    }

    for (int i = 0; i < nx; ++i) {
        for (int j = 0; j <= nr; ++j) {
            const int left = st.id(i, j), right = st.id(i + 1, j);
            const double m = sg_mean(phi[left], phi[right], sign);
            const double a = kappa * m * st.r_face[i] * st.r_face[i] * st.ix[j] / st.hx[i];
            const double b = kappa * m * st.r_face[i] * st.rp_face[i] * st.jx[j];
            add(left, right, a);
            add(left, left, -a);
            add(right, right, -a);
            add(right, left, a);
            const TwoPoint dl = dxi_stencil(st, mesh.xi, i, j);
            const TwoPoint dr = dxi_stencil(st, mesh.xi, i + 1, j);
            add(left, dl.a, -0.5 * b * dl.c);
            add(left, dl.b, 0.5 * b * dl.c);
            add(left, dr.a, -0.5 * b * dr.c);
            add(left, dr.b, 0.5 * b * dr.c);
            add(right, dl.a, 0.5 * b * dl.c);
            add(right, dl.b, -0.5 * b * dl.c);
            add(right, dr.a, 0.5 * b * dr.c);
            add(right, dr.b, -0.5 * b * dr.c);
        }
    }
    for (int i = 1; i < nx; ++i) {
        const double rp = st.rp_node[i];
        for (int j = 0; j < nr; ++j) {
            const int bot = st.id(i, j), top = st.id(i, j + 1);
            const double m = sg_mean(phi[bot], phi[top], sign);
            const double xf = st.xi_face[j];
            const double a = kappa * m * (xf / dsq + rp * rp * xf * xf * xf) * st.wx[i] / st.hxi[j];
            const double b = kappa * m * st.r_node[i] * rp * xf * xf * st.wx[i];
            add(bot, top, a);
            add(bot, bot, -a);
            add(top, top, -a);
            add(top, bot, a);
            const TwoPoint db = dx_stencil(st, mesh.x, i, j);
            const TwoPoint dt = dx_stencil(st, mesh.x, i, j + 1);
            add(bot, db.a, -0.5 * b * db.c);
            add(bot, db.b, 0.5 * b * db.c);
            add(bot, dt.a, -0.5 * b * dt.c);
            add(bot, dt.b, 0.5 * b * dt.c);
            add(top, db.a, 0.5 * b * db.c);
            add(top, db.b, -0.5 * b * db.c);
            add(top, dt.a, 0.5 * b * dt.c);
            add(top, dt.b, -0.5 * b * dt.c);
        }
    }
    a_out.resize(st.size(), st.size());
    a_out.setFromTriplets(trip.begin(), trip.end());
    a_out.makeCompressed();
}

// Cross-section current through each axial face: pi times the integral of the
// axial flux difference, evaluated with exactly the face formulas used in the
// species assembly so discrete conservation carries over.
inline std::vector<double> face_currents(const AxiMesh& mesh, const Stencil2D& st,
                                         const DimensionlessParams& params,
                                         const Eigen::VectorXd& phi,
                                         const Eigen::VectorXd& chi_p,
                                         const Eigen::VectorXd& chi_n) {
    const int nx = st.nx, nr = st.nr;
    std::vector<double> current(nx, 0.0);
    const auto tangent = [&](const Eigen::VectorXd& v, const TwoPoint& t) {
        return t.c * (v[t.a] - v[t.b]);
    };
    for (int i = 0; i < nx; ++i) {
        double total = 0.0;
        for (int j = 0; j <= nr; ++j) {
            const int left = st.id(i, j), right = st.id(i + 1, j);
            const TwoPoint dl = dxi_stencil(st, mesh.xi, i, j);
            const TwoPoint dr = dxi_stencil(st, mesh.xi, i + 1, j);
            const double rf = st.r_face[i], rpf = st.rp_face[i];
            {
                const double m = sg_mean(phi[left], phi[right], 1.0);
                const double grad = (chi_p[right] - chi_p[left]) / st.hx[i];
                const double cross = 0.5 * (tangent(chi_p, dl) + tangent(chi_p, dr));
                total -= params.kappa_p * m *
                         (rf * rf * st.ix[j] * grad - rf * rpf * st.jx[j] * cross);
            }
            {
                const double m = sg_mean(phi[left], phi[right], -1.0);
                const double grad = (chi_n[right] - chi_n[left]) / st.hx[i];
                const double cross = 0.5 * (tangent(chi_n, dl) + tangent(chi_n, dr));
                total += params.kappa_n * m *
                         (rf * rf * st.ix[j] * grad - rf * rpf * st.jx[j] * cross);
            }
        }
        current[i] = std::numbers::pi * total;
    }
    return current;
}

// Sparse LU with the symbolic analysis done once; the pattern of every system
// here is fixed by the mesh.
class CachedLu {
  public:
    Eigen::VectorXd solve(const SparseMat& a, const Eigen::VectorXd& b) {
        if (!analyzed_) {
            lu_.analyzePattern(a);
            analyzed_ = true;
        }
        lu_.factorize(a);
        if (lu_.info() != Eigen::Success)
            throw Error("sparse factorization failed");
        const Eigen::VectorXd x = lu_.solve(b);
        if (lu_.info() != Eigen::Success)
            throw Error("sparse solve failed");
        return x;
    }

  private:
    Eigen::SparseLU<SparseMat> lu_;
    bool analyzed_ = false;
};

// Damped Newton on the potential with frozen Slotboom densities sp, sn.
// Residual: L phi + wall - source(phi), with source also carrying the
// Dirichlet pinning through the operator's identity rows.
inline void poisson_newton_2d(const Stencil2D& st, const SparseMat& op,
                              const Eigen::VectorXd& wall, Eigen::VectorXd& phi,
                              const Eigen::VectorXd& sp, const Eigen::VectorXd& sn,
                              const DimensionlessParams& params, const Pnp2dOptions& opts,
                              CachedLu& lu) {
    const int nx = st.nx, nr = st.nr;
    const double inv_lsq = 1.0 / (params.lambda_big * params.lambda_big);
    Eigen::VectorXd vol(st.size());
    for (int i = 0; i <= nx; ++i)
        for (int j = 0; j <= nr; ++j)
            vol[st.id(i, j)] = (i == 0 || i == nx)
                ? 0.0
                : st.wx[i] * st.ix[j] * st.r_node[i] * st.r_node[i] * inv_lsq;

    const auto residual = [&](const Eigen::VectorXd& f, Eigen::VectorXd& out) {
        out = op * f + wall;
        double scale = wall.cwiseAbs().maxCoeff();
        for (int k = 0; k < st.size(); ++k) {
            const double src = vol[k] * (sn[k] * std::exp(f[k]) - sp[k] * std::exp(-f[k]));
            out[k] -= src;
            scale = std::max(scale, std::abs(src));
        }
        return scale;
    };

    Eigen::VectorXd res(st.size()), trial(st.size()), trial_res(st.size());
    double scale = residual(phi, res);
    double norm = res.cwiseAbs().maxCoeff();
    std::vector<double> history;
    SparseMat jac;
    for (int it = 0; it < opts.max_newton; ++it) {
        if (norm <= 1e-12 * (1.0 + scale)) return;
        jac = op;
        for (int k = 0; k < st.size(); ++k) {
            const double dsrc = vol[k] * (sn[k] * std::exp(phi[k]) + sp[k] * std::exp(-phi[k]));
            if (dsrc != 0.0) jac.coeffRef(k, k) -= dsrc;
        }
        const Eigen::VectorXd step = lu.solve(jac, -res);

        double t = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < opts.max_backtrack; ++bt) {
            trial = phi + t * step;
            if (trial.cwiseAbs().maxCoeff() <= 300.0) {
                const double trial_scale = residual(trial, trial_res);
                const double trial_norm = trial_res.cwiseAbs().maxCoeff();
                if (trial_norm <= (1.0 - 1e-4 * t) * norm) {
                    phi.swap(trial);
                    res.swap(trial_res);
                    norm = trial_norm;
                    scale = trial_scale;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        history.push_back(norm);
        if (!accepted)
            throw NoConvergence("potential update stalled", it + 1, norm, history);
    }
    if (norm > 1e-6 * (1.0 + scale))
        throw NoConvergence("potential update ran out of iterations",
                            opts.max_newton, norm, history);
}

inline Field2D gummel_solve_impl(const AxiMesh& mesh, const PoreScenario& sc,
                                 const DimensionlessParams& params, double v_applied,
                                 const Pnp2dOptions& opts, const Field2D* warm) {
    if (sc.boundary.conc_left_p_mol_l <= 0.0 || sc.boundary.conc_left_n_mol_l <= 0.0 ||
        sc.boundary.conc_right_p_mol_l <= 0.0 || sc.boundary.conc_right_n_mol_l <= 0.0)
        throw NonPositiveConcentration("bath concentrations must be > 0");
    const Stencil2D st = build_stencil(mesh, sc, params);
    const SparseMat op = build_poisson_operator(mesh, st, params);
    const int nx = st.nx, nr = st.nr;
    const int total = st.size();

    const double cbar = sc.electrolyte.conc_scale_mol_l;
    const double phi_l = opts.phi_gauge;
    const double phi_r = v_applied / params.thermal_voltage + opts.phi_gauge;
    const double p_left = sc.boundary.conc_left_p_mol_l / cbar;
    const double p_right = sc.boundary.conc_right_p_mol_l / cbar;
    const double n_left = sc.boundary.conc_left_n_mol_l / cbar;
    const double n_right = sc.boundary.conc_right_n_mol_l / cbar;

    // Wall flux plus Dirichlet pinning folded into one constant vector: the
    // identity rows of the operator see -phi_bc here.
    Eigen::VectorXd wall = Eigen::VectorXd::Zero(total);
    for (int i = 1; i < nx; ++i)
        for (int j = 0; j <= nr; ++j) wall[st.id(i, j)] = j == nr ? st.wall_source[i] : 0.0;
    for (int j = 0; j <= nr; ++j) {
        wall[st.id(0, j)] = -phi_l;
        wall[st.id(nx, j)] = -phi_r;
    }

    Eigen::VectorXd phi(total), p(total), n(total);
    if (warm && (warm->mesh.x != mesh.x || warm->mesh.xi != mesh.xi))
        throw GridMismatch("warm start uses a different mesh");
    if (warm) {
        for (int i = 0; i <= nx; ++i)
            for (int j = 0; j <= nr; ++j) {
                phi[st.id(i, j)] = warm->phi[i][j];
                p[st.id(i, j)] = warm->p[i][j];
                n[st.id(i, j)] = warm->n[i][j];
            }
    } else {
        for (int i = 0; i <= nx; ++i) {
            const double t = mesh.x[i];
            const double f = (1.0 - t) * phi_l + t * phi_r;
            const double pv = std::pow(p_left, 1.0 - t) * std::pow(p_right, t);
            const double nv = std::pow(n_left, 1.0 - t) * std::pow(n_right, t);
            for (int j = 0; j <= nr; ++j) {
                phi[st.id(i, j)] = f;
                p[st.id(i, j)] = pv;
                n[st.id(i, j)] = nv;
            }
        }
    }
    for (int j = 0; j <= nr; ++j) {
        phi[st.id(0, j)] = phi_l;
        phi[st.id(nx, j)] = phi_r;
        p[st.id(0, j)] = p_left;
        p[st.id(nx, j)] = p_right;
        n[st.id(0, j)] = n_left;
        n[st.id(nx, j)] = n_right;
    }

    CachedLu lu_pois, lu_p, lu_n;
    SparseMat a_sp;
    Eigen::VectorXd b_sp, sp(total), sn(total), phi_star, chi_p, chi_n;
    std::vector<double> history;
    double err = std::numeric_limits<double>::infinity();
    int m = 0;
    bool converged = false;
    while (m < opts.max_gummel) {
        for (int k = 0; k < total; ++k) {
            sp[k] = p[k] * std::exp(phi[k]);
            sn[k] = n[k] * std::exp(-phi[k]);
        }
        phi_star = phi;
        poisson_newton_2d(st, op, wall, phi_star, sp, sn, params, opts, lu_pois);
        Eigen::VectorXd dphi = phi_star - phi;
        if (dphi.cwiseAbs().maxCoeff() > opts.damp_threshold) dphi *= 0.5;
        phi += dphi;
        err = dphi.cwiseAbs().maxCoeff();

        assemble_species(mesh, st, params, phi, params.kappa_p, 1.0,
                         p_left * std::exp(phi_l), p_right * std::exp(phi_r), a_sp, b_sp);
        chi_p = lu_p.solve(a_sp, b_sp);
        assemble_species(mesh, st, params, phi, params.kappa_n, -1.0,
                         n_left * std::exp(-phi_l), n_right * std::exp(-phi_r), a_sp, b_sp);
        chi_n = lu_n.solve(a_sp, b_sp);
        for (int k = 0; k < total; ++k) {
            p[k] = chi_p[k] * std::exp(-phi[k]);
            n[k] = chi_n[k] * std::exp(phi[k]);
        }
        history.push_back(err);
        ++m;
        for (int k = 0; k < total; ++k)
            if (p[k] <= 0.0 || n[k] <= 0.0)
                throw NoConvergence("positivity lost during iteration", m, err, history);
        if (err < opts.tol) {
            converged = true;
            break;
        }
    }
    if (!converged) throw NoConvergence("alternating solver stalled", m, err, history);

    Field2D field;
    field.mesh = mesh;
    field.v_applied = v_applied;
    field.iterations = m;
    field.residual = err;
    field.phi.assign(nx + 1, std::vector<double>(nr + 1));
    field.n.assign(nx + 1, std::vector<double>(nr + 1));
    field.p.assign(nx + 1, std::vector<double>(nr + 1));
    for (int i = 0; i <= nx; ++i)
        for (int j = 0; j <= nr; ++j) {
            field.phi[i][j] = phi[st.id(i, j)];
            field.n[i][j] = n[st.id(i, j)];
            field.p[i][j] = p[st.id(i, j)];
        }
    field.face_x.resize(nx);
    for (int i = 0; i < nx; ++i) field.face_x[i] = 0.5 * (mesh.x[i] + mesh.x[i + 1]);
    field.current_profile = face_currents(mesh, st, params, phi, chi_p, chi_n);
    double acc = 0.0;
    for (double c : field.current_profile) acc += c;
    field.current_I = acc / static_cast<double>(field.current_profile.size());
    for (double c : field.current_profile)
        field.current_spread = std::max(field.current_spread, std::abs(c - field.current_I));
    return field;
}

} // namespace detail

// Alternating potential/species solve on a prebuilt mesh at one voltage.
inline Field2D gummel_solve(const AxiMesh& mesh, const PoreScenario& sc, double v_applied,
                            const Pnp2dOptions& opts = {}, const Field2D* warm = nullptr) {
    const DimensionlessParams params = nondimensionalize(sc);
    return detail::gummel_solve_impl(mesh, sc, params, v_applied, opts, warm);
}

// Cross-section current at the axial face nearest the requested station.
inline double current_2d(const Field2D& field, double x_station) {
    if (field.current_profile.empty())
        throw Error("field carries no current profile");
    check_unit_interval(x_station);
    std::size_t best = 0;
    double dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < field.face_x.size(); ++i) {
        const double d = std::abs(field.face_x[i] - x_station);
        if (d < dist) {
            dist = d;
            best = i;
        }
    }
    return field.current_profile[best];
}

// Mesh construction plus the same voltage-ramp escalation as the 1D solvers.
inline Field2D solve_pnp2d(const PoreScenario& sc, double v_applied,
                           const Pnp2dOptions& opts = {}) {
    const DimensionlessParams params = nondimensionalize(sc);
    const AxiMesh mesh = build_mesh(sc.geometry, opts.nx, opts.nr, opts.grading);
    try {
        return detail::gummel_solve_impl(mesh, sc, params, v_applied, opts, nullptr);
    } catch (const NoConvergence&) {
        if (!opts.continuation || v_applied == 0.0) throw;
    }
    const double full_step = 2.0 * params.thermal_voltage * (v_applied > 0 ? 1.0 : -1.0);
    const double min_step = std::abs(v_applied) * 1e-3;
    Field2D carry;
    bool have_carry = false;
    double v = 0.0;
    double step = full_step;
    while (v != v_applied) {
        double v_next = v + step;
        if ((v_applied > 0 && v_next > v_applied) || (v_applied < 0 && v_next < v_applied))
            v_next = v_applied;
        try {
            carry = detail::gummel_solve_impl(mesh, sc, params, v_next, opts,
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

} // namespace nanopnp
