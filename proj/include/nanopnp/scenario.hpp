#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nanopnp/constants.hpp"
#include "nanopnp/errors.hpp"

namespace nanopnp {

// ---------------------------------------------------------------------------
// Scenario value types. Inputs are in bench units (nm, mol/L, V, e/nm^2);
// everything downstream of nondimensionalize() is dimensionless.
// ---------------------------------------------------------------------------

struct Electrolyte {
    double diff_p = 1.33e-9;      // m^2/s, positive carrier
    double diff_n = 0.79e-9;      // m^2/s, negative carrier
    double diff_ref = 1.0e-9;     // m^2/s, diffusivity scale Dbar
    double conc_scale_mol_l = 1.0;    // cbar, mol/L
    double sigma_scale_e_nm2 = 1.0;   // sigma_bar, e/nm^2

    double conc_scale_mol_m3() const { return conc_scale_mol_l * 1000.0; }
};

// Axisymmetric pore wall r = R(x), x normalized to [0,1].
// Trumpet: symmetric quadratic, R(0)=R(1)=end, R(1/2)=throat.
// Conical: linear from tip (x=0) to base (x=1).
// Cylindrical: constant.
// Piecewise: linear interpolation of an (x_nm, r_nm) table spanning [0, L].
struct TrumpetProfile {
    double end_radius_nm = 10.0;
    double throat_radius_nm = 1.5;
};
struct ConicalProfile {
    double tip_radius_nm = 1.5;
    double base_radius_nm = 10.0;
};
struct CylindricalProfile {
    double radius_nm = 5.0;
};
struct PiecewiseProfile {
    std::vector<std::pair<double, double>> points_nm; // (x_nm, r_nm), x ascending
};

struct PoreGeometry {
    double length_nm = 1000.0;      // L
    double radius_scale_nm = 1.0;   // R0
    std::variant<TrumpetProfile, ConicalProfile, CylindricalProfile, PiecewiseProfile>
        profile = TrumpetProfile{};
};

// Piecewise-constant wall charge: sigma_e_nm2 on [support_min, support_max], 0 outside.
struct SurfaceChargeProfile {
    double sigma_e_nm2 = 0.0;
    double support_min_nm = 0.0;
    double support_max_nm = 0.0;
};

struct BoundaryConditions {
    double voltage = 0.0;           // V, applied at x=1; x=0 grounded
    double conc_left_p_mol_l = 0.1;
    double conc_left_n_mol_l = 0.1;
    double conc_right_p_mol_l = 0.1;
    double conc_right_n_mol_l = 0.1;
};

struct PoreScenario {
    std::string name = "scenario";
    PhysicalConstants constants;
    Electrolyte electrolyte;
    PoreGeometry geometry;
    SurfaceChargeProfile surface_charge;
    BoundaryConditions boundary;
    std::optional<double> upsilon_override; // diagnostic pin, see DimensionlessParams
};

// ---------------------------------------------------------------------------
// Geometry evaluation. Radii in units of R0, x in [0,1], derivative d(R/R0)/dx.
// ---------------------------------------------------------------------------

inline void check_unit_interval(double x) {
    if (x < -1e-12 || x > 1.0 + 1e-12)
        throw OutOfDomain("axial coordinate " + std::to_string(x) + " outside [0,1]");
}

inline double eval_radius_nm(const PoreGeometry& g, double x) {
    check_unit_interval(x);
    x = std::min(1.0, std::max(0.0, x));
    if (const auto* t = std::get_if<TrumpetProfile>(&g.profile)) {
        return t->end_radius_nm - 4.0 * (t->end_radius_nm - t->throat_radius_nm) * x * (1.0 - x);
    }
    if (const auto* c = std::get_if<ConicalProfile>(&g.profile)) {
        return c->tip_radius_nm + (c->base_radius_nm - c->tip_radius_nm) * x;
    }
    if (const auto* c = std::get_if<CylindricalProfile>(&g.profile)) {
        return c->radius_nm;
    }
    const auto& pts = std::get<PiecewiseProfile>(g.profile).points_nm;
    if (pts.size() < 2) throw DegenerateGeometry("piecewise profile needs >= 2 points");
    const double x_nm = x * g.length_nm;
    if (x_nm <= pts.front().first) return pts.front().second;
    if (x_nm >= pts.back().first) return pts.back().second;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (x_nm <= pts[i].first) {
            const double t = (x_nm - pts[i - 1].first) / (pts[i].first - pts[i - 1].first);
            return pts[i - 1].second + t * (pts[i].second - pts[i - 1].second);
        }
    }
    return pts.back().second;
}

inline double eval_radius(const PoreGeometry& g, double x) {
    return eval_radius_nm(g, x) / g.radius_scale_nm;
}

// dR/dx with R in R0 units and x in [0,1] units. Piecewise profiles use the
// slope of the containing segment (left-continuous at interior knots).
inline double eval_radius_derivative(const PoreGeometry& g, double x) {
    check_unit_interval(x);
    x = std::min(1.0, std::max(0.0, x));
    const double r0 = g.radius_scale_nm;
    if (const auto* t = std::get_if<TrumpetProfile>(&g.profile)) {
        return -4.0 * (t->end_radius_nm - t->throat_radius_nm) * (1.0 - 2.0 * x) / r0;
    }
    if (const auto* c = std::get_if<ConicalProfile>(&g.profile)) {
        return (c->base_radius_nm - c->tip_radius_nm) / r0;
    }
    if (std::get_if<CylindricalProfile>(&g.profile)) {
        return 0.0;
    }
    const auto& pts = std::get<PiecewiseProfile>(g.profile).points_nm;
    if (pts.size() < 2) throw DegenerateGeometry("piecewise profile needs >= 2 points");
    const double x_nm = x * g.length_nm;
    std::size_t i = 1;
    while (i + 1 < pts.size() && x_nm > pts[i].first) ++i;
    const double slope_nm = (pts[i].second - pts[i - 1].second) / (pts[i].first - pts[i - 1].first);
    return slope_nm * g.length_nm / r0;
}

inline void validate_geometry(const PoreGeometry& g) {
    if (g.length_nm <= 0.0) throw NonPositiveInput("pore length must be > 0");
    if (g.radius_scale_nm <= 0.0) throw NonPositiveInput("radius scale must be > 0");
    if (const auto* p = std::get_if<PiecewiseProfile>(&g.profile)) {
        if (p->points_nm.size() < 2)
            throw DegenerateGeometry("piecewise profile needs >= 2 points");
        for (std::size_t i = 1; i < p->points_nm.size(); ++i)
            if (p->points_nm[i].first <= p->points_nm[i - 1].first)
                throw DegenerateGeometry("piecewise profile x-values must be strictly increasing");
    }
    // R(x) > 0 everywhere we will ever sample it.
    for (int i = 0; i <= 2000; ++i) {
        const double x = static_cast<double>(i) / 2000.0;
        if (eval_radius_nm(g, x) <= 0.0)
            throw DegenerateGeometry("pore radius must stay positive on [0,1]");
    }
}

// Dimensionless wall charge sigma(x)/sigma_bar at normalized x.
inline double eval_sigma(const SurfaceChargeProfile& s, const PoreGeometry& g,
                         const Electrolyte& e, double x) {
    check_unit_interval(x);
    if (s.sigma_e_nm2 == 0.0) return 0.0;
    const double x_nm = x * g.length_nm;
    if (x_nm < s.support_min_nm || x_nm > s.support_max_nm) return 0.0;
    return s.sigma_e_nm2 / e.sigma_scale_e_nm2;
}

// Average of the dimensionless wall charge over [xa, xb] (normalized x).
// Exact for the piecewise-constant profile; used by wall-flux quadratures.
inline double average_sigma(const SurfaceChargeProfile& s, const PoreGeometry& g,
                            const Electrolyte& e, double xa, double xb) {
    if (xb <= xa) return eval_sigma(s, g, e, xa);
    if (s.sigma_e_nm2 == 0.0) return 0.0;
    const double a_nm = xa * g.length_nm, b_nm = xb * g.length_nm;
    const double lo = std::max(a_nm, s.support_min_nm);
    const double hi = std::min(b_nm, s.support_max_nm);
    if (hi <= lo) return 0.0;
    return (hi - lo) / (b_nm - a_nm) * s.sigma_e_nm2 / e.sigma_scale_e_nm2;
}

// ---------------------------------------------------------------------------
// Nondimensionalization.
// ---------------------------------------------------------------------------

struct DimensionlessParams {
    double delta = 0.0;        // R0/L
    double lambda_big = 0.0;   // Lambda = L_D/R0
    double upsilon = 0.0;      // R0 sigma_bar / (eps V_T)
    double kappa_p = 0.0;      // D_p/Dbar
    double kappa_n = 0.0;      // D_n/Dbar
    double debye_length_m = 0.0;
    double thermal_voltage = 0.0;     // V, the one used for scaling
    double thermal_voltage_kT = 0.0;  // V, k_B T / e for reference
    double current_scale = 0.0;       // A per unit dimensionless current
    bool upsilon_override_mismatch = false; // pinned Upsilon off by >1%

    double phi_right(const BoundaryConditions& bc) const {
        return bc.voltage / thermal_voltage;
    }
};

inline DimensionlessParams nondimensionalize(const PoreScenario& sc) {
    const auto& c = sc.constants;
    const auto& e = sc.electrolyte;
    const auto& g = sc.geometry;
    if (e.diff_p <= 0.0 || e.diff_n <= 0.0 || e.diff_ref <= 0.0)
        throw NonPositiveInput("diffusivities must be > 0");
    if (e.conc_scale_mol_l <= 0.0) throw NonPositiveInput("concentration scale must be > 0");
    if (e.sigma_scale_e_nm2 <= 0.0) throw NonPositiveInput("surface-charge scale must be > 0");
    validate_geometry(g);

    DimensionlessParams p;
    p.thermal_voltage = c.thermal_voltage > 0.0 ? c.thermal_voltage : c.thermal_voltage_from_kT();
    p.thermal_voltage_kT = c.thermal_voltage_from_kT();

    const double r0 = g.radius_scale_nm * 1e-9;     // m
    const double length = g.length_nm * 1e-9;       // m
    const double eps = c.permittivity();
    const double cbar = e.conc_scale_mol_m3();      // mol/m^3
    const double sigma_bar = e.sigma_scale_e_nm2 * c.charge_per_nm2(); // C/m^2

    p.delta = r0 / length;
    p.debye_length_m = std::sqrt(eps * p.thermal_voltage / (cbar * c.faraday()));
    p.lambda_big = p.debye_length_m / r0;
    p.upsilon = r0 * sigma_bar / (eps * p.thermal_voltage);
    p.kappa_p = e.diff_p / e.diff_ref;
    p.kappa_n = e.diff_n / e.diff_ref;
    p.current_scale = c.faraday() * e.diff_ref * cbar * r0 * r0 / length;

    if (sc.upsilon_override) {
        const double rel = std::abs(*sc.upsilon_override - p.upsilon) /
                           std::max(std::abs(p.upsilon), 1e-300);
        p.upsilon_override_mismatch = rel > 0.01;
    }
    return p;
}

// Local wall-charge and screening parameters at a cross-section:
//   beta   = Upsilon * sigma * R
//   lambda = Lambda / (R * (Q S)^(1/4))
// QS is the product of the two reduced concentrations there.
inline std::pair<double, double> local_beta_lambda(const DimensionlessParams& p,
                                                   double sigma, double radius,
                                                   double qs) {
    if (radius <= 0.0) throw NonPositiveInput("radius must be > 0");
    if (qs <= 0.0)
        throw NonPositiveConcentration("Q*S must be > 0 to form the local Debye parameter");
    const double beta = p.upsilon * sigma * radius;
    const double lambda = p.lambda_big / (radius * std::pow(qs, 0.25));
    return {beta, lambda};
}

} // namespace nanopnp
