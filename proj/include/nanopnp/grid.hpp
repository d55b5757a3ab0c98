#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "nanopnp/errors.hpp"
#include "nanopnp/scenario.hpp"

namespace nanopnp {

// Radial grid on [0,1], geometrically graded toward the wall (xi = 1) so the
// first cell off the wall resolves thin charge layers. ratio = 1 gives a
// uniform grid. Nodes ascend; node[0] = 0, node[n] = 1 exactly.
inline std::vector<double> graded_radial_nodes(int n_intervals, double ratio) {
    if (n_intervals < 4) throw NonPositiveInput("radial grid needs >= 4 intervals");
    if (ratio < 1.0) throw NonPositiveInput("radial grading ratio must be >= 1");
    std::vector<double> xi(static_cast<std::size_t>(n_intervals) + 1);
    if (ratio == 1.0) {
        for (int i = 0; i <= n_intervals; ++i)
            xi[i] = static_cast<double>(i) / n_intervals;
        xi[n_intervals] = 1.0;
        return xi;
    }
    // Wall cell h satisfies h * (ratio^n - 1)/(ratio - 1) = 1.
    const double h_wall = (ratio - 1.0) / (std::pow(ratio, n_intervals) - 1.0);
    xi[n_intervals] = 1.0;
    double acc = 0.0, h = h_wall;
    for (int k = 1; k <= n_intervals; ++k) {
        acc += h;
        xi[n_intervals - k] = 1.0 - acc;
        h *= ratio;
    }
    xi[0] = 0.0;
    std::sort(xi.begin(), xi.end());
    return xi;
}

// Wall cell size of the graded grid above.
inline double graded_wall_cell(int n_intervals, double ratio) {
    if (ratio == 1.0) return 1.0 / n_intervals;
    return (ratio - 1.0) / (std::pow(ratio, n_intervals) - 1.0);
}

// Smallest ratio >= 1 whose wall cell is <= target (given n intervals).
// Bisection; the wall cell shrinks monotonically with the ratio.
inline double ratio_for_wall_cell(int n_intervals, double target) {
    if (target <= 0.0) throw NonPositiveInput("wall cell target must be > 0");
    if (graded_wall_cell(n_intervals, 1.0) <= target) return 1.0;
    double lo = 1.0, hi = 2.0;
    while (graded_wall_cell(n_intervals, hi) > target) {
        hi *= 2.0;
        if (hi > 1e3) throw DegenerateGeometry("radial grading ratio out of range");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (graded_wall_cell(n_intervals, mid) > target ? lo : hi) = mid;
    }
    return hi;
}

// Axial grid on [0,1]. Uniform by default; the graded variant concentrates
// nodes where the pore is narrow (node density proportional to 1/R(x)^strength).
struct AxialGrid {
    std::vector<double> x;

    int intervals() const { return static_cast<int>(x.size()) - 1; }

    static AxialGrid uniform(int n_intervals) {
        if (n_intervals < 8) throw NonPositiveInput("axial grid needs >= 8 intervals");
        AxialGrid g;
        g.x.resize(static_cast<std::size_t>(n_intervals) + 1);
        for (int i = 0; i <= n_intervals; ++i)
            g.x[i] = static_cast<double>(i) / n_intervals;
        g.x.back() = 1.0;
        return g;
    }

    static AxialGrid graded_by_radius(const PoreGeometry& geom, int n_intervals,
                                      double strength = 1.0) {
        if (n_intervals < 8) throw NonPositiveInput("axial grid needs >= 8 intervals");
        const int fine = 8192;
        std::vector<double> cum(fine + 1, 0.0);
        double prev = std::pow(eval_radius(geom, 0.0), -strength);
        for (int i = 1; i <= fine; ++i) {
            const double xi = static_cast<double>(i) / fine;
            const double w = std::pow(eval_radius(geom, xi), -strength);
            cum[i] = cum[i - 1] + 0.5 * (prev + w) / fine;
            prev = w;
        }
        AxialGrid g;
        g.x.resize(static_cast<std::size_t>(n_intervals) + 1);
        g.x[0] = 0.0;
        int j = 0;
        for (int k = 1; k < n_intervals; ++k) {
            const double target = cum[fine] * k / n_intervals;
            while (j < fine && cum[j + 1] < target) ++j;
            const double t = (target - cum[j]) / (cum[j + 1] - cum[j]);
            g.x[k] = (j + t) / fine;
        }
        g.x[n_intervals] = 1.0;
        return g;
    }
};

} // namespace nanopnp
