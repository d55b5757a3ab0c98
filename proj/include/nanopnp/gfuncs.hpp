#pragma once

#include <cmath>

#include "nanopnp/errors.hpp"
#include "nanopnp/radial.hpp"

namespace nanopnp {

// Closed-form approximations of the cross-section moments
//   g1 = int_0^1 xi e^{-psi} dxi,   g2 = int_0^1 xi e^{+psi} dxi,
// as functions of the screening parameter lambda and wall charge beta,
// plus the smooth blend between the two asymptotic regimes and the exact
// closure g2 = g1 + lambda^2 beta.

// Strong-charge branch, lambda = O(1), beta large. Singular as lambda -> 0.
inline double g1_large(double lambda, double beta) {
    if (beta <= 0.0) throw DomainError("strong-charge g1 needs beta > 0");
    if (lambda <= 0.0) throw NonPositiveInput("lambda must be > 0");
    return (beta * beta + 12.0 * beta + 48.0) / (beta * (beta + 4.0)) /
           (48.0 * lambda * lambda);
}

// Thin-layer branch, lambda << 1; depends on beta through B = lambda*beta and
// is well defined for either sign of B (the mirror map g1(-B) = g2(B) is
// built into the algebra).
inline double g1_small(double lambda, double beta) {
    if (lambda <= 0.0) throw NonPositiveInput("lambda must be > 0");
    const double cap_b = lambda * beta;
    const double s8 = 2.0 * std::sqrt(2.0);
    return 0.5 - lambda * s8 * cap_b / (std::sqrt(8.0 + cap_b * cap_b) + s8 + cap_b);
}

inline double g2_small(double lambda, double beta) {
    if (lambda <= 0.0) throw NonPositiveInput("lambda must be > 0");
    const double cap_b = lambda * beta;
    const double s8 = 2.0 * std::sqrt(2.0);
    return 0.5 + lambda * s8 * cap_b / (std::sqrt(8.0 + cap_b * cap_b) + s8 - cap_b);
}

// Where the thin-layer branch hands over to the strong-charge branch.
inline double lambda_switch(double beta) {
    if (beta <= 0.0) throw DomainError("switch location needs beta > 0");
    return 0.276 + 0.9 / beta;
}

inline double switching_weight(double lambda, double beta) {
    if (lambda <= 0.0) throw NonPositiveInput("lambda must be > 0");
    return 0.5 * (1.0 + std::tanh(12.0 * (lambda - lambda_switch(beta))));
}

// Uniformly valid blend. The strong-charge branch is frozen at lambda = 0.1
// below that point to cut off its 1/lambda^2 growth.
inline double g1_smooth(double lambda, double beta) {
    if (beta <= 0.0) throw DomainError("smoothed g1 needs beta > 0");
    if (lambda <= 0.0) throw NonPositiveInput("lambda must be > 0");
    const double sw = switching_weight(lambda, beta);
    const double large = g1_large(std::max(lambda, 0.1), beta);
    return sw * large + (1.0 - sw) * g1_small(lambda, beta);
}

// Exact moment identity; the only route to g2 used by the transport solvers.
inline double g2_from_g1(double g1, double lambda, double beta) {
    if (g1 <= 0.0) throw NonPositiveG("g1 must be > 0");
    if (lambda <= 0.0) throw NonPositiveInput("lambda must be > 0");
    const double g2 = g1 + lambda * lambda * beta;
    if (g2 <= 0.0)
        throw NonPositiveG("g2 closure non-positive (strongly negative beta with tiny g1)");
    return g2;
}

enum class GMode { Smoothed, LargeBeta, SmallLambda, NumericOracle };
enum class GRegime { Trivial, Smoothed, LargeBeta, SmallLambda, NumericOracle };

struct GEval {
    double g1 = 0.5;
    double g2 = 0.5;
    GRegime regime = GRegime::Trivial;
};

struct GOracleOptions {
    int n_intervals = 384;
    double tol = 1e-10;
};

// Moment pair for any sign of beta. Negative wall charge maps through the
// mirror psi -> -psi: the depleted moment of the mirrored problem is this
// problem's enhanced one, and the identity fixes the other.
inline GEval eval_g(double lambda, double beta, GMode mode = GMode::Smoothed,
                    const GOracleOptions& oracle = {}) {
    if (lambda <= 0.0) throw NonPositiveInput("lambda must be > 0");
    GEval out;
    if (beta == 0.0) return out;

    const double mag = std::abs(beta);
    double depleted; // e^{-psi} moment of the |beta| problem
    switch (mode) {
        case GMode::Smoothed:
            depleted = g1_smooth(lambda, mag);
            out.regime = GRegime::Smoothed;
            break;
        case GMode::LargeBeta:
            depleted = g1_large(lambda, mag);
            out.regime = GRegime::LargeBeta;
            break;
        case GMode::SmallLambda:
            depleted = g1_small(lambda, mag);
            out.regime = GRegime::SmallLambda;
            break;
        case GMode::NumericOracle: {
            RadialProblem prob;
            prob.lambda = lambda;
            prob.beta = mag;
            prob.n_intervals = oracle.n_intervals;
            prob.tol = oracle.tol;
            depleted = solve_psi(prob).g1;
            out.regime = GRegime::NumericOracle;
            break;
        }
        default:
            throw Error("unknown G evaluation mode");
    }
    if (beta > 0.0) {
        out.g1 = depleted;
        out.g2 = g2_from_g1(depleted, lambda, beta);
    } else {
        out.g2 = depleted;
        out.g1 = depleted + lambda * lambda * mag; // g1 - g2 = lambda^2 |beta|
    }
    return out;
}

} // namespace nanopnp
