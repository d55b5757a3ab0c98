#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace nanopnp {

// Base for everything this library throws deliberately.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A quantity that must be strictly positive was not (concentration, radius,
// diffusivity, grid size, ...).
struct NonPositiveInput : Error {
    using Error::Error;
};

// Axial or radial coordinate outside the normalized domain.
struct OutOfDomain : Error {
    using Error::Error;
};

// Q*S <= 0 while forming the local Debye parameter.
struct NonPositiveConcentration : Error {
    using Error::Error;
};

// Closed-form expression evaluated outside its validity domain
// (e.g. the large-beta G requested at beta <= 0).
struct DomainError : Error {
    using Error::Error;
};

// g2 closure produced a non-positive moment.
struct NonPositiveG : Error {
    using Error::Error;
};

// Nonlinear iteration ran out of iterations. Carries the last residual and,
// where the solver keeps one, the residual history for post-mortems.
struct NoConvergence : Error {
    int iterations = 0;
    double residual = 0.0;
    std::vector<double> history;

    NoConvergence(const std::string& msg, int iters, double res,
                  std::vector<double> hist = {})
        : Error(msg + " (iterations=" + std::to_string(iters) +
                ", residual=" + std::to_string(res) + ")"),
          iterations(iters), residual(res), history(std::move(hist)) {}
};

// Two data sets that must share a grid do not.
struct GridMismatch : Error {
    using Error::Error;
};

// Geometry that cannot be meshed sensibly (non-positive or collapsing radius).
struct DegenerateGeometry : Error {
    using Error::Error;
};

// Scenario file problems: syntax, unknown keys, missing required values.
struct ConfigError : Error {
    using Error::Error;
};

// Filesystem trouble while reading or writing run products.
struct IoError : Error {
    using Error::Error;
};

} // namespace nanopnp
