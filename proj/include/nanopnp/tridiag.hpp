#pragma once

#include <cstddef>
#include <vector>

#include "nanopnp/errors.hpp"

namespace nanopnp {

// Thomas algorithm for a(i) x(i-1) + b(i) x(i) + c(i) x(i+1) = d(i).
// a[0] and c[n-1] are ignored. Overwrites nothing; returns the solution.
// No pivoting; callers assemble diagonally dominant systems.
inline std::vector<double> solve_tridiagonal(const std::vector<double>& a,
                                             const std::vector<double>& b,
                                             const std::vector<double>& c,
                                             const std::vector<double>& d) {
    const std::size_t n = b.size();
    if (a.size() != n || c.size() != n || d.size() != n)
        throw GridMismatch("tridiagonal bands must have equal length");
    if (n == 0) return {};
    std::vector<double> cp(n), dp(n), x(n);
    double beta = b[0];
    if (beta == 0.0) throw Error("tridiagonal solve hit a zero pivot");
    cp[0] = c[0] / beta;
    dp[0] = d[0] / beta;
    for (std::size_t i = 1; i < n; ++i) {
        beta = b[i] - a[i] * cp[i - 1];
        if (beta == 0.0) throw Error("tridiagonal solve hit a zero pivot");
        cp[i] = c[i] / beta;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / beta;
    }
    x[n - 1] = dp[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = dp[i] - cp[i] * x[i + 1];
    return x;
}

// Block-Thomas for 2x2 blocks: A(i) X(i-1) + B(i) X(i) + C(i) X(i+1) = D(i),
// with each block stored row-major as double[4] and X(i), D(i) as double[2].
// Used by the electrochemical-potential formulation's Newton step.
struct Block2 {
    double m[4] = {0, 0, 0, 0}; // [0]=a11 [1]=a12 [2]=a21 [3]=a22
};

inline Block2 block_mul(const Block2& x, const Block2& y) {
    Block2 r;
    r.m[0] = x.m[0] * y.m[0] + x.m[1] * y.m[2];
    r.m[1] = x.m[0] * y.m[1] + x.m[1] * y.m[3];
    r.m[2] = x.m[2] * y.m[0] + x.m[3] * y.m[2];
    r.m[3] = x.m[2] * y.m[1] + x.m[3] * y.m[3];
    return r;
}

inline Block2 block_inv(const Block2& x) {
    const double det = x.m[0] * x.m[3] - x.m[1] * x.m[2];
    if (det == 0.0) throw Error("2x2 block inversion hit a singular block");
    Block2 r;
    r.m[0] = x.m[3] / det;
    r.m[1] = -x.m[1] / det;
    r.m[2] = -x.m[2] / det;
    r.m[3] = x.m[0] / det;
    return r;
}

inline void block_vec(const Block2& x, const double v[2], double out[2]) {
    out[0] = x.m[0] * v[0] + x.m[1] * v[1];
    out[1] = x.m[2] * v[0] + x.m[3] * v[1];
}

inline std::vector<double> solve_block_tridiagonal_2x2(std::vector<Block2> a,
                                                       std::vector<Block2> b,
                                                       std::vector<Block2> c,
                                                       std::vector<double> d) {
    const std::size_t n = b.size();
    if (a.size() != n || c.size() != n || d.size() != 2 * n)
        throw GridMismatch("block-tridiagonal bands must have matching lengths");
    if (n == 0) return {};
    // Forward elimination.
    for (std::size_t i = 1; i < n; ++i) {
        const Block2 factor = block_mul(a[i], block_inv(b[i - 1]));
        b[i].m[0] -= factor.m[0] * c[i - 1].m[0] + factor.m[1] * c[i - 1].m[2];
        b[i].m[1] -= factor.m[0] * c[i - 1].m[1] + factor.m[1] * c[i - 1].m[3];
        b[i].m[2] -= factor.m[2] * c[i - 1].m[0] + factor.m[3] * c[i - 1].m[2];
        b[i].m[3] -= factor.m[2] * c[i - 1].m[1] + factor.m[3] * c[i - 1].m[3];
        double fd[2];
        block_vec(factor, &d[2 * (i - 1)], fd);
        d[2 * i] -= fd[0];
        d[2 * i + 1] -= fd[1];
    }
    // Back substitution.
    std::vector<double> x(2 * n);
    {
        const Block2 binv = block_inv(b[n - 1]);
        block_vec(binv, &d[2 * (n - 1)], &x[2 * (n - 1)]);
    }
    for (std::size_t i = n - 1; i-- > 0;) {
        double rhs[2] = {d[2 * i] - (c[i].m[0] * x[2 * (i + 1)] + c[i].m[1] * x[2 * (i + 1) + 1]),
                         d[2 * i + 1] - (c[i].m[2] * x[2 * (i + 1)] + c[i].m[3] * x[2 * (i + 1) + 1])};
        const Block2 binv = block_inv(b[i]);
        block_vec(binv, rhs, &x[2 * i]);
    }
    return x;
}

} // namespace nanopnp
