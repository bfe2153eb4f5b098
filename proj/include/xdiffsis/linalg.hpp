#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"

namespace xdiffsis {

/// Tridiagonal n x n system; sub[0] and super[n-1] are unused.
struct TridiagonalSystem {
    std::vector<double> sub, diag, super;

    explicit TridiagonalSystem(std::size_t n) : sub(n, 0.0), diag(n, 0.0), super(n, 0.0) {}
    std::size_t size() const { return diag.size(); }
};

/// Thomas algorithm. No pivoting; every system assembled in this project is
/// strictly diagonally dominant or a small symmetric shift of one.
inline Field solve_tridiagonal(const TridiagonalSystem& m, const Field& rhs) {
    const std::size_t n = m.size();
    if (rhs.size() != n) throw InvalidInput("solve_tridiagonal: rhs size mismatch");
    Field c(n), d(n), x(n);
    double piv = m.diag[0];
    if (piv == 0.0) throw InvalidInput("solve_tridiagonal: zero pivot at row 0");
    c[0] = m.super[0] / piv;
    d[0] = rhs[0] / piv;
    for (std::size_t i = 1; i < n; ++i) {
        piv = m.diag[i] - m.sub[i] * c[i - 1];
        if (piv == 0.0) throw InvalidInput("solve_tridiagonal: zero pivot");
        c[i] = m.super[i] / piv;
        d[i] = (rhs[i] - m.sub[i] * d[i - 1]) / piv;
    }
    x[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
    return x;
}

inline Field apply_tridiagonal(const TridiagonalSystem& m, const Field& v) {
    const std::size_t n = m.size();
    Field out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = m.diag[i] * v[i];
        if (i > 0) s += m.sub[i] * v[i - 1];
        if (i + 1 < n) s += m.super[i] * v[i + 1];
        out[i] = s;
    }
    return out;
}

/// Dense LU with partial pivoting, row-major storage. Used by the coupled
/// steady-state Newton solves (2n unknowns, desk scale).
struct DenseLU {
    std::vector<double> a; // factored in place
    std::vector<int> piv;
    std::size_t n = 0;
};

inline DenseLU lu_factor(std::vector<double> a, std::size_t n) {
    DenseLU lu;
    lu.a = std::move(a);
    lu.piv.resize(n);
    lu.n = n;
    auto& m = lu.a;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        double best = std::abs(m[k * n + k]);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double v = std::abs(m[i * n + k]);
            if (v > best) { best = v; p = i; }
        }
        if (best == 0.0) throw InvalidInput("lu_factor: singular matrix");
        lu.piv[k] = static_cast<int>(p);
        if (p != k)
            for (std::size_t j = 0; j < n; ++j) std::swap(m[k * n + j], m[p * n + j]);
        const double d = m[k * n + k];
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = m[i * n + k] / d;
            m[i * n + k] = f;
            if (f != 0.0)
                for (std::size_t j = k + 1; j < n; ++j) m[i * n + j] -= f * m[k * n + j];
        }
    }
    return lu;
}

inline void lu_solve(const DenseLU& lu, std::vector<double>& b) {
    const std::size_t n = lu.n;
    const auto& m = lu.a;
    // The factorization swaps whole rows, multipliers included, so the
    // permutation must be applied to b in full before the triangular solves.
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t p = static_cast<std::size_t>(lu.piv[k]);
        if (p != k) std::swap(b[k], b[p]);
    }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = k + 1; i < n; ++i) b[i] -= m[i * n + k] * b[k];
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= m[i * n + j] * b[j];
        b[i] = s / m[i * n + i];
    }
}

} // namespace xdiffsis
