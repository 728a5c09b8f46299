#pragma once

#include "setdist/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace setdist {

// Small dense symmetric kernels for Gram systems (basis sizes are tiny, at
// most a few dozen). Row-major storage.

struct DenseMatrix {
    std::size_t n = 0;
    std::vector<double> a; // n*n, row-major

    DenseMatrix() = default;
    explicit DenseMatrix(std::size_t n_) : n(n_), a(n_ * n_, 0.0) {}
    double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

/// Cholesky factorization A = L L^T (lower factor returned in place of A's
/// lower triangle). Returns false if a pivot is not strictly positive.
inline bool cholesky_factor(DenseMatrix& m) {
    const std::size_t n = m.n;
    for (std::size_t j = 0; j < n; ++j) {
        double d = m(j, j);
        for (std::size_t k = 0; k < j; ++k)
            d -= m(j, k) * m(j, k);
        if (!(d > 0.0))
            return false;
        m(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = m(i, j);
            for (std::size_t k = 0; k < j; ++k)
                s -= m(i, k) * m(j, k);
            m(i, j) = s / m(j, j);
        }
    }
    return true;
}

inline void cholesky_solve_inplace(const DenseMatrix& l, std::vector<double>& x) {
    const std::size_t n = l.n;
    for (std::size_t i = 0; i < n; ++i) {
        double s = x[i];
        for (std::size_t k = 0; k < i; ++k)
            s -= l(i, k) * x[k];
        x[i] = s / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = x[ii];
        for (std::size_t k = ii + 1; k < n; ++k)
            s -= l(k, ii) * x[k];
        x[ii] = s / l(ii, ii);
    }
}

/// SPD solve with diagonal jitter fallback: if the plain factorization fails,
/// retry with jitter*tr(A)/n added to the diagonal (a few escalations).
inline std::vector<double> spd_solve(DenseMatrix a, std::vector<double> rhs,
                                     double jitter = 1e-12) {
    const std::size_t n = a.n;
    DenseMatrix work = a;
    if (!cholesky_factor(work)) {
        double tr = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            tr += a(i, i);
        double eps = jitter * (tr > 0.0 ? tr / static_cast<double>(n) : 1.0);
        bool ok = false;
        for (int attempt = 0; attempt < 6 && !ok; ++attempt, eps *= 100.0) {
            work = a;
            for (std::size_t i = 0; i < n; ++i)
                work(i, i) += eps;
            ok = cholesky_factor(work);
        }
        if (!ok)
            throw ConditionError("spd_solve: matrix not positive definite even with jitter");
    }
    cholesky_solve_inplace(work, rhs);
    return rhs;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
inline std::vector<double> symmetric_eigenvalues(DenseMatrix m, int max_sweeps = 64) {
    const std::size_t n = m.n;
    if (n == 0) return {};
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                off += m(i, j) * m(i, j);
        if (off < 1e-30)
            break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = m(p, q);
                if (apq == 0.0) continue;
                const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = m(k, p), akq = m(k, q);
                    m(k, p) = c * akp - s * akq;
                    m(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = m(p, k), aqk = m(q, k);
                    m(p, k) = c * apk - s * aqk;
                    m(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i)
        ev[i] = m(i, i);
    return ev;
}

/// 2-norm condition number of a symmetric PSD matrix (|lambda|_max / |lambda|_min).
inline double symmetric_condition(const DenseMatrix& m) {
    auto ev = symmetric_eigenvalues(m);
    double lo = std::abs(ev[0]), hi = std::abs(ev[0]);
    for (double e : ev) {
        lo = std::min(lo, std::abs(e));
        hi = std::max(hi, std::abs(e));
    }
    if (lo == 0.0)
        return std::numeric_limits<double>::infinity();
    return hi / lo;
}

/// Largest eigenvalue of R C R^T where G = R^T R (Cholesky of G). Used for
/// operator norms of finite-rank maps expressed through Gram matrices.
inline double generalized_max_eigenvalue(const DenseMatrix& c, DenseMatrix g) {
    const std::size_t n = g.n;
    if (!cholesky_factor(g))
        throw ConditionError("generalized_max_eigenvalue: Gram matrix not SPD");
    // B = R C R^T where R is the upper factor, i.e. R = L^T with g holding L.
    DenseMatrix b(n);
    // tmp = C * L  (column k of tmp uses lower-triangular L)
    DenseMatrix tmp(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
            double s = 0.0;
            for (std::size_t j = k; j < n; ++j)
                s += c(i, j) * g(j, k);
            tmp(i, k) = s;
        }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
            double s = 0.0;
            for (std::size_t j = i; j < n; ++j)
                s += g(j, i) * tmp(j, k);
            b(i, k) = s;
        }
    auto ev = symmetric_eigenvalues(b);
    double hi = ev.empty() ? 0.0 : ev[0];
    for (double e : ev)
        hi = std::max(hi, e);
    return hi;
}

/// Largest generalized eigenvalue of A c = lambda G c for symmetric A and SPD
/// G: lambda_max( L^{-1} A L^{-T} ) with G = L L^T.
inline double generalized_rayleigh_max(const DenseMatrix& a, DenseMatrix g) {
    const std::size_t n = g.n;
    if (!cholesky_factor(g))
        throw ConditionError("generalized_rayleigh_max: Gram matrix not SPD");
    // solve L X = A  (columns), then M = X L^{-T} via solving L M^T = X^T
    DenseMatrix x(n);
    for (std::size_t col = 0; col < n; ++col) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = a(i, col);
            for (std::size_t k = 0; k < i; ++k)
                s -= g(i, k) * x(k, col);
            x(i, col) = s / g(i, i);
        }
    }
    DenseMatrix mmat(n);
    for (std::size_t row = 0; row < n; ++row) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = x(row, j);
            for (std::size_t k = 0; k < j; ++k)
                s -= g(j, k) * mmat(row, k);
            mmat(row, j) = s / g(j, j);
        }
    }
    auto ev = symmetric_eigenvalues(mmat);
    double hi = ev.empty() ? 0.0 : ev[0];
    for (double e : ev)
        hi = std::max(hi, e);
    return hi;
}

inline double kahan_sum(const std::vector<double>& xs) {
    double s = 0.0, c = 0.0;
    for (double x : xs) {
        const double y = x - c;
        const double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    return s;
}

/// Compensated accumulator for order-insensitive-by-construction reductions.
struct KahanAccumulator {
    double sum = 0.0, comp = 0.0;
    void add(double x) {
        const double y = x - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    void merge(const KahanAccumulator& other) {
        add(other.sum);
        add(-other.comp);
    }
};

} // namespace setdist
