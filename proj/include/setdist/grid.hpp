#pragma once

#include "setdist/errors.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace setdist {

enum class GridKind { Uniform, LogSpaced };

/// Strictly increasing sequence of nonnegative abscissae. Immutable after
/// construction; shared between curves via shared_ptr.
class Grid {
public:
    Grid(std::vector<double> points, GridKind kind)
        : points_(std::move(points)), kind_(kind) {
        if (points_.empty())
            throw DegenerateGridError("grid: empty point set");
        if (points_.front() < 0.0)
            throw DegenerateGridError("grid: points must be nonnegative");
        for (std::size_t i = 1; i < points_.size(); ++i) {
            if (!(points_[i] > points_[i - 1]))
                throw DegenerateGridError("grid: points must be strictly increasing at index " +
                                          std::to_string(i));
        }
    }

    /// n points including both endpoints a and b.
    static std::shared_ptr<const Grid> uniform(double a, double b, std::size_t n) {
        if (n < 1 || !(b > a))
            throw DegenerateGridError("grid: uniform requires n >= 1 and b > a");
        std::vector<double> p(n);
        if (n == 1) {
            p[0] = a;
        } else {
            const double h = (b - a) / static_cast<double>(n - 1);
            for (std::size_t i = 0; i < n; ++i)
                p[i] = a + h * static_cast<double>(i);
            p.back() = b;
        }
        return std::make_shared<Grid>(std::move(p), GridKind::Uniform);
    }

    /// n interior points of (a,b), endpoints excluded. Used for the L2((0,1))
    /// space with Dirichlet boundary handling.
    static std::shared_ptr<const Grid> uniform_interior(double a, double b, std::size_t n) {
        if (n < 1 || !(b > a))
            throw DegenerateGridError("grid: uniform_interior requires n >= 1 and b > a");
        std::vector<double> p(n);
        const double h = (b - a) / static_cast<double>(n + 1);
        for (std::size_t i = 0; i < n; ++i)
            p[i] = a + h * static_cast<double>(i + 1);
        return std::make_shared<Grid>(std::move(p), GridKind::Uniform);
    }

    /// n points on [0, x_max], exponentially clustered near 0:
    /// x(u) = x_max (e^{c u} - 1)/(e^c - 1), u uniform on [0,1].
    static std::shared_ptr<const Grid> log_spaced(double x_max, std::size_t n, double c = 4.0) {
        if (n < 2 || !(x_max > 0.0) || !(c > 0.0))
            throw DegenerateGridError("grid: log_spaced requires n >= 2, x_max > 0, c > 0");
        std::vector<double> p(n);
        const double denom = std::expm1(c);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = static_cast<double>(i) / static_cast<double>(n - 1);
            p[i] = x_max * std::expm1(c * u) / denom;
        }
        p.front() = 0.0;
        p.back() = x_max;
        return std::make_shared<Grid>(std::move(p), GridKind::LogSpaced);
    }

    const std::vector<double>& points() const { return points_; }
    GridKind kind() const { return kind_; }
    std::size_t size() const { return points_.size(); }
    double front() const { return points_.front(); }
    double back() const { return points_.back(); }
    double operator[](std::size_t i) const { return points_[i]; }

private:
    std::vector<double> points_;
    GridKind kind_;
};

using GridPtr = std::shared_ptr<const Grid>;

inline bool same_grid(const GridPtr& a, const GridPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    return a->points() == b->points();
}

/// Discretized element of a function-valued state space: samples on a grid
/// plus an optional limit-at-infinity slot (used by the exponentially
/// weighted forward-curve space).
struct Curve {
    GridPtr grid;
    std::vector<double> values;
    std::optional<double> value_at_infinity;

    Curve() = default;
    Curve(GridPtr g, std::vector<double> v, std::optional<double> vinf = std::nullopt)
        : grid(std::move(g)), values(std::move(v)), value_at_infinity(vinf) {
        if (!grid)
            throw DegenerateGridError("curve: null grid");
        if (values.size() != grid->size())
            throw GridMismatchError("curve: values length does not match grid length");
    }

    static Curve from_function(GridPtr g, const std::function<double(double)>& f,
                               std::optional<double> vinf = std::nullopt) {
        std::vector<double> v(g->size());
        for (std::size_t i = 0; i < g->size(); ++i)
            v[i] = f((*g)[i]);
        return Curve(std::move(g), std::move(v), vinf);
    }

    static Curve zeros(GridPtr g, std::optional<double> vinf = std::nullopt) {
        return Curve(std::move(g), std::vector<double>(g ? g->size() : 0, 0.0), vinf);
    }

    static Curve constant(GridPtr g, double c, std::optional<double> vinf = std::nullopt) {
        return Curve(std::move(g), std::vector<double>(g ? g->size() : 0, c), vinf);
    }

    /// Scalar states are 1-point curves on a shared singleton grid.
    static Curve scalar(double x) {
        static const GridPtr g = std::make_shared<Grid>(std::vector<double>{0.0}, GridKind::Uniform);
        return Curve(g, {x});
    }

    std::size_t size() const { return values.size(); }
    bool is_scalar() const { return values.size() == 1; }
    double as_scalar() const {
        if (!is_scalar())
            throw DomainError("curve: as_scalar on non-scalar curve");
        return values[0];
    }

    bool finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        if (value_at_infinity && !std::isfinite(*value_at_infinity)) return false;
        return true;
    }
};

// Value-semantics arithmetic; value_at_infinity combines when both sides have it.

inline std::optional<double> combine_inf(const std::optional<double>& a,
                                         const std::optional<double>& b,
                                         double ca, double cb) {
    if (a && b) return ca * *a + cb * *b;
    if (a && !b) return ca * *a;
    if (!a && b) return cb * *b;
    return std::nullopt;
}

inline Curve operator+(const Curve& a, const Curve& b) {
    if (!same_grid(a.grid, b.grid))
        throw GridMismatchError("curve: add with mismatched grids");
    Curve r = a;
    for (std::size_t i = 0; i < r.values.size(); ++i)
        r.values[i] += b.values[i];
    r.value_at_infinity = combine_inf(a.value_at_infinity, b.value_at_infinity, 1.0, 1.0);
    return r;
}

inline Curve operator-(const Curve& a, const Curve& b) {
    if (!same_grid(a.grid, b.grid))
        throw GridMismatchError("curve: subtract with mismatched grids");
    Curve r = a;
    for (std::size_t i = 0; i < r.values.size(); ++i)
        r.values[i] -= b.values[i];
    r.value_at_infinity = combine_inf(a.value_at_infinity, b.value_at_infinity, 1.0, -1.0);
    return r;
}

inline Curve operator*(double s, const Curve& a) {
    Curve r = a;
    for (double& v : r.values)
        v *= s;
    if (r.value_at_infinity) r.value_at_infinity = s * *r.value_at_infinity;
    return r;
}

inline Curve& axpy(Curve& y, double a, const Curve& x) {
    if (!same_grid(y.grid, x.grid))
        throw GridMismatchError("curve: axpy with mismatched grids");
    for (std::size_t i = 0; i < y.values.size(); ++i)
        y.values[i] += a * x.values[i];
    y.value_at_infinity = combine_inf(y.value_at_infinity, x.value_at_infinity, 1.0, a);
    return y;
}

} // namespace setdist
