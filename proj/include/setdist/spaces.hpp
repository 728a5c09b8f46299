#pragma once

#include "setdist/errors.hpp"
#include "setdist/grid.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace setdist {

// ---------------------------------------------------------------------------
// finite-difference derivative on a (possibly non-uniform) grid
// ---------------------------------------------------------------------------

// Second-order three-point stencils: central in the interior, one-sided at
// both ends. Row i touches columns (i-1, i, i+1), the first row (0,1,2) and
// the last row (n-3, n-2, n-1).
struct DerivativeStencil {
    std::vector<double> cl, cc, cr; // per-row coefficients, see row layout above

    explicit DerivativeStencil(const Grid& grid) {
        const auto& x = grid.points();
        const std::size_t n = x.size();
        if (n < 3)
            throw DegenerateGridError("derivative: need at least 3 grid points");
        cl.resize(n);
        cc.resize(n);
        cr.resize(n);
        {
            const double h1 = x[1] - x[0], h2 = x[2] - x[1];
            cl[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2));
            cc[0] = (h1 + h2) / (h1 * h2);
            cr[0] = -h1 / (h2 * (h1 + h2));
        }
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double h1 = x[i] - x[i - 1], h2 = x[i + 1] - x[i];
            cl[i] = -h2 / (h1 * (h1 + h2));
            cc[i] = (h2 - h1) / (h1 * h2);
            cr[i] = h1 / (h2 * (h1 + h2));
        }
        {
            const double h1 = x[n - 2] - x[n - 3], h2 = x[n - 1] - x[n - 2];
            cl[n - 1] = h2 / (h1 * (h1 + h2));
            cc[n - 1] = -(h1 + h2) / (h1 * h2);
            cr[n - 1] = (h1 + 2.0 * h2) / (h2 * (h1 + h2));
        }
    }

    std::vector<double> apply(const std::vector<double>& v) const {
        const std::size_t n = v.size();
        std::vector<double> out(n);
        out[0] = cl[0] * v[0] + cc[0] * v[1] + cr[0] * v[2];
        for (std::size_t i = 1; i + 1 < n; ++i)
            out[i] = cl[i] * v[i - 1] + cc[i] * v[i] + cr[i] * v[i + 1];
        out[n - 1] = cl[n - 1] * v[n - 3] + cc[n - 1] * v[n - 2] + cr[n - 1] * v[n - 1];
        return out;
    }

    /// y -> D^T y (scatter form of apply), needed by quadratic objectives.
    std::vector<double> apply_transpose(const std::vector<double>& y) const {
        const std::size_t n = y.size();
        std::vector<double> out(n, 0.0);
        out[0] += cl[0] * y[0];
        out[1] += cc[0] * y[0];
        out[2] += cr[0] * y[0];
        for (std::size_t i = 1; i + 1 < n; ++i) {
            out[i - 1] += cl[i] * y[i];
            out[i] += cc[i] * y[i];
            out[i + 1] += cr[i] * y[i];
        }
        out[n - 3] += cl[n - 1] * y[n - 1];
        out[n - 2] += cc[n - 1] * y[n - 1];
        out[n - 1] += cr[n - 1] * y[n - 1];
        return out;
    }
};

/// Trapezoid weights over the grid's own span.
inline std::vector<double> trapezoid_weights(const Grid& grid) {
    const auto& x = grid.points();
    const std::size_t n = x.size();
    std::vector<double> w(n, 0.0);
    if (n == 1) return w;
    w[0] = 0.5 * (x[1] - x[0]);
    for (std::size_t i = 1; i + 1 < n; ++i)
        w[i] = 0.5 * (x[i + 1] - x[i - 1]);
    w[n - 1] = 0.5 * (x[n - 1] - x[n - 2]);
    return w;
}

/// Trapezoid weights over [0,1] for an interior grid, treating the curve as
/// vanishing at both endpoints (Dirichlet convention of the L2((0,1)) space).
inline std::vector<double> l2_dirichlet_weights(const Grid& grid) {
    const auto& x = grid.points();
    const std::size_t n = x.size();
    std::vector<double> w(n, 0.0);
    const double left = 0.0, right = 1.0;
    if (n == 1) {
        w[0] = 0.5 * (right - left);
        return w;
    }
    w[0] = 0.5 * (x[1] - left);
    for (std::size_t i = 1; i + 1 < n; ++i)
        w[i] = 0.5 * (x[i + 1] - x[i - 1]);
    w[n - 1] = 0.5 * (right - x[n - 2]);
    return w;
}

// ---------------------------------------------------------------------------
// linear operator handles
// ---------------------------------------------------------------------------

/// Handle to the generator of a semigroup: grid action plus optional adjoint
/// action and domain (boundary-condition) check.
struct LinearOperator {
    std::string name;
    std::function<Curve(const Curve&)> apply;
    std::function<Curve(const Curve&)> apply_adjoint; // empty when not available
    std::function<void(const Curve&)> check_domain;   // throws BoundaryConditionError

    bool has_adjoint() const { return static_cast<bool>(apply_adjoint); }
};

using LinearOperatorPtr = std::shared_ptr<const LinearOperator>;

// ---------------------------------------------------------------------------
// space descriptor
// ---------------------------------------------------------------------------

enum class SpaceKind { ScalarLine, L2UnitInterval, Filipovic, GraphNorm };

/// Which inner product the exponentially weighted forward-curve space uses:
/// the equivalent form pairs the limits at infinity, the original form pairs
/// the values at zero. Experiments declare the form in their config.
enum class FilipovicNormForm { Equivalent, Original };

class SpaceDescriptor {
public:
    static SpaceDescriptor scalar_line() {
        SpaceDescriptor s;
        s.kind_ = SpaceKind::ScalarLine;
        return s;
    }

    static SpaceDescriptor l2_unit_interval(GridPtr grid) {
        if (!grid || !(grid->front() > 0.0) || !(grid->back() < 1.0))
            throw DegenerateGridError("l2_unit_interval: grid points must lie strictly inside (0,1)");
        SpaceDescriptor s;
        s.kind_ = SpaceKind::L2UnitInterval;
        s.grid_ = std::move(grid);
        return s;
    }

    static SpaceDescriptor filipovic(double gamma, GridPtr grid,
                                     FilipovicNormForm form = FilipovicNormForm::Equivalent) {
        if (!(gamma > 0.0))
            throw ValidationError("filipovic: weight exponent gamma must be positive");
        if (!grid || grid->front() != 0.0 || !(grid->back() > 0.0))
            throw DegenerateGridError("filipovic: grid must start at 0 and end at x_max > 0");
        SpaceDescriptor s;
        s.kind_ = SpaceKind::Filipovic;
        s.grid_ = std::move(grid);
        s.gamma_ = gamma;
        s.norm_form_ = form;
        return s;
    }

    static SpaceDescriptor graph_norm(SpaceDescriptor base, LinearOperatorPtr generator) {
        if (!generator || !generator->apply)
            throw ValidationError("graph_norm: generator with grid action required");
        SpaceDescriptor s;
        s.kind_ = SpaceKind::GraphNorm;
        s.base_ = std::make_shared<SpaceDescriptor>(std::move(base));
        s.generator_ = std::move(generator);
        s.grid_ = s.base_->grid_;
        return s;
    }

    SpaceKind kind() const { return kind_; }
    const GridPtr& grid() const { return grid_; }
    double gamma() const { return gamma_; }
    FilipovicNormForm norm_form() const { return norm_form_; }
    const SpaceDescriptor& base() const {
        if (!base_) throw DomainError("space: base() on a non-graph space");
        return *base_;
    }
    const LinearOperatorPtr& generator() const { return generator_; }

private:
    SpaceKind kind_ = SpaceKind::ScalarLine;
    GridPtr grid_;
    double gamma_ = 0.0;
    FilipovicNormForm norm_form_ = FilipovicNormForm::Equivalent;
    std::shared_ptr<const SpaceDescriptor> base_;
    LinearOperatorPtr generator_;
};

// ---------------------------------------------------------------------------
// operations
// ---------------------------------------------------------------------------

/// Finite-difference derivative of h on its own grid (second order, one-sided
/// at the ends). The derivative of a curve with a limit at infinity gets 0
/// stored in that slot.
inline Curve differentiate(const Curve& h) {
    if (h.size() < 3)
        throw DegenerateGridError("differentiate: need at least 3 grid points");
    DerivativeStencil d(*h.grid);
    Curve out(h.grid, d.apply(h.values),
              h.value_at_infinity ? std::optional<double>(0.0) : std::nullopt);
    return out;
}

inline Curve differentiate(const SpaceDescriptor& space, const Curve& h) {
    (void)space;
    return differentiate(h);
}

inline void require_same_grid(const Curve& h, const Curve& g, const char* op) {
    if (!same_grid(h.grid, g.grid))
        throw GridMismatchError(std::string(op) + ": curves on different grids");
}

inline double inner_product(const SpaceDescriptor& space, const Curve& h, const Curve& g) {
    require_same_grid(h, g, "inner_product");
    switch (space.kind()) {
    case SpaceKind::ScalarLine:
        return h.as_scalar() * g.as_scalar();
    case SpaceKind::L2UnitInterval: {
        if (!same_grid(h.grid, space.grid()))
            throw GridMismatchError("inner_product: curve grid differs from space grid");
        const auto w = l2_dirichlet_weights(*h.grid);
        double s = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i)
            s += w[i] * h.values[i] * g.values[i];
        return s;
    }
    case SpaceKind::Filipovic: {
        if (!same_grid(h.grid, space.grid()))
            throw GridMismatchError("inner_product: curve grid differs from space grid");
        if (!h.value_at_infinity || !g.value_at_infinity)
            throw IncompleteCurveError("inner_product: Filipovic curve missing value_at_infinity");
        const Curve dh = differentiate(h);
        const Curve dg = differentiate(g);
        const auto w = trapezoid_weights(*h.grid);
        const auto& x = h.grid->points();
        double s = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i)
            s += w[i] * dh.values[i] * dg.values[i] * std::exp(space.gamma() * x[i]);
        const double boundary = space.norm_form() == FilipovicNormForm::Equivalent
                                    ? *h.value_at_infinity * *g.value_at_infinity
                                    : h.values.front() * g.values.front();
        return boundary + s;
    }
    case SpaceKind::GraphNorm: {
        const auto& gen = *space.generator();
        const Curve ah = gen.apply(h);
        const Curve ag = gen.apply(g);
        return inner_product(space.base(), h, g) + inner_product(space.base(), ah, ag);
    }
    }
    throw DomainError("inner_product: unknown space kind");
}

inline double norm(const SpaceDescriptor& space, const Curve& h) {
    const double q = inner_product(space, h, h);
    return std::sqrt(q > 0.0 ? q : 0.0);
}

inline Curve apply_generator(const LinearOperator& op, const Curve& h) {
    if (op.check_domain)
        op.check_domain(h);
    return op.apply(h);
}

inline Curve apply_generator(const LinearOperatorPtr& op, const Curve& h) {
    if (!op)
        throw DomainError("apply_generator: null operator handle");
    return apply_generator(*op, h);
}

// ---------------------------------------------------------------------------
// generator builders
// ---------------------------------------------------------------------------

/// d/dx, the generator of the translation semigroup on forward-curve spaces.
/// No adjoint action: the translation generator's adjoint domain does not
/// contain the curve families of interest.
inline LinearOperatorPtr translation_generator() {
    auto op = std::make_shared<LinearOperator>();
    op->name = "d/dx";
    op->apply = [](const Curve& h) { return differentiate(h); };
    return op;
}

/// A = (kappa/2) d^2/dx^2 + d/dx with Dirichlet conditions on (0,1), realized
/// as central differences on a uniform interior grid with zero extension at
/// both walls. The adjoint action (kappa/2) d^2/dx^2 - d/dx is exact for the
/// discrete L2 inner product on such grids (the stencil matrix transpose).
inline LinearOperatorPtr second_order_generator(double kappa, const GridPtr& grid,
                                                double boundary_tolerance = 0.1) {
    if (!(kappa > 0.0))
        throw ValidationError("second_order_generator: kappa must be positive");
    if (!grid || grid->size() < 3)
        throw DegenerateGridError("second_order_generator: need at least 3 interior points");
    const auto& x = grid->points();
    const double dx = x[1] - x[0];
    for (std::size_t i = 1; i < x.size(); ++i) {
        if (std::abs((x[i] - x[i - 1]) - dx) > 1e-12 * dx)
            throw DegenerateGridError("second_order_generator: grid must be uniform");
    }
    if (std::abs(x.front() - dx) > 1e-12 || std::abs((1.0 - x.back()) - dx) > 1e-12)
        throw DegenerateGridError("second_order_generator: grid must be the interior lattice of (0,1)");

    auto tri_apply = [dx, kappa](const Curve& h, double drift_sign) {
        const std::size_t n = h.size();
        const double c2 = 0.5 * kappa / (dx * dx);
        const double c1 = drift_sign * 0.5 / dx;
        std::vector<double> out(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double left = i > 0 ? h.values[i - 1] : 0.0;
            const double right = i + 1 < n ? h.values[i + 1] : 0.0;
            out[i] = c2 * (left - 2.0 * h.values[i] + right) + c1 * (right - left);
        }
        return Curve(h.grid, std::move(out));
    };

    auto op = std::make_shared<LinearOperator>();
    op->name = "(kappa/2) d2/dx2 + d/dx [Dirichlet]";
    op->apply = [tri_apply](const Curve& h) { return tri_apply(h, +1.0); };
    op->apply_adjoint = [tri_apply](const Curve& h) { return tri_apply(h, -1.0); };
    op->check_domain = [tol = boundary_tolerance](const Curve& h) {
        const std::size_t n = h.size();
        if (n < 3) throw DegenerateGridError("second_order_generator: curve too short");
        double scale = 0.0;
        for (double v : h.values)
            scale = std::max(scale, std::abs(v));
        if (scale == 0.0) return;
        // quadratic extrapolation of the uniform samples to both walls
        const double left = 3.0 * h.values[0] - 3.0 * h.values[1] + h.values[2];
        const double right = 3.0 * h.values[n - 1] - 3.0 * h.values[n - 2] + h.values[n - 3];
        if (std::abs(left) > tol * scale || std::abs(right) > tol * scale)
            throw BoundaryConditionError("second_order_generator: curve violates Dirichlet conditions");
    };
    return op;
}

} // namespace setdist
