#pragma once

#include "setdist/errors.hpp"
#include "setdist/grid.hpp"
#include "setdist/linalg.hpp"
#include "setdist/spaces.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace setdist {

struct ProjectionResult {
    Curve point;
    double distance = 0.0;
    std::size_t iterations = 0;
    bool converged = true;
    bool upper_bound_only = false;
    double gram_condition = 0.0; // subspace routes
    double kkt_residual = 0.0;   // cone QP route
    // multi-start log for non-convex targets: (start coords, local distance)
    std::vector<std::pair<std::vector<double>, double>> starts;
};

// ---------------------------------------------------------------------------
// subspace projection (Gram solve)
// ---------------------------------------------------------------------------

namespace detail {

inline DenseMatrix gram_matrix(const SpaceDescriptor& space, const std::vector<Curve>& basis) {
    const std::size_t m = basis.size();
    DenseMatrix g(m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i; j < m; ++j) {
            const double v = inner_product(space, basis[i], basis[j]);
            g(i, j) = v;
            g(j, i) = v;
        }
    return g;
}

} // namespace detail

/// Least-squares projection of h onto span(basis) in the space's inner
/// product. Cholesky with jitter fallback; Gram condition number reported.
inline ProjectionResult project_subspace(const SpaceDescriptor& space,
                                         const std::vector<Curve>& basis, const Curve& h,
                                         double condition_limit = 1e12) {
    if (basis.empty())
        throw ValidationError("project_subspace: empty basis");
    DenseMatrix g = detail::gram_matrix(space, basis);
    const double cond = symmetric_condition(g);
    if (!(cond < condition_limit))
        throw ConditionError("project_subspace: Gram matrix condition " + std::to_string(cond) +
                             " exceeds limit");
    std::vector<double> rhs(basis.size());
    for (std::size_t i = 0; i < basis.size(); ++i)
        rhs[i] = inner_product(space, h, basis[i]);
    const std::vector<double> coeff = spd_solve(std::move(g), std::move(rhs));

    Curve point = 0.0 * basis[0];
    for (std::size_t i = 0; i < basis.size(); ++i)
        axpy(point, coeff[i], basis[i]);
    ProjectionResult r;
    r.distance = norm(space, h - point);
    r.point = std::move(point);
    r.iterations = 1;
    r.gram_condition = cond;
    return r;
}

// ---------------------------------------------------------------------------
// nonnegative-cone projection
// ---------------------------------------------------------------------------

struct ConeQpOptions {
    double tol = 1e-8;
    std::size_t max_iter = 4000;
};

/// Projection onto {g : g >= 0 pointwise}. Over the L2 space the discrete
/// quadratic form is diagonal and pointwise clipping is the exact minimizer.
/// Over the weighted forward-curve space the form couples neighbours through
/// the derivative, so we run a convex QP in the grid values: projected
/// gradient with Barzilai-Borwein steps and a best-iterate fallback. The
/// projected point's limit at infinity is tied to its value at x_max, which
/// keeps the objective positive definite on the grid unknowns.
inline ProjectionResult project_nonnegative_cone(const SpaceDescriptor& space, const Curve& h,
                                                 const ConeQpOptions& opts = {}) {
    if (space.kind() == SpaceKind::L2UnitInterval || space.kind() == SpaceKind::ScalarLine) {
        Curve point = h;
        for (double& v : point.values)
            v = std::max(v, 0.0);
        ProjectionResult r;
        r.distance = norm(space, h - point);
        r.point = std::move(point);
        r.iterations = 1;
        r.converged = true;
        return r;
    }
    if (space.kind() != SpaceKind::Filipovic)
        throw SpaceMismatchError("project_nonnegative_cone: cone defined over Filipovic or L2 only");
    if (!same_grid(h.grid, space.grid()))
        throw GridMismatchError("project_nonnegative_cone: curve grid differs from space grid");
    if (!h.value_at_infinity)
        throw IncompleteCurveError("project_nonnegative_cone: curve missing value_at_infinity");

    const std::size_t n = h.size();
    const auto& x = h.grid->points();
    DerivativeStencil ds(*h.grid);
    std::vector<double> w = trapezoid_weights(*h.grid);
    for (std::size_t i = 0; i < n; ++i)
        w[i] *= std::exp(space.gamma() * x[i]);

    const bool equivalent = space.norm_form() == FilipovicNormForm::Equivalent;
    const std::size_t bi = equivalent ? n - 1 : 0;                      // boundary-paired index
    const double btarget = equivalent ? *h.value_at_infinity : h.values.front();

    auto objective = [&](const std::vector<double>& g) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i)
            v[i] = g[i] - h.values[i];
        const auto dv = ds.apply(v);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += w[i] * dv[i] * dv[i];
        const double b = g[bi] - btarget;
        return s + b * b;
    };
    auto gradient = [&](const std::vector<double>& g, std::vector<double>& grad) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i)
            v[i] = g[i] - h.values[i];
        auto dv = ds.apply(v);
        for (std::size_t i = 0; i < n; ++i)
            dv[i] *= w[i];
        grad = ds.apply_transpose(dv);
        for (double& gv : grad)
            gv *= 2.0;
        grad[bi] += 2.0 * (g[bi] - btarget);
    };

    // crude largest-eigenvalue estimate of the Hessian for the first step
    double lip = 1.0;
    {
        std::vector<double> u(n, 1.0), tmp;
        for (std::size_t i = 0; i < n; ++i)
            u[i] = std::sin(static_cast<double>(i + 1));
        for (int it = 0; it < 25; ++it) {
            std::vector<double> du = ds.apply(u);
            for (std::size_t i = 0; i < n; ++i)
                du[i] *= w[i];
            tmp = ds.apply_transpose(du);
            for (double& t : tmp)
                t *= 2.0;
            tmp[bi] += 2.0 * u[bi];
            double nrm = 0.0;
            for (double t : tmp)
                nrm += t * t;
            nrm = std::sqrt(nrm);
            if (nrm == 0.0) break;
            lip = nrm;
            for (std::size_t i = 0; i < n; ++i)
                u[i] = tmp[i] / nrm;
        }
    }

    double scale = 1.0;
    for (double v : h.values)
        scale = std::max(scale, std::abs(v));
    const double kkt_tol = opts.tol * scale;

    // start from the clipped curve: its objective equals ||h^-||^2, so the
    // reported best iterate can never exceed the negative-part bound
    std::vector<double> g(n), grad(n), g_prev, grad_prev;
    for (std::size_t i = 0; i < n; ++i)
        g[i] = std::max(h.values[i], 0.0);
    gradient(g, grad);
    std::vector<double> best_g = g;
    double best_f = objective(g);
    double kkt = 0.0;
    std::size_t iter = 0;
    bool converged = false;
    double step = 1.0 / std::max(lip, 1e-12);
    for (; iter < opts.max_iter; ++iter) {
        kkt = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double proj = std::max(g[i] - grad[i], 0.0);
            kkt = std::max(kkt, std::abs(g[i] - proj));
        }
        if (kkt <= kkt_tol) {
            converged = true;
            break;
        }
        if (iter > 0) {
            double ss = 0.0, sy = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double s = g[i] - g_prev[i];
                const double y = grad[i] - grad_prev[i];
                ss += s * s;
                sy += s * y;
            }
            step = sy > 0.0 ? ss / sy : 1.0 / std::max(lip, 1e-12);
            step = std::min(std::max(step, 1e-8 / lip), 1e8 / lip);
        }
        g_prev = g;
        grad_prev = grad;
        for (std::size_t i = 0; i < n; ++i)
            g[i] = std::max(g[i] - step * grad[i], 0.0);
        gradient(g, grad);
        const double f = objective(g);
        if (f < best_f) {
            best_f = f;
            best_g = g;
        }
    }

    Curve point(h.grid, std::move(best_g), std::nullopt);
    point.value_at_infinity = point.values[n - 1];
    ProjectionResult r;
    r.distance = std::sqrt(std::max(best_f, 0.0));
    r.point = std::move(point);
    r.iterations = iter;
    r.converged = converged;
    r.kkt_residual = kkt;
    return r;
}

// ---------------------------------------------------------------------------
// graph-norm projection
// ---------------------------------------------------------------------------

namespace detail {

inline Curve checked_generator_apply(const LinearOperatorPtr& gen, const Curve& c,
                                     const char* what) {
    try {
        return apply_generator(gen, c);
    } catch (const BoundaryConditionError& e) {
        throw DomainError(std::string(what) + ": " + e.what());
    }
}

} // namespace detail

/// Orthogonal projection onto span(basis) in the graph inner product
/// <u,v> + <Au,Av>. Requires basis (and h) in the generator's domain.
inline ProjectionResult graph_norm_projection(const SpaceDescriptor& graph_space,
                                              const std::vector<Curve>& basis, const Curve& h) {
    if (graph_space.kind() != SpaceKind::GraphNorm)
        throw SpaceMismatchError("graph_norm_projection: space is not a graph-norm space");
    for (const auto& b : basis)
        detail::checked_generator_apply(graph_space.generator(), b, "graph_norm_projection basis");
    return project_subspace(graph_space, basis, h);
}

/// Same projection through the extension formula pi(x) = sum <x, e_i + A*A e_i> e_i
/// with a graph-orthonormal basis {e_i}. Needs only the base inner product of
/// x, so it applies to states outside the generator's domain. Exact adjoint
/// action required.
inline Curve graph_norm_projection_extended(const SpaceDescriptor& graph_space,
                                            const std::vector<Curve>& basis, const Curve& h) {
    if (graph_space.kind() != SpaceKind::GraphNorm)
        throw SpaceMismatchError("graph_norm_projection_extended: space is not a graph-norm space");
    const auto& gen = graph_space.generator();
    if (!gen->has_adjoint())
        throw DomainError("graph_norm_projection_extended: generator has no adjoint action");
    const std::size_t m = basis.size();
    DenseMatrix g = detail::gram_matrix(graph_space, basis);
    if (!cholesky_factor(g))
        throw ConditionError("graph_norm_projection_extended: graph Gram matrix not SPD");
    // graph-orthonormal basis: e_i = sum_j (L^{-1})_{ij} b_j via forward substitution
    std::vector<Curve> e;
    e.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        Curve ei = 0.0 * basis[0];
        axpy(ei, 1.0, basis[i]);
        for (std::size_t k = 0; k < i; ++k)
            axpy(ei, -g(i, k), e[k]);
        e.push_back((1.0 / g(i, i)) * ei);
    }
    Curve out = 0.0 * basis[0];
    for (std::size_t i = 0; i < m; ++i) {
        const Curve ae = detail::checked_generator_apply(gen, e[i], "graph_norm_projection_extended");
        const Curve astar_ae = gen->apply_adjoint(ae);
        const double c = inner_product(graph_space.base(), h, e[i]) +
                         inner_product(graph_space.base(), h, astar_ae);
        axpy(out, c, e[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// parametrized manifolds
// ---------------------------------------------------------------------------

struct ManifoldChart {
    std::size_t dim = 0;
    std::function<Curve(const std::vector<double>&)> map;
    // when true the chart domain is {y : y_1 >= 0} and {y_1 = 0} is the boundary
    bool boundary = false;
    std::vector<std::vector<double>> starts; // multi-start seeds in chart coords
};

namespace detail {

inline std::vector<Curve> chart_jacobian(const ManifoldChart& chart, const std::vector<double>& y) {
    if (!chart.map || chart.dim == 0 || y.size() != chart.dim)
        throw ChartError("chart_jacobian: malformed chart or coordinates");
    std::vector<Curve> cols;
    cols.reserve(chart.dim);
    for (std::size_t j = 0; j < chart.dim; ++j) {
        const double delta = 1e-6 * (1.0 + std::abs(y[j]));
        std::vector<double> yp = y, ym = y;
        if (chart.boundary && j == 0 && y[0] < delta) {
            // one-sided second order at the boundary wall
            std::vector<double> y1 = y, y2 = y;
            y1[0] += delta;
            y2[0] += 2.0 * delta;
            const Curve f0 = chart.map(y);
            const Curve f1 = chart.map(y1);
            const Curve f2 = chart.map(y2);
            cols.push_back((1.0 / (2.0 * delta)) * ((-3.0) * f0 + 4.0 * f1 - f2));
            continue;
        }
        yp[j] += delta;
        ym[j] -= delta;
        cols.push_back((1.0 / (2.0 * delta)) * (chart.map(yp) - chart.map(ym)));
    }
    return cols;
}

} // namespace detail

/// Distance from v to the tangent space at chart point y (interior), or to
/// the inward half-cone {Dphi(y) w : w_1 >= 0} at a boundary point. The chart
/// Jacobian is formed by finite differences; a rank-deficient Jacobian is a
/// chart error.
inline double tangent_distance(const SpaceDescriptor& space, const ManifoldChart& chart,
                               const std::vector<double>& y, const Curve& v, bool at_boundary) {
    const std::vector<Curve> jac = detail::chart_jacobian(chart, y);
    DenseMatrix g = detail::gram_matrix(space, jac);
    const double cond = symmetric_condition(g);
    if (!(cond < 1e12))
        throw ChartError("tangent_distance: chart Jacobian is rank deficient (Gram condition " +
                         std::to_string(cond) + ")");
    std::vector<double> rhs(jac.size());
    for (std::size_t i = 0; i < jac.size(); ++i)
        rhs[i] = inner_product(space, v, jac[i]);
    std::vector<double> wcoef = spd_solve(g, rhs);
    if (at_boundary && wcoef[0] < 0.0) {
        // the single active constraint w_1 = 0: solve on the remaining columns
        if (jac.size() == 1) {
            return norm(space, v);
        }
        std::vector<Curve> reduced(jac.begin() + 1, jac.end());
        return project_subspace(space, reduced, v).distance;
    }
    Curve point = 0.0 * jac[0];
    for (std::size_t i = 0; i < jac.size(); ++i)
        axpy(point, wcoef[i], jac[i]);
    return norm(space, v - point);
}

struct ManifoldDistanceOptions {
    std::size_t max_iterations = 60;
    double step_tol = 1e-11;
    double levenberg = 1e-10;
};

/// Upper bound on the distance to a parametrized manifold by multi-start
/// Gauss-Newton over chart coordinates. Reports every start with its local
/// minimum so non-unique projections are reproducible.
inline ProjectionResult project_manifold(const SpaceDescriptor& space, const ManifoldChart& chart,
                                         const Curve& h, const ManifoldDistanceOptions& opts = {}) {
    if (chart.starts.empty())
        throw ChartError("project_manifold: chart provides no starting points");
    ProjectionResult best;
    best.distance = std::numeric_limits<double>::infinity();
    best.upper_bound_only = true;
    std::size_t total_iters = 0;
    bool all_converged = true;

    auto clamp = [&](std::vector<double>& y) {
        if (chart.boundary && y[0] < 0.0) y[0] = 0.0;
    };
    auto sqdist = [&](const std::vector<double>& y) {
        const Curve d = h - chart.map(y);
        return inner_product(space, d, d);
    };

    for (const auto& start : chart.starts) {
        std::vector<double> y = start;
        clamp(y);
        double f = sqdist(y);
        bool local_converged = false;
        std::size_t it = 0;
        for (; it < opts.max_iterations; ++it) {
            const std::vector<Curve> jac = detail::chart_jacobian(chart, y);
            const Curve resid = h - chart.map(y);
            std::vector<double> grad(chart.dim);
            for (std::size_t j = 0; j < chart.dim; ++j)
                grad[j] = inner_product(space, resid, jac[j]);
            DenseMatrix hess = detail::gram_matrix(space, jac);
            for (std::size_t j = 0; j < chart.dim; ++j)
                hess(j, j) += opts.levenberg * (1.0 + hess(j, j));
            std::vector<double> delta = spd_solve(hess, grad);
            double step_norm = 0.0;
            for (double d : delta)
                step_norm = std::max(step_norm, std::abs(d));
            if (step_norm <= opts.step_tol * (1.0 + std::abs(y[0]))) {
                local_converged = true;
                break;
            }
            double scale_bt = 1.0;
            bool accepted = false;
            for (int bt = 0; bt < 30; ++bt, scale_bt *= 0.5) {
                std::vector<double> yn = y;
                for (std::size_t j = 0; j < chart.dim; ++j)
                    yn[j] += scale_bt * delta[j];
                clamp(yn);
                const double fn = sqdist(yn);
                if (fn < f) {
                    y = std::move(yn);
                    f = fn;
                    accepted = true;
                    break;
                }
            }
            if (!accepted) {
                local_converged = true; // no descent direction left at this scale
                break;
            }
        }
        total_iters += it;
        all_converged = all_converged && local_converged;
        const double dist = std::sqrt(std::max(f, 0.0));
        best.starts.emplace_back(start, dist);
        if (dist < best.distance) {
            best.distance = dist;
            best.point = chart.map(y);
        }
    }
    best.iterations = total_iters;
    best.converged = all_converged;
    return best;
}

// ---------------------------------------------------------------------------
// closed sets
// ---------------------------------------------------------------------------

enum class SetKind { HalfLineAbove, HalfLineBelow, NonnegativeCone, Subspace, Manifold };

/// A closed subset of the state space with a distance and, where available,
/// a projection.
class ClosedSet {
public:
    static ClosedSet half_line_above(double a) {
        ClosedSet s;
        s.kind_ = SetKind::HalfLineAbove;
        s.threshold_ = a;
        s.space_ = SpaceDescriptor::scalar_line();
        return s;
    }

    static ClosedSet half_line_below(double b) {
        ClosedSet s;
        s.kind_ = SetKind::HalfLineBelow;
        s.threshold_ = b;
        s.space_ = SpaceDescriptor::scalar_line();
        return s;
    }

    static ClosedSet nonnegative_cone(SpaceDescriptor space, ConeQpOptions opts = {}) {
        if (space.kind() != SpaceKind::Filipovic && space.kind() != SpaceKind::L2UnitInterval)
            throw SpaceMismatchError("nonnegative_cone: only over Filipovic or L2 spaces");
        ClosedSet s;
        s.kind_ = SetKind::NonnegativeCone;
        s.space_ = std::move(space);
        s.qp_opts_ = opts;
        return s;
    }

    static ClosedSet subspace(SpaceDescriptor space, std::vector<Curve> basis,
                              double condition_limit = 1e12) {
        if (basis.empty())
            throw ValidationError("subspace: empty basis");
        ClosedSet s;
        s.kind_ = SetKind::Subspace;
        s.space_ = std::move(space);
        s.basis_ = std::move(basis);
        DenseMatrix g = detail::gram_matrix(s.space_, s.basis_);
        s.gram_condition_ = symmetric_condition(g);
        if (!(s.gram_condition_ < condition_limit))
            throw ConditionError("subspace: basis nearly dependent, Gram condition " +
                                 std::to_string(s.gram_condition_));
        s.gram_ = std::move(g);
        return s;
    }

    static ClosedSet manifold(SpaceDescriptor space, ManifoldChart chart) {
        if (!chart.map || chart.dim == 0)
            throw ChartError("manifold: chart must provide a map and a positive dimension");
        ClosedSet s;
        s.kind_ = SetKind::Manifold;
        s.space_ = std::move(space);
        s.chart_ = std::move(chart);
        return s;
    }

    SetKind kind() const { return kind_; }
    double threshold() const { return threshold_; }
    const SpaceDescriptor& space() const { return space_; }
    const std::vector<Curve>& basis() const { return basis_; }
    const ManifoldChart& chart() const { return chart_; }
    double gram_condition() const { return gram_condition_; }

    void check_member_space(const Curve& h) const {
        switch (kind_) {
        case SetKind::HalfLineAbove:
        case SetKind::HalfLineBelow:
            if (!h.is_scalar())
                throw SpaceMismatchError("closed set: half-line sets take scalar states");
            return;
        default:
            if (space_.grid() && !same_grid(h.grid, space_.grid()))
                throw SpaceMismatchError("closed set: state grid differs from the set's space grid");
        }
    }

    ProjectionResult project(const Curve& h) const {
        check_member_space(h);
        switch (kind_) {
        case SetKind::HalfLineAbove: {
            ProjectionResult r;
            const double x = h.as_scalar();
            r.point = Curve::scalar(std::max(x, threshold_));
            r.distance = std::max(threshold_ - x, 0.0);
            return r;
        }
        case SetKind::HalfLineBelow: {
            ProjectionResult r;
            const double x = h.as_scalar();
            r.point = Curve::scalar(std::min(x, threshold_));
            r.distance = std::max(x - threshold_, 0.0);
            return r;
        }
        case SetKind::NonnegativeCone:
            return project_nonnegative_cone(space_, h, qp_opts_);
        case SetKind::Subspace: {
            std::vector<double> rhs(basis_.size());
            for (std::size_t i = 0; i < basis_.size(); ++i)
                rhs[i] = inner_product(space_, h, basis_[i]);
            const std::vector<double> coeff = spd_solve(gram_, std::move(rhs));
            Curve point = 0.0 * basis_[0];
            for (std::size_t i = 0; i < basis_.size(); ++i)
                axpy(point, coeff[i], basis_[i]);
            ProjectionResult r;
            r.distance = norm(space_, h - point);
            r.point = std::move(point);
            r.gram_condition = gram_condition_;
            return r;
        }
        case SetKind::Manifold:
            return project_manifold(space_, chart_, h);
        }
        throw DomainError("closed set: unknown kind");
    }

    double distance(const Curve& h) const { return project(h).distance; }

    /// Subspace coefficient solve, used by model builders.
    std::vector<double> subspace_coefficients(const Curve& h) const {
        if (kind_ != SetKind::Subspace)
            throw DomainError("subspace_coefficients: set is not a subspace");
        std::vector<double> rhs(basis_.size());
        for (std::size_t i = 0; i < basis_.size(); ++i)
            rhs[i] = inner_product(space_, h, basis_[i]);
        return spd_solve(gram_, std::move(rhs));
    }

private:
    SetKind kind_ = SetKind::HalfLineAbove;
    double threshold_ = 0.0;
    SpaceDescriptor space_ = SpaceDescriptor::scalar_line();
    std::vector<Curve> basis_;
    DenseMatrix gram_;
    double gram_condition_ = 1.0;
    ManifoldChart chart_;
    ConeQpOptions qp_opts_;
};

inline double distance(const ClosedSet& set, const Curve& h) { return set.distance(h); }
inline double distance(const ClosedSet& set, double x) { return set.distance(Curve::scalar(x)); }

} // namespace setdist
