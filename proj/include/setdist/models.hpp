#pragma once

#include "setdist/bounds.hpp"
#include "setdist/errors.hpp"
#include "setdist/evolution.hpp"
#include "setdist/interp.hpp"
#include "setdist/linalg.hpp"
#include "setdist/sets.hpp"
#include "setdist/spaces.hpp"
#include "setdist/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace setdist {

// ---------------------------------------------------------------------------
// shared building blocks
// ---------------------------------------------------------------------------

inline LinearOperatorPtr zero_generator() {
    auto op = std::make_shared<LinearOperator>();
    op->name = "0";
    op->apply = [](const Curve& h) { return 0.0 * h; };
    op->apply_adjoint = [](const Curve& h) { return 0.0 * h; };
    return op;
}

inline LinearOperatorPtr scalar_multiplication_generator(double a) {
    auto op = std::make_shared<LinearOperator>();
    op->name = "scalar *" + std::to_string(a);
    op->apply = [a](const Curve& h) { return a * h; };
    op->apply_adjoint = [a](const Curve& h) { return a * h; };
    return op;
}

inline SemigroupFn identity_semigroup() {
    return [](double, const Curve& h) { return h; };
}

inline SemigroupFn scalar_exponential_semigroup(double beta) {
    return [beta](double t, const Curve& h) { return std::exp(beta * t) * h; };
}

/// Translation semigroup S_t h = h(t + .) on a forward-curve grid: monotone
/// cubic resampling at the shifted nodes, constant extrapolation by the limit
/// at infinity beyond x_max. Preserves h(infinity).
inline SemigroupFn translation_semigroup(GridPtr grid) {
    return [grid](double t, const Curve& h) {
        if (!same_grid(h.grid, grid))
            throw GridMismatchError("translation semigroup: curve grid mismatch");
        if (t == 0.0)
            return h;
        const PchipInterpolant interp(grid->points(), h.values);
        const double x_max = grid->back();
        const double tail = h.value_at_infinity.value_or(h.values.back());
        std::vector<double> out(grid->size());
        for (std::size_t i = 0; i < grid->size(); ++i) {
            const double xq = (*grid)[i] + t;
            out[i] = xq >= x_max ? tail : interp(xq);
        }
        return Curve(grid, std::move(out), h.value_at_infinity);
    };
}

inline DriftFn constant_drift(Curve value) {
    return [value = std::move(value)](const Curve&) { return value; };
}

// ---------------------------------------------------------------------------
// half-line ODE (scalar)
// ---------------------------------------------------------------------------

/// xi' = beta xi with K = [a, infinity). Exposed in both equivalent wirings:
/// the generator form (S_t = e^{beta t}, zero drift) whose numeric flow is
/// exact, and the drift form (S = id, alpha(x) = beta x) that exercises the
/// first-order scheme.
struct HalfLineOdeScenario {
    EvolutionModel model;       // generator form
    EvolutionModel model_drift; // drift form
    ClosedSet set;
    double beta = 0.0, a = 0.0;
    double epsilon = 0.0; // beta^- a

    double exact_flow(double t, double x) const { return x * std::exp(beta * t); }
    double exact_distance_from_a(double t) const {
        return std::max(a - a * std::exp(beta * t), 0.0);
    }
};

inline HalfLineOdeScenario build_halfline_ode(double beta, double a) {
    if (!(a > 0.0))
        throw ValidationError("build_halfline_ode: a must be positive");
    HalfLineOdeScenario sc;
    sc.beta = beta;
    sc.a = a;
    sc.epsilon = std::max(-beta, 0.0) * a;
    sc.set = ClosedSet::half_line_above(a);

    sc.model.space = SpaceDescriptor::scalar_line();
    sc.model.semigroup = scalar_exponential_semigroup(beta);
    sc.model.generator = scalar_multiplication_generator(beta);
    sc.model.lipschitz = 0.0;
    sc.model.beta = beta;

    sc.model_drift.space = SpaceDescriptor::scalar_line();
    sc.model_drift.semigroup = identity_semigroup();
    sc.model_drift.generator = zero_generator();
    sc.model_drift.drift = [beta](const Curve& h) { return beta * h; };
    sc.model_drift.lipschitz = std::abs(beta);
    sc.model_drift.beta = 0.0;
    return sc;
}

// ---------------------------------------------------------------------------
// geometric Brownian motion (scalar)
// ---------------------------------------------------------------------------

/// dX = mu X dt + sigma X dW with K = (-infinity, 0]. K is invariant and the
/// expected distance law is exact: E[d_K(X(t;x))] = e^{mu t} d_K(x).
struct GbmScenario {
    StochModel model;
    ClosedSet set;
    double mu = 0.0, sigma = 0.0;

    double exact_solution(double t, double x, double w) const {
        return x * std::exp((mu - 0.5 * sigma * sigma) * t + sigma * w);
    }
    double exact_expected_distance(double t, double x) const {
        return std::exp(mu * t) * std::max(x, 0.0);
    }
    double exact_rho(double x) const { return 0.5 * sigma * sigma * x; }
};

inline GbmScenario build_gbm(double mu, double sigma) {
    GbmScenario sc;
    sc.mu = mu;
    sc.sigma = sigma;
    sc.set = ClosedSet::half_line_below(0.0);
    sc.model.det.space = SpaceDescriptor::scalar_line();
    sc.model.det.semigroup = identity_semigroup();
    sc.model.det.generator = zero_generator();
    sc.model.det.drift = [mu](const Curve& h) { return mu * h; };
    sc.model.det.lipschitz = std::abs(mu);
    sc.model.det.beta = 0.0;
    sc.model.noise.eigenvalues = {1.0};
    sc.model.noise.modes_r = 1;
    sc.model.noise.volatility_fields = {[sigma](const Curve& h) { return sigma * h; }};
    // rho left empty: derived by directional differences (exact for linear fields)
    sc.model.common_lipschitz = std::max(std::abs(mu - 0.5 * sigma * sigma), std::abs(sigma));
    return sc;
}

// ---------------------------------------------------------------------------
// HJMM forward-rate model on the weighted forward-curve space
// ---------------------------------------------------------------------------

/// No-arbitrage drift alpha(h) = sum_j sigma^j(h) * int_0^x sigma^j(h)(eta) d eta
/// for state-independent volatility curves, via cumulative trapezoid.
inline Curve hjm_no_arbitrage_drift(const std::vector<Curve>& sigma_curves) {
    if (sigma_curves.empty())
        throw ValidationError("hjm_no_arbitrage_drift: no volatility curves");
    Curve out = 0.0 * sigma_curves[0];
    out.value_at_infinity = 0.0;
    for (const Curve& s : sigma_curves) {
        const auto& x = s.grid->points();
        std::vector<double> cumulative(x.size(), 0.0);
        for (std::size_t i = 1; i < x.size(); ++i)
            cumulative[i] = cumulative[i - 1] +
                            0.5 * (s.values[i] + s.values[i - 1]) * (x[i] - x[i - 1]);
        for (std::size_t i = 0; i < x.size(); ++i)
            out.values[i] += s.values[i] * cumulative[i];
    }
    return out;
}

/// Extended Svensson scenario: translation semigroup on Filipovic(gamma),
/// constant volatility sigma = e^{-z6 .}, five-dimensional curve subspace
/// K = lin{1, e^{-z6 x}, x e^{-z6 x}, e^{-z7 x}, x e^{-z7 x}}.
struct HjmmScenario {
    StochModel model;
    ClosedSet set;
    SpaceDescriptor space;
    std::vector<Curve> basis;
    Curve alpha_hjm, sigma_curve;
    double z6 = 0.0, z7 = 0.0, gamma = 0.0;
    double epsilon_closed_form = 0.0; // (1/z6) ||e^{-2 z6 .} - e^{-z7 .}||, analytic integrals
    double epsilon_quadrature = 0.0;  // same norm through the grid quadrature
};

/// ||e^{-a x} - e^{-b x}||^2 in the equivalent inner product, by the analytic
/// weighted integrals: a^2/(2a-g) + b^2/(2b-g) - 2ab/(a+b-g).
inline double exp_difference_norm_sq(double a, double b, double gamma) {
    if (!(2.0 * a > gamma) || !(2.0 * b > gamma))
        throw ValidationError("exp_difference_norm_sq: need 2a > gamma and 2b > gamma");
    return a * a / (2.0 * a - gamma) + b * b / (2.0 * b - gamma) -
           2.0 * a * b / (a + b - gamma);
}

inline double hjmm_epsilon_closed_form(double z6, double z7, double gamma) {
    return std::sqrt(std::max(exp_difference_norm_sq(2.0 * z6, z7, gamma), 0.0)) / z6;
}

inline double hjmm_epsilon_quadrature(double z6, double z7, double gamma, const GridPtr& grid) {
    const SpaceDescriptor space = SpaceDescriptor::filipovic(gamma, grid);
    const Curve e2z6 = Curve::from_function(grid, [z6](double x) { return std::exp(-2.0 * z6 * x); }, 0.0);
    const Curve ez7 = Curve::from_function(grid, [z7](double x) { return std::exp(-z7 * x); }, 0.0);
    return norm(space, e2z6 - ez7) / z6;
}

inline HjmmScenario build_hjmm(double z6, double z7, double gamma, GridPtr grid) {
    if (!(z6 > 0.5 * gamma) || !(z7 > 0.5 * gamma))
        throw ValidationError("build_hjmm: membership requires z6, z7 > gamma/2");
    HjmmScenario sc;
    sc.z6 = z6;
    sc.z7 = z7;
    sc.gamma = gamma;
    sc.space = SpaceDescriptor::filipovic(gamma, grid);

    sc.basis.push_back(Curve::constant(grid, 1.0, 1.0));
    sc.basis.push_back(Curve::from_function(grid, [z6](double x) { return std::exp(-z6 * x); }, 0.0));
    sc.basis.push_back(
        Curve::from_function(grid, [z6](double x) { return x * std::exp(-z6 * x); }, 0.0));
    sc.basis.push_back(Curve::from_function(grid, [z7](double x) { return std::exp(-z7 * x); }, 0.0));
    sc.basis.push_back(
        Curve::from_function(grid, [z7](double x) { return x * std::exp(-z7 * x); }, 0.0));
    sc.set = ClosedSet::subspace(sc.space, sc.basis);

    sc.sigma_curve = sc.basis[1]; // e^{-z6 x}
    sc.alpha_hjm = Curve::from_function(
        grid, [z6](double x) { return (std::exp(-z6 * x) - std::exp(-2.0 * z6 * x)) / z6; }, 0.0);

    sc.model.det.space = sc.space;
    sc.model.det.semigroup = translation_semigroup(grid);
    sc.model.det.generator = translation_generator();
    sc.model.det.drift = constant_drift(sc.alpha_hjm);
    sc.model.det.lipschitz = 0.0;
    sc.model.det.drift_bound = norm(sc.space, sc.alpha_hjm);
    sc.model.det.beta = 0.0; // translation is a contraction in the equivalent norm
    sc.model.noise.eigenvalues = {1.0};
    sc.model.noise.modes_r = 1;
    sc.model.noise.volatility_fields = {constant_drift(sc.sigma_curve)};
    sc.model.correction_rho = [](const Curve& h) { return 0.0 * h; }; // constant volatility
    sc.model.common_lipschitz = 0.0;

    sc.epsilon_closed_form = hjmm_epsilon_closed_form(z6, z7, gamma);
    sc.epsilon_quadrature = hjmm_epsilon_quadrature(z6, z7, gamma, grid);
    return sc;
}

// ---------------------------------------------------------------------------
// negative-rate diagnostics on the nonnegative cone
// ---------------------------------------------------------------------------

struct NegativeRateReport {
    bool shape_holds = false;      // negative head, single crossing, positive tail
    double x0 = std::numeric_limits<double>::quiet_NaN();
    double norm_neg_part = 0.0;    // ||h^-|| through the space norm
    double norm_neg_part_formula = std::numeric_limits<double>::quiet_NaN();
    // sqrt(int_0^{x0} |h'|^2 e^{gamma x} dx), only when the shape holds
    double cone_distance = 0.0;
    bool cone_leq_neg_part = false;
    std::size_t qp_iterations = 0;
    bool qp_converged = false;
};

inline NegativeRateReport negative_rate_diagnostics(const Curve& h, double gamma,
                                                    const ConeQpOptions& opts = {}) {
    const SpaceDescriptor space = SpaceDescriptor::filipovic(gamma, h.grid);
    NegativeRateReport report;

    const auto& x = h.grid->points();
    const std::size_t n = h.size();
    // locate sign structure
    std::size_t first_nonneg = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (h.values[i] >= 0.0) {
            first_nonneg = i;
            break;
        }
    }
    if (first_nonneg > 0 && first_nonneg < n) {
        bool tail_ok = true;
        for (std::size_t i = first_nonneg; i < n; ++i)
            if (h.values[i] < 0.0) {
                tail_ok = false;
                break;
            }
        if (tail_ok) {
            report.shape_holds = true;
            const double y0 = h.values[first_nonneg - 1], y1 = h.values[first_nonneg];
            const double x0 = x[first_nonneg - 1], x1 = x[first_nonneg];
            report.x0 = y1 == y0 ? x1 : x0 + (x1 - x0) * (-y0) / (y1 - y0);
            // int_0^{x0} |h'|^2 e^{gamma x} dx by trapezoid up to the crossing
            const Curve dh = differentiate(h);
            double acc = 0.0;
            auto f = [&](std::size_t i) {
                return dh.values[i] * dh.values[i] * std::exp(gamma * x[i]);
            };
            for (std::size_t i = 1; i < first_nonneg; ++i)
                acc += 0.5 * (f(i) + f(i - 1)) * (x[i] - x[i - 1]);
            // partial cell to the interpolated crossing; h' there by the same stencil endpoints
            const double w = (report.x0 - x[first_nonneg - 1]) / (x[first_nonneg] - x[first_nonneg - 1]);
            const double f_cross = (1.0 - w) * f(first_nonneg - 1) + w * f(first_nonneg);
            acc += 0.5 * (f(first_nonneg - 1) + f_cross) * (report.x0 - x[first_nonneg - 1]);
            report.norm_neg_part_formula = std::sqrt(std::max(acc, 0.0));
        }
    }

    // h^- as a curve; its limit slot mirrors the clipped limit
    Curve hminus = h;
    for (double& v : hminus.values)
        v = std::max(-v, 0.0);
    hminus.value_at_infinity = std::max(-h.value_at_infinity.value_or(h.values.back()), 0.0);
    report.norm_neg_part = norm(space, hminus);

    const ProjectionResult pr = project_nonnegative_cone(space, h, opts);
    report.cone_distance = pr.distance;
    report.qp_iterations = pr.iterations;
    report.qp_converged = pr.converged;
    report.cone_leq_neg_part = pr.distance <= report.norm_neg_part + opts.tol;
    return report;
}

// ---------------------------------------------------------------------------
// second-order interest-rate model on L2((0,1))
// ---------------------------------------------------------------------------

inline double rate_eigenvalue(double kappa, int n) {
    const double npi = static_cast<double>(n) * 3.14159265358979323846;
    return -(1.0 + npi * npi * kappa * kappa) / (2.0 * kappa);
}

inline Curve rate_eigenfunction(const GridPtr& grid, double kappa, int n) {
    return Curve::from_function(grid, [kappa, n](double x) {
        return std::exp(-x / kappa) * std::sin(static_cast<double>(n) * 3.14159265358979323846 * x);
    });
}

/// Exact semigroup of A = (kappa/2) d2/dx2 + d/dx with Dirichlet walls. The
/// gauge h = e^{-x/kappa} g turns A into (kappa/2) d2/dx2 - 1/(2 kappa),
/// self-adjoint with sine eigenfunctions; on the uniform interior lattice the
/// discrete sine vectors are exactly orthogonal, so the propagator is a sine
/// transform, an exact eigenvalue decay e^{lambda_k t}, and the inverse
/// transform. S_0 = id and S_t S_s = S_{t+s} hold to roundoff.
class SineSpectralPropagator {
public:
    SineSpectralPropagator(GridPtr grid, double kappa) : grid_(std::move(grid)), kappa_(kappa) {
        const auto& x = grid_->points();
        n_ = x.size();
        const double dx = x[0];
        for (std::size_t i = 0; i < n_; ++i) {
            const double expected = dx * static_cast<double>(i + 1);
            if (std::abs(x[i] - expected) > 1e-12)
                throw DegenerateGridError("spectral propagator: grid must be the uniform interior lattice of (0,1)");
        }
        sine_.resize(n_ * n_);
        gauge_.resize(n_);
        gauge_inv_.resize(n_);
        lambda_.resize(n_);
        const double pi = 3.14159265358979323846;
        for (std::size_t k = 0; k < n_; ++k) {
            lambda_[k] = rate_eigenvalue(kappa_, static_cast<int>(k + 1));
            for (std::size_t i = 0; i < n_; ++i)
                sine_[k * n_ + i] = std::sin(static_cast<double>(k + 1) * pi * x[i]);
        }
        for (std::size_t i = 0; i < n_; ++i) {
            gauge_[i] = std::exp(x[i] / kappa_);
            gauge_inv_[i] = std::exp(-x[i] / kappa_);
        }
    }

    const GridPtr& grid() const { return grid_; }
    double eigenvalue(std::size_t mode_one_based) const { return lambda_[mode_one_based - 1]; }
    std::size_t modes() const { return n_; }

    std::vector<double> modal_coefficients(const Curve& h) const {
        std::vector<double> g(n_), c(n_);
        for (std::size_t i = 0; i < n_; ++i)
            g[i] = gauge_[i] * h.values[i];
        const double scale = 2.0 / static_cast<double>(n_ + 1);
        for (std::size_t k = 0; k < n_; ++k) {
            double s = 0.0;
            const double* row = &sine_[k * n_];
            for (std::size_t i = 0; i < n_; ++i)
                s += row[i] * g[i];
            c[k] = scale * s;
        }
        return c;
    }

    Curve from_modal(const std::vector<double>& c) const {
        std::vector<double> g(n_, 0.0);
        for (std::size_t k = 0; k < n_; ++k) {
            if (c[k] == 0.0) continue;
            const double* row = &sine_[k * n_];
            for (std::size_t i = 0; i < n_; ++i)
                g[i] += c[k] * row[i];
        }
        for (std::size_t i = 0; i < n_; ++i)
            g[i] *= gauge_inv_[i];
        return Curve(grid_, std::move(g));
    }

    Curve apply(double t, const Curve& h) const {
        if (!same_grid(h.grid, grid_))
            throw GridMismatchError("spectral propagator: curve grid mismatch");
        if (t == 0.0)
            return h;
        std::vector<double> c = modal_coefficients(h);
        for (std::size_t k = 0; k < n_; ++k)
            c[k] *= std::exp(lambda_[k] * t);
        return from_modal(c);
    }

private:
    GridPtr grid_;
    double kappa_;
    std::size_t n_ = 0;
    std::vector<double> sine_, gauge_, gauge_inv_, lambda_;
};

struct RateModelParams {
    double kappa = 0.5;
    std::vector<int> index_set;  // I, the retained eigenmode indices
    Curve alpha_curve;           // in D(A), typically not in K
    Curve sigma_curve;           // in K
    std::size_t n_modes = 0;     // N for modal diagnostics; 0 = max(I) + 10
};

/// Constants instantiating the subspace comparison bound at horizon T:
/// K1 = 6 T^2 ||pi||^2 (1 + L^2) + 6 T L^2,
/// K2 = 6 T ||pi||^2 (||B||^2 + L^2) + 6 L^2,
/// eta = T eps (for constant alpha, sigma the graph distance of the solution
/// to K grows at most linearly with slope eps pathwise), and
/// delta = eta (1 + sqrt(K1 e^{K2 T})).
struct XyBoundConstants {
    double pi_norm = 0.0;   // operator norm of the extended graph projection in L2
    double b_norm = 0.0;    // operator norm of A restricted to K
    double k1 = 0.0, k2 = 0.0;
    double eta = 0.0, delta = 0.0;
    double horizon = 0.0;
    double epsilon_graph = 0.0;
};

struct RateModelScenario {
    StochModel model;      // full dynamics, spectral semigroup
    StochModel projected;  // dY = pi_K(A Y + alpha) dt + sigma dW
    ClosedSet set;         // K in the L2 norm
    ClosedSet graph_set;   // K in the graph norm
    SpaceDescriptor space, graph_space;
    std::vector<Curve> basis;            // u_n, n in I
    std::vector<double> lambdas;         // matching eigenvalues
    std::shared_ptr<SineSpectralPropagator> propagator;
    RateModelParams params;
    double epsilon_graph = 0.0;          // d_K^{D(A)}(alpha)
    double epsilon_l2 = 0.0;             // d_K(alpha) in the L2 norm
    std::vector<double> b_coeff, c_coeff; // state-process data: b = phi^{-1}(pi_K(alpha)), c = phi^{-1}(sigma)
    double discarded_drift_energy = 0.0; // modal energy of alpha beyond n_modes
    double discarded_noise_energy = 0.0;

    XyBoundConstants xy_bound_constants(double horizon) const {
        XyBoundConstants c;
        c.horizon = horizon;
        c.epsilon_graph = epsilon_graph;
        const std::size_t m = basis.size();
        // Gram matrices in L2 of the graph-orthonormal basis e_i and of
        // w_i = e_i + A^T A e_i give ||pi|| = sqrt(lambda_max(C Ge));
        DenseMatrix graph_gram = detail::gram_matrix(graph_space, basis);
        DenseMatrix l_factor = graph_gram;
        if (!cholesky_factor(l_factor))
            throw ConditionError("xy_bound_constants: graph Gram not SPD");
        std::vector<Curve> e;
        for (std::size_t i = 0; i < m; ++i) {
            Curve ei = 0.0 * basis[0];
            axpy(ei, 1.0, basis[i]);
            for (std::size_t k = 0; k < i; ++k)
                axpy(ei, -l_factor(i, k), e[k]);
            e.push_back((1.0 / l_factor(i, i)) * ei);
        }
        const auto& gen = graph_space.generator();
        std::vector<Curve> w;
        for (std::size_t i = 0; i < m; ++i) {
            const Curve ae = gen->apply(e[i]);
            Curve wi = e[i];
            axpy(wi, 1.0, gen->apply_adjoint(ae));
            w.push_back(std::move(wi));
        }
        DenseMatrix ge = detail::gram_matrix(space, e);
        DenseMatrix cw = detail::gram_matrix(space, w);
        c.pi_norm = std::sqrt(std::max(generalized_max_eigenvalue(cw, ge), 0.0));
        // ||A restricted to K||: generalized Rayleigh max of Gram(A b_i) against Gram(b_i)
        std::vector<Curve> ab;
        for (const auto& b : basis)
            ab.push_back(gen->apply(b));
        DenseMatrix ga = detail::gram_matrix(space, ab);
        DenseMatrix gb = detail::gram_matrix(space, basis);
        c.b_norm = std::sqrt(std::max(generalized_rayleigh_max(ga, gb), 0.0));
        const double lip = model.common_lipschitz;
        c.k1 = 6.0 * horizon * horizon * c.pi_norm * c.pi_norm * (1.0 + lip * lip) +
               6.0 * horizon * lip * lip;
        c.k2 = 6.0 * horizon * c.pi_norm * c.pi_norm * (c.b_norm * c.b_norm + lip * lip) +
               6.0 * lip * lip;
        c.eta = horizon * epsilon_graph;
        c.delta = c.eta * (1.0 + std::sqrt(c.k1 * std::exp(c.k2 * horizon)));
        return c;
    }
};

inline RateModelScenario build_rate_model(const RateModelParams& params, GridPtr grid) {
    if (params.index_set.empty())
        throw ValidationError("build_rate_model: empty index set");
    if (!(params.kappa > 0.0))
        throw ValidationError("build_rate_model: kappa must be positive");
    RateModelScenario sc;
    sc.params = params;
    int max_index = 0;
    for (int n : params.index_set) {
        if (n < 1)
            throw ValidationError("build_rate_model: mode indices must be positive");
        max_index = std::max(max_index, n);
    }
    if (sc.params.n_modes == 0)
        sc.params.n_modes = static_cast<std::size_t>(max_index) + 10;

    sc.space = SpaceDescriptor::l2_unit_interval(grid);
    auto gen = second_order_generator(params.kappa, grid);
    sc.graph_space = SpaceDescriptor::graph_norm(sc.space, gen);
    sc.propagator = std::make_shared<SineSpectralPropagator>(grid, params.kappa);

    for (int n : params.index_set) {
        sc.basis.push_back(rate_eigenfunction(grid, params.kappa, n));
        sc.lambdas.push_back(rate_eigenvalue(params.kappa, n));
    }
    sc.set = ClosedSet::subspace(sc.space, sc.basis);
    sc.graph_set = ClosedSet::subspace(sc.graph_space, sc.basis);

    // constants of the dynamics
    Curve alpha = params.alpha_curve;
    Curve sigma = params.sigma_curve;
    if (!same_grid(alpha.grid, grid) || !same_grid(sigma.grid, grid))
        throw GridMismatchError("build_rate_model: alpha/sigma grids differ from the model grid");
    gen->check_domain(alpha);
    gen->check_domain(sigma);
    {
        const double sn = norm(sc.space, sigma);
        const double sd = sc.set.distance(sigma);
        if (sn > 0.0 && sd > 1e-6 * sn)
            throw ValidationError("build_rate_model: sigma must lie in the retained eigenspace");
    }

    sc.epsilon_graph = sc.graph_set.distance(alpha);
    sc.epsilon_l2 = sc.set.distance(alpha);

    // modal truncation diagnostics
    {
        const auto ca = sc.propagator->modal_coefficients(alpha);
        const auto cs = sc.propagator->modal_coefficients(sigma);
        // modal energy in the gauge-transformed sine basis: |c_k|^2 * ||u_k||_{L2}^2 proxy;
        // reported as plain coefficient tail energy
        for (std::size_t k = sc.params.n_modes; k < ca.size(); ++k) {
            sc.discarded_drift_energy += ca[k] * ca[k];
            sc.discarded_noise_energy += cs[k] * cs[k];
        }
    }

    auto propagator = sc.propagator;
    sc.model.det.space = sc.space;
    sc.model.det.semigroup = [propagator](double t, const Curve& h) { return propagator->apply(t, h); };
    sc.model.det.generator = gen;
    sc.model.det.drift = constant_drift(alpha);
    sc.model.det.lipschitz = 0.0;
    sc.model.det.drift_bound = norm(sc.space, alpha);
    sc.model.det.beta = 0.0; // A is dissipative with Dirichlet walls
    sc.model.noise.eigenvalues = {1.0};
    sc.model.noise.modes_r = 1;
    sc.model.noise.volatility_fields = {constant_drift(sigma)};
    sc.model.correction_rho = [](const Curve& h) { return 0.0 * h; };
    sc.model.common_lipschitz = 0.0;

    // projected dynamics dY = pi_K^{D(A)}((kappa/2) Y'' + Y' + alpha) dt + sigma dW
    const SpaceDescriptor graph_space = sc.graph_space;
    const std::vector<Curve> basis = sc.basis;
    auto projected_drift = [graph_space, basis, gen, alpha](const Curve& h) {
        Curve ahpa = gen->apply(h);
        axpy(ahpa, 1.0, alpha);
        return graph_norm_projection_extended(graph_space, basis, ahpa);
    };
    sc.projected.det.space = sc.space;
    sc.projected.det.semigroup = identity_semigroup();
    sc.projected.det.generator = zero_generator();
    sc.projected.det.drift = projected_drift;
    sc.projected.det.beta = 0.0;
    sc.projected.noise = sc.model.noise;
    sc.projected.correction_rho = sc.model.correction_rho;
    sc.projected.common_lipschitz = 0.0;

    // finite-dimensional state-process data
    {
        const Curve pi_alpha = graph_norm_projection_extended(sc.graph_space, sc.basis, alpha);
        sc.b_coeff = sc.graph_set.subspace_coefficients(pi_alpha);
        sc.c_coeff = sc.graph_set.subspace_coefficients(sigma);
        // projected model Lipschitz in the L2 norm: ||pi|| ||A|_K||
        const XyBoundConstants xc = sc.xy_bound_constants(1.0);
        sc.projected.det.lipschitz = xc.pi_norm * xc.b_norm;
    }
    return sc;
}

// ---------------------------------------------------------------------------
// explicit finite-dimensional state process for the rate model
// ---------------------------------------------------------------------------

struct StateProcessResult {
    std::vector<double> times;                    // Euler node times
    std::vector<std::vector<double>> z_explicit;  // per node, one coefficient per mode
    std::vector<std::vector<double>> z_euler;
    double sup_gap = 0.0;
};

/// Closed-form OU coordinates
///   Z(t) = e^{Bt} [ z + e^{-Bt} c W(t) + int_0^t e^{-Bs} (b + B c W(s)) ds ]
/// against Euler-Maruyama of dZ = (BZ + b) dt + c dW on the same path. The
/// quadrature runs over the panel's fine grid in the algebraically identical
/// form int_0^t e^{B(t-s)} (b + B c W(s)) ds, which keeps every exponent
/// nonpositive.
inline StateProcessResult projected_state_process(const RateModelScenario& sc,
                                                  const std::vector<double>& z0,
                                                  const BrownianPanel& panel,
                                                  std::size_t euler_steps) {
    const std::size_t m = sc.basis.size();
    if (z0.size() != m)
        throw ValidationError("projected_state_process: z0 dimension mismatch");
    if (panel.modes() < 1)
        throw ValidationError("projected_state_process: panel has no Brownian mode");
    const std::size_t fine = panel.fine_steps;
    if (euler_steps < 1 || fine % euler_steps != 0)
        throw ValidationError("projected_state_process: euler steps must divide the panel resolution");
    const double horizon = panel.horizon;
    const double dt = horizon / static_cast<double>(euler_steps);
    const double fdt = panel.fine_dt();
    const std::size_t per = fine / euler_steps;

    StateProcessResult out;
    out.times.resize(euler_steps + 1);
    out.z_explicit.assign(euler_steps + 1, std::vector<double>(m, 0.0));
    out.z_euler.assign(euler_steps + 1, std::vector<double>(m, 0.0));

    // explicit formula: I_i(t) accumulated cell by cell with the decaying kernel
    std::vector<double> I(m, 0.0);
    out.z_explicit[0] = z0;
    out.times[0] = 0.0;
    std::size_t node = 1;
    for (std::size_t i = 0; i < m; ++i)
        out.z_euler[0][i] = z0[i];
    for (std::size_t k = 0; k < fine; ++k) {
        const double w0 = panel.value(0, k);
        const double w1 = panel.value(0, k + 1);
        for (std::size_t i = 0; i < m; ++i) {
            const double lam = sc.lambdas[i];
            const double decay = std::exp(lam * fdt);
            const double f0 = sc.b_coeff[i] + lam * sc.c_coeff[i] * w0;
            const double f1 = sc.b_coeff[i] + lam * sc.c_coeff[i] * w1;
            I[i] = decay * I[i] + 0.5 * fdt * (decay * f0 + f1);
        }
        if ((k + 1) % per == 0) {
            const double t = fdt * static_cast<double>(k + 1);
            out.times[node] = t;
            for (std::size_t i = 0; i < m; ++i) {
                const double lam = sc.lambdas[i];
                out.z_explicit[node][i] = std::exp(lam * t) * z0[i] + sc.c_coeff[i] * w1 + I[i];
            }
            ++node;
        }
    }

    // Euler-Maruyama on the coarse grid, same Brownian path
    std::vector<double> z = z0;
    for (std::size_t k = 0; k < euler_steps; ++k) {
        const double dw = panel.value(0, (k + 1) * per) - panel.value(0, k * per);
        for (std::size_t i = 0; i < m; ++i)
            z[i] += dt * (sc.lambdas[i] * z[i] + sc.b_coeff[i]) + sc.c_coeff[i] * dw;
        out.z_euler[k + 1] = z;
    }

    for (std::size_t k = 0; k <= euler_steps; ++k)
        for (std::size_t i = 0; i < m; ++i)
            out.sup_gap = std::max(out.sup_gap,
                                   std::abs(out.z_euler[k][i] - out.z_explicit[k][i]));
    return out;
}

// ---------------------------------------------------------------------------
// unbounded evaluation functional on the forward-curve space
// ---------------------------------------------------------------------------

struct UnboundedFunctionalRow {
    std::size_t n = 0;
    double norm_sq = 0.0;       // ||g_n||^2 by quadrature of the construction derivative
    double deriv_at_zero = 0.0; // g_n'(0) = sqrt(n), exact by construction
    double ratio = 0.0;         // deriv_at_zero / ||g_n||
};

/// The family g_n(x) = int_0^x f_n - int_0^infty f_n with
/// f_n = sqrt((n - n^2 x) 1_{[0,1/n]}) has g_n'(0) = sqrt(n) while
/// ||g_n||^2 <= e^gamma / 2: the derivative-at-zero functional is unbounded.
/// The norm uses the construction derivative f_n on an n-adapted grid
/// (f_n^2 is linear there, so the quadrature only sees the weight's curvature).
inline std::vector<UnboundedFunctionalRow> unbounded_functional_demo(double gamma,
                                                                     std::size_t n_max) {
    if (n_max < 4)
        throw ValidationError("unbounded_functional_demo: n_max must be >= 4");
    std::vector<std::size_t> ns;
    for (std::size_t n = 1; n < n_max; n *= 2)
        ns.push_back(n);
    ns.push_back(n_max);
    std::vector<UnboundedFunctionalRow> rows;
    const std::size_t cells = 512;
    for (std::size_t n : ns) {
        UnboundedFunctionalRow row;
        row.n = n;
        row.deriv_at_zero = std::sqrt(static_cast<double>(n));
        const double support = 1.0 / static_cast<double>(n);
        const double dx = support / static_cast<double>(cells);
        double acc = 0.0;
        auto f_sq = [&](double x) {
            return (static_cast<double>(n) - static_cast<double>(n) * static_cast<double>(n) * x) *
                   std::exp(gamma * x);
        };
        for (std::size_t k = 0; k < cells; ++k) {
            const double x0 = dx * static_cast<double>(k);
            const double x1 = std::min(x0 + dx, support);
            acc += 0.5 * (f_sq(x0) + f_sq(x1)) * (x1 - x0);
        }
        row.norm_sq = acc;
        row.ratio = row.deriv_at_zero / std::sqrt(std::max(row.norm_sq, 1e-300));
        rows.push_back(row);
    }
    return rows;
}

} // namespace setdist
