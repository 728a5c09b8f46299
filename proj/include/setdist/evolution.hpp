#pragma once

#include "setdist/bounds.hpp"
#include "setdist/errors.hpp"
#include "setdist/grid.hpp"
#include "setdist/sets.hpp"
#include "setdist/spaces.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace setdist {

using DriftFn = std::function<Curve(const Curve&)>;
using SemigroupFn = std::function<Curve(double, const Curve&)>;

/// Mild-solution model d xi = A xi + alpha(xi): semigroup action (exact where
/// a closed form exists), generator handle, Lipschitz drift, growth data.
struct EvolutionModel {
    SpaceDescriptor space = SpaceDescriptor::scalar_line();
    SemigroupFn semigroup;           // S_t, required
    LinearOperatorPtr generator;     // optional (finite-difference action)
    DriftFn drift;                   // alpha; empty means zero drift
    double lipschitz = 0.0;          // L with ||alpha(x)-alpha(y)|| <= L ||x-y||
    std::optional<double> drift_bound; // B with ||alpha|| <= B, when available
    double beta = 0.0;               // pseudo-contractivity exponent ||S_t|| <= e^{beta t}

    Curve apply_semigroup(double t, const Curve& h) const {
        if (!semigroup)
            throw DomainError("evolution model: missing semigroup action");
        return semigroup(t, h);
    }
    Curve apply_drift(const Curve& h) const {
        if (!drift)
            return 0.0 * h;
        return drift(h);
    }
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Curve> states;
    std::string scheme;
    double step = 0.0;

    const Curve& state_at(double t, double tol = 1e-9) const {
        for (std::size_t i = 0; i < times.size(); ++i)
            if (std::abs(times[i] - t) <= tol)
                return states[i];
        throw ValidationError("trajectory: no state at requested time");
    }
};

/// alpha(t,x) = a_n(x) on [t_n, t_{n+1}); breakpoints[0] must be the start of
/// the piecewise clock (0 for the homogeneous embedding).
struct PiecewiseDrift {
    std::vector<double> breakpoints;
    std::vector<DriftFn> pieces;

    const DriftFn& piece_at(double t) const {
        if (pieces.empty() || breakpoints.size() != pieces.size())
            throw ValidationError("piecewise drift: breakpoints/pieces mismatch");
        std::size_t idx = 0;
        for (std::size_t i = 0; i < breakpoints.size(); ++i) {
            if (t >= breakpoints[i] - 1e-15)
                idx = i;
            else
                break;
        }
        return pieces[idx];
    }
};

namespace detail {

inline void check_finite(const Curve& c, std::size_t step, const char* who) {
    if (!c.finite())
        throw DivergenceError(std::string(who) + ": state diverged (NaN/overflow) at step " +
                              std::to_string(step));
}

} // namespace detail

/// Exponential Euler for the time-homogeneous problem:
///   xi_{k+1} = S_dt ( xi_k + dt * alpha(xi_k) ).
/// First order globally; the semigroup factor is applied exactly.
inline Trajectory solve_mild(const EvolutionModel& model, const Curve& x, double horizon,
                             std::size_t steps) {
    if (steps < 1)
        throw ValidationError("solve_mild: steps must be >= 1");
    if (!(horizon > 0.0))
        throw ValidationError("solve_mild: horizon must be positive");
    const double dt = horizon / static_cast<double>(steps);
    Trajectory traj;
    traj.scheme = "exponential-euler";
    traj.step = dt;
    traj.times.reserve(steps + 1);
    traj.states.reserve(steps + 1);
    traj.times.push_back(0.0);
    traj.states.push_back(x);
    Curve state = x;
    for (std::size_t k = 0; k < steps; ++k) {
        Curve stage = state;
        if (model.drift)
            axpy(stage, dt, model.drift(state));
        state = model.apply_semigroup(dt, stage);
        detail::check_finite(state, k + 1, "solve_mild");
        traj.times.push_back(dt * static_cast<double>(k + 1));
        traj.states.push_back(state);
    }
    traj.times.back() = horizon;
    return traj;
}

/// Exponential Euler for the inhomogeneous problem started at time s with a
/// piecewise-constant-in-time drift. The step grid is the uniform grid of
/// `steps` steps on [s, horizon] refined to include every breakpoint, so each
/// step lies inside one piece.
inline Trajectory solve_mild_inhomogeneous(const EvolutionModel& model, const PiecewiseDrift& drift,
                                           double s, const Curve& x, double horizon,
                                           std::size_t steps) {
    if (!(horizon > s))
        throw ValidationError("solve_mild_inhomogeneous: need horizon > start time");
    if (steps < 1)
        throw ValidationError("solve_mild_inhomogeneous: steps must be >= 1");
    std::vector<double> grid;
    grid.reserve(steps + drift.breakpoints.size() + 2);
    const double dt = (horizon - s) / static_cast<double>(steps);
    for (std::size_t k = 0; k <= steps; ++k)
        grid.push_back(s + dt * static_cast<double>(k));
    grid.back() = horizon;
    for (double b : drift.breakpoints)
        if (b > s && b < horizon)
            grid.push_back(b);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-14; }),
               grid.end());

    Trajectory traj;
    traj.scheme = "exponential-euler-piecewise";
    traj.step = dt;
    traj.times = grid;
    traj.states.reserve(grid.size());
    traj.states.push_back(x);
    Curve state = x;
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        const double h = grid[k + 1] - grid[k];
        const DriftFn& a = drift.piece_at(grid[k]);
        Curve stage = state;
        if (a)
            axpy(stage, h, a(state));
        state = model.apply_semigroup(h, stage);
        detail::check_finite(state, k + 1, "solve_mild_inhomogeneous");
        traj.states.push_back(state);
    }
    return traj;
}

// ---------------------------------------------------------------------------
// distance-bound verification along trajectories
// ---------------------------------------------------------------------------

struct PdeBoundRow {
    double t = 0.0;
    double lhs = 0.0;        // d_K(xi(t))
    double rhs_lipschitz = 0.0; // e^{(beta+L)t} d_K(x) + varphi_{beta+L}(t) eps
    double rhs_bounded = 0.0;   // e^{beta t} d_K(x) + varphi_beta(t)(eps + 2B), when B is known
    bool has_bounded = false;
};

struct PdeBoundReport {
    std::vector<PdeBoundRow> rows;
    double d0 = 0.0;
    double epsilon = 0.0;
    double max_violation_lipschitz = 0.0; // max over t of lhs - rhs (positive = violation)
    double max_violation_bounded = 0.0;
    bool has_bounded = false;
    // the growth constant in the semigroup estimate is fixed at M = 1
    // (pseudo-contractive case); the general M > 1 chain is out of scope
    std::string growth_constant_note = "M=1 (pseudo-contractive)";
};

/// Tracks d_K(xi(t)) against the tangency-slack bounds along a numerically
/// solved trajectory. Reporting only; no assertion.
inline PdeBoundReport verify_pde_bound(const EvolutionModel& model, const ClosedSet& set,
                                       const Curve& x, double epsilon, double horizon,
                                       std::size_t steps) {
    const Trajectory traj = solve_mild(model, x, horizon, steps);
    PdeBoundReport report;
    report.epsilon = epsilon;
    report.d0 = set.distance(x);
    report.has_bounded = model.drift_bound.has_value();
    report.max_violation_lipschitz = -std::numeric_limits<double>::infinity();
    report.max_violation_bounded = -std::numeric_limits<double>::infinity();
    const double gl = model.beta + model.lipschitz;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        PdeBoundRow row;
        row.t = traj.times[i];
        row.lhs = set.distance(traj.states[i]);
        row.rhs_lipschitz = std::exp(gl * row.t) * report.d0 + varphi(gl, row.t) * epsilon;
        report.max_violation_lipschitz =
            std::max(report.max_violation_lipschitz, row.lhs - row.rhs_lipschitz);
        if (report.has_bounded) {
            const double b = *model.drift_bound;
            row.has_bounded = true;
            row.rhs_bounded = std::exp(model.beta * row.t) * report.d0 +
                              varphi(model.beta, row.t) * (epsilon + 2.0 * b);
            report.max_violation_bounded =
                std::max(report.max_violation_bounded, row.lhs - row.rhs_bounded);
        }
        report.rows.push_back(row);
    }
    return report;
}

} // namespace setdist
