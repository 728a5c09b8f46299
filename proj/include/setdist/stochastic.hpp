#pragma once

#include "setdist/bounds.hpp"
#include "setdist/errors.hpp"
#include "setdist/evolution.hpp"
#include "setdist/parallel.hpp"
#include "setdist/rng.hpp"
#include "setdist/sets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace setdist {

// ---------------------------------------------------------------------------
// noise specification and Brownian panels
// ---------------------------------------------------------------------------

/// Truncated Q-Wiener data: covariance eigenvalues lambda_j (finitely many
/// stored, summable), the active truncation r, and the volatility fields
/// sigma^j = Sigma g_j (the sqrt(lambda_j) scaling is already inside the
/// fields; the driving coordinates B^j are standard Wiener processes).
struct NoiseSpec {
    std::vector<double> eigenvalues;
    std::size_t modes_r = 0;
    std::vector<DriftFn> volatility_fields;

    void validate() const {
        if (modes_r < 1 || modes_r > volatility_fields.size())
            throw ValidationError("noise: modes_r must be in [1, #volatility fields]");
        if (eigenvalues.size() < modes_r)
            throw ValidationError("noise: eigenvalue list shorter than modes_r");
        double total = 0.0;
        for (double l : eigenvalues) {
            if (!(l > 0.0))
                throw ValidationError("noise: eigenvalues must be positive");
            total += l;
        }
        if (!std::isfinite(total))
            throw ValidationError("noise: eigenvalue sum not finite");
    }

    /// Discarded-tail energy sum_{j>r} lambda_j over the stored modes.
    double discarded_eigenvalue_tail() const {
        double s = 0.0;
        for (std::size_t j = modes_r; j < eigenvalues.size(); ++j)
            s += eigenvalues[j];
        return s;
    }
};

/// r independent standard Wiener paths stored at a fine uniform resolution.
/// Coarse interpolation cells (the m of the piecewise-linear interpolant) are
/// aggregated from the same fine path, so every consumer -- the Ito solver,
/// the Wong-Zakai solver at any divisor m' of the fine grid -- sees one and
/// the same Brownian motion. Reproducible from (seed, path_index) alone.
struct BrownianPanel {
    double horizon = 0.0;
    std::size_t m = 1;           // interpolation partition count
    std::size_t fine_steps = 1;  // stored resolution, multiple of m
    std::vector<std::vector<double>> paths; // r x (fine_steps+1), B^j(0) = 0
    std::uint64_t seed = 0;
    std::size_t path_index = 0;

    std::size_t modes() const { return paths.size(); }
    double delta_m() const { return horizon / static_cast<double>(m); }
    double fine_dt() const { return horizon / static_cast<double>(fine_steps); }

    double value(std::size_t j, std::size_t fine_index) const { return paths[j][fine_index]; }

    /// B^j(t) by linear interpolation on the fine grid (exact at nodes).
    double value_at(std::size_t j, double t) const {
        const double u = t / fine_dt();
        const auto i = static_cast<std::size_t>(std::min(std::max(u, 0.0),
                                                         static_cast<double>(fine_steps) - 1e-12));
        const double w = u - static_cast<double>(i);
        return (1.0 - w) * paths[j][i] + w * paths[j][i + 1];
    }

    std::size_t fine_per_cell(std::size_t cells) const {
        if (cells < 1 || fine_steps % cells != 0)
            throw ValidationError("panel: cell count must divide the fine resolution");
        return fine_steps / cells;
    }

    double increment(std::size_t j, std::size_t cells, std::size_t k) const {
        const std::size_t q = fine_per_cell(cells);
        return paths[j][(k + 1) * q] - paths[j][k * q];
    }

    /// Piecewise-constant slope of the interpolant on cell k of the given
    /// partition: (B([t]^+) - B([t]^-)) / delta.
    double slope(std::size_t j, std::size_t cells, std::size_t k) const {
        return increment(j, cells, k) / (horizon / static_cast<double>(cells));
    }

    /// sup_t |Bdot^j| over [0,T]; exact for the piecewise-linear interpolant.
    double max_abs_slope(std::size_t j, std::size_t cells) const {
        double s = 0.0;
        for (std::size_t k = 0; k < cells; ++k)
            s = std::max(s, std::abs(slope(j, cells, k)));
        return s;
    }
};

inline BrownianPanel sample_brownian_panel(const NoiseSpec& noise, double horizon, std::size_t m,
                                           std::uint64_t seed, std::size_t path_index = 0,
                                           std::size_t fine_steps = 0) {
    noise.validate();
    if (m < 1)
        throw ValidationError("sample_brownian_panel: m must be >= 1");
    if (!(horizon > 0.0))
        throw ValidationError("sample_brownian_panel: horizon must be positive");
    if (fine_steps == 0)
        fine_steps = m;
    if (fine_steps % m != 0)
        throw ValidationError("sample_brownian_panel: fine resolution must be a multiple of m");
    BrownianPanel panel;
    panel.horizon = horizon;
    panel.m = m;
    panel.fine_steps = fine_steps;
    panel.seed = seed;
    panel.path_index = path_index;
    panel.paths.assign(noise.modes_r, std::vector<double>(fine_steps + 1, 0.0));
    const double sdt = std::sqrt(horizon / static_cast<double>(fine_steps));
    for (std::size_t j = 0; j < noise.modes_r; ++j) {
        RngStream rng(seed, path_index, j);
        double b = 0.0;
        for (std::size_t i = 1; i <= fine_steps; ++i) {
            b += sdt * rng.next_normal();
            panel.paths[j][i] = b;
        }
    }
    return panel;
}

// ---------------------------------------------------------------------------
// stochastic model
// ---------------------------------------------------------------------------

struct StochModel {
    EvolutionModel det;    // semigroup, generator, drift alpha, beta
    NoiseSpec noise;
    DriftFn correction_rho; // empty: derived by directional finite differences
    // common Lipschitz constant of alpha - rho and every sigma^j; enters the
    // pathwise random Lipschitz field through Z = L sum_j sup|Bdot^j|
    double common_lipschitz = 0.0;
    double fd_epsilon = 1e-6; // directional-difference step for derived rho

    Curve sigma_field(std::size_t j, const Curve& h) const {
        return noise.volatility_fields[j](h);
    }

    Curve rho(const Curve& h) const;
};

/// rho(h) = (1/2) sum_{j<=r} D sigma^j(h) sigma^j(h), with each directional
/// derivative by a central difference along sigma^j(h). The truncation at
/// modes_r mirrors the noise truncation.
inline Curve stratonovich_correction(const StochModel& model, const Curve& h) {
    Curve out = 0.0 * h;
    double hscale = 0.0;
    for (double v : h.values)
        hscale = std::max(hscale, std::abs(v));
    for (std::size_t j = 0; j < model.noise.modes_r; ++j) {
        const Curve sj = model.sigma_field(j, h);
        double sscale = 0.0;
        for (double v : sj.values)
            sscale = std::max(sscale, std::abs(v));
        if (sscale == 0.0)
            continue;
        const double eps = model.fd_epsilon * (1.0 + hscale) / (1.0 + sscale);
        Curve hp = h;
        axpy(hp, eps, sj);
        Curve hm = h;
        axpy(hm, -eps, sj);
        const Curve diff = model.sigma_field(j, hp) - model.sigma_field(j, hm);
        axpy(out, 0.5 / (2.0 * eps), diff);
    }
    return out;
}

inline Curve StochModel::rho(const Curve& h) const {
    if (correction_rho)
        return correction_rho(h);
    return stratonovich_correction(*this, h);
}

// ---------------------------------------------------------------------------
// Ito solver (exponential Euler-Maruyama)
// ---------------------------------------------------------------------------

namespace detail {

/// Core stepping loop; obs(step_index, t, state) fires at every node
/// including the initial one.
template <typename Observer>
void run_spde_path(const StochModel& model, const Curve& x, const BrownianPanel& panel,
                   std::size_t steps, Observer&& obs) {
    if (steps < 1)
        throw ValidationError("solve_spde: steps must be >= 1");
    if (steps % panel.m != 0)
        throw ValidationError("solve_spde: steps must be a multiple of the panel's m");
    (void)panel.fine_per_cell(steps); // fine grid must refine the step grid
    const double horizon = panel.horizon;
    const double dt = horizon / static_cast<double>(steps);
    Curve state = x;
    obs(std::size_t{0}, 0.0, state);
    const std::size_t r = model.noise.modes_r;
    for (std::size_t k = 0; k < steps; ++k) {
        Curve stage = state;
        if (model.det.drift)
            axpy(stage, dt, model.det.drift(state));
        for (std::size_t j = 0; j < r; ++j) {
            const double db = panel.increment(j, steps, k);
            axpy(stage, db, model.sigma_field(j, state));
        }
        state = model.det.apply_semigroup(dt, stage);
        check_finite(state, k + 1, "solve_spde");
        obs(k + 1, dt * static_cast<double>(k + 1), state);
    }
}

} // namespace detail

/// Strong pathwise solve of dX = (AX + alpha(X)) dt + sum_j sigma^j(X) dB^j:
///   X_{k+1} = S_dt ( X_k + dt alpha(X_k) + sum_j sigma^j(X_k) dB^j_k ).
inline Trajectory solve_spde(const StochModel& model, const Curve& x, double horizon,
                             std::size_t steps, const BrownianPanel& panel) {
    if (std::abs(horizon - panel.horizon) > 1e-12 * std::max(1.0, panel.horizon))
        throw ValidationError("solve_spde: horizon differs from the panel's horizon");
    Trajectory traj;
    traj.scheme = "exponential-euler-maruyama";
    traj.step = horizon / static_cast<double>(steps);
    traj.times.reserve(steps + 1);
    traj.states.reserve(steps + 1);
    detail::run_spde_path(model, x, panel, steps, [&](std::size_t, double t, const Curve& s) {
        traj.times.push_back(t);
        traj.states.push_back(s);
    });
    traj.times.back() = horizon;
    return traj;
}

// ---------------------------------------------------------------------------
// Wong-Zakai approximation
// ---------------------------------------------------------------------------

/// Mild solution of the random PDE obtained by replacing the Brownian paths
/// with their piecewise-linear interpolants:
///   xi' = A xi + alpha(xi) - rho(xi) + sum_j sigma^j(xi) Bdot_m^j(t).
/// Delegates to the piecewise-constant-drift solver with one piece per
/// interpolation cell; deterministic given the panel.
inline Trajectory solve_wong_zakai(const StochModel& model, const Curve& x,
                                   const BrownianPanel& panel, std::size_t substeps_per_cell = 8) {
    substeps_per_cell = std::max<std::size_t>(substeps_per_cell, 4);
    const std::size_t m = panel.m;
    const double delta = panel.delta_m();
    PiecewiseDrift drift;
    drift.breakpoints.resize(m);
    drift.pieces.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
        drift.breakpoints[k] = delta * static_cast<double>(k);
        std::vector<double> slopes(model.noise.modes_r);
        for (std::size_t j = 0; j < model.noise.modes_r; ++j)
            slopes[j] = panel.slope(j, m, k);
        drift.pieces[k] = [&model, slopes](const Curve& h) {
            Curve a = model.det.drift ? model.det.drift(h) : 0.0 * h;
            axpy(a, -1.0, model.rho(h));
            for (std::size_t j = 0; j < slopes.size(); ++j)
                axpy(a, slopes[j], model.sigma_field(j, h));
            return a;
        };
    }
    Trajectory traj = solve_mild_inhomogeneous(model.det, drift, 0.0, x, panel.horizon,
                                               m * substeps_per_cell);
    traj.scheme = "wong-zakai";
    return traj;
}

// ---------------------------------------------------------------------------
// pathwise Wong-Zakai bound check
// ---------------------------------------------------------------------------

struct WzBoundRow {
    double t = 0.0, lhs = 0.0, rhs = 0.0;
};

struct WzBoundReport {
    double z_value = 0.0;  // path-specific Z = L sum_j sup|Bdot^j|
    double d0 = 0.0;
    double max_violation = -std::numeric_limits<double>::infinity();
    std::vector<WzBoundRow> rows;
};

/// Checks d_K(xi(t)) <= e^{(gamma+Z)t} d_K(x) + varphi_{gamma+Z}(t) eps along
/// a Wong-Zakai trajectory, with the exact path value of Z. `stride` thins
/// the node set for expensive distance solvers (the final node always
/// included).
inline WzBoundReport pathwise_wz_bound_check(const Trajectory& traj, const ClosedSet& set,
                                             const BrownianPanel& panel, double gamma,
                                             double epsilon, double lipschitz,
                                             std::size_t stride = 1) {
    WzBoundReport report;
    double ysum = 0.0;
    for (std::size_t j = 0; j < panel.modes(); ++j)
        ysum += panel.max_abs_slope(j, panel.m);
    report.z_value = lipschitz * ysum;
    report.d0 = set.distance(traj.states.front());
    const double rate = gamma + report.z_value;
    if (stride == 0) stride = 1;
    for (std::size_t i = 0; i < traj.times.size(); i += stride) {
        const std::size_t idx = std::min(i, traj.times.size() - 1);
        WzBoundRow row;
        row.t = traj.times[idx];
        row.lhs = set.distance(traj.states[idx]);
        row.rhs = std::exp(rate * row.t) * report.d0 + varphi(rate, row.t) * epsilon;
        report.max_violation = std::max(report.max_violation, row.lhs - row.rhs);
        report.rows.push_back(row);
        if (idx + 1 == traj.times.size())
            break;
    }
    if (report.rows.empty() || report.rows.back().t != traj.times.back()) {
        WzBoundRow row;
        row.t = traj.times.back();
        row.lhs = set.distance(traj.states.back());
        row.rhs = std::exp(rate * row.t) * report.d0 + varphi(rate, row.t) * epsilon;
        report.max_violation = std::max(report.max_violation, row.lhs - row.rhs);
        report.rows.push_back(row);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Monte Carlo distance estimation
// ---------------------------------------------------------------------------

/// Root-mean-square (p=2) and mean (p=1) distance estimates with standard
/// errors; the p=2 error is a jackknife on the square-root statistic.
struct McEstimate {
    std::vector<double> times;
    std::vector<double> rms, rms_se;   // E[d_K^2]^{1/2}
    std::vector<double> mean, mean_se; // E[d_K]
    std::size_t n_paths = 0;
    std::size_t steps = 0;
    std::uint64_t seed = 0;
    std::size_t failures = 0;
    double max_path_distance = 0.0;
};

inline McEstimate mc_distance(const StochModel& model, const ClosedSet& set, const Curve& x,
                              const std::vector<double>& times, std::size_t n_paths,
                              std::size_t steps, std::uint64_t seed) {
    if (n_paths < 100)
        throw StatisticsError("mc_distance: fewer than 100 paths is statistically meaningless");
    if (times.empty())
        throw ValidationError("mc_distance: empty time list");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw ValidationError("mc_distance: times must be strictly increasing");
    const double horizon = times.back();
    if (!(horizon > 0.0))
        throw ValidationError("mc_distance: final time must be positive");
    const double dt = horizon / static_cast<double>(steps);
    // map requested times onto step-grid nodes
    std::vector<std::size_t> nodes(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double u = times[i] / dt;
        const auto k = static_cast<std::size_t>(std::llround(u));
        if (std::abs(u - static_cast<double>(k)) > 1e-9 * std::max(1.0, u) || k > steps)
            throw ValidationError("mc_distance: requested time does not lie on the step grid");
        nodes[i] = k;
    }

    const std::size_t nt = times.size();
    std::vector<double> dists(n_paths * nt, std::numeric_limits<double>::quiet_NaN());
    std::vector<std::uint8_t> failed(n_paths, 0);

    parallel_for(n_paths, [&](std::size_t p) {
        try {
            const BrownianPanel panel =
                sample_brownian_panel(model.noise, horizon, steps, seed, p, steps);
            std::size_t next = 0;
            detail::run_spde_path(model, x, panel, steps,
                                  [&](std::size_t k, double, const Curve& state) {
                                      while (next < nt && nodes[next] == k) {
                                          dists[p * nt + next] = set.distance(state);
                                          ++next;
                                      }
                                  });
        } catch (const std::exception&) {
            failed[p] = 1;
        }
    });

    McEstimate est;
    est.times = times;
    est.n_paths = n_paths;
    est.steps = steps;
    est.seed = seed;
    for (auto f : failed)
        est.failures += f;
    if (static_cast<double>(est.failures) > 0.001 * static_cast<double>(n_paths))
        throw StatisticsError("mc_distance: more than 0.1% of path evaluations failed (" +
                              std::to_string(est.failures) + " of " + std::to_string(n_paths) + ")");

    est.rms.resize(nt);
    est.rms_se.resize(nt);
    est.mean.resize(nt);
    est.mean_se.resize(nt);
    const std::size_t n_ok = n_paths - est.failures;
    for (std::size_t i = 0; i < nt; ++i) {
        KahanAccumulator s1, s2;
        for (std::size_t p = 0; p < n_paths; ++p) {
            if (failed[p]) continue;
            const double d = dists[p * nt + i];
            est.max_path_distance = std::max(est.max_path_distance, d);
            s1.add(d);
            s2.add(d * d);
        }
        const double n = static_cast<double>(n_ok);
        const double m1 = s1.sum / n;
        const double m2 = s2.sum / n;
        est.mean[i] = m1;
        est.mean_se[i] = std::sqrt(std::max(m2 - m1 * m1, 0.0) / n);
        est.rms[i] = std::sqrt(std::max(m2, 0.0));
        // jackknife over paths for the square-root statistic
        const double total = s2.sum;
        KahanAccumulator js, js2;
        for (std::size_t p = 0; p < n_paths; ++p) {
            if (failed[p]) continue;
            const double d = dists[p * nt + i];
            const double theta = std::sqrt(std::max((total - d * d) / (n - 1.0), 0.0));
            js.add(theta);
            js2.add(theta * theta);
        }
        const double jm = js.sum / n;
        const double jvar = std::max(js2.sum / n - jm * jm, 0.0);
        est.rms_se[i] = std::sqrt((n - 1.0) * jvar);
    }
    return est;
}

// ---------------------------------------------------------------------------
// bound verification against an estimated table
// ---------------------------------------------------------------------------

struct SpdeBoundRow {
    double t = 0.0, lhs = 0.0, rhs = 0.0, slack = 0.0;
    bool pass = false;
};

struct SpdeBoundReport {
    std::vector<SpdeBoundRow> rows;
    bool all_pass = true;
    double delta = 0.0, d0 = 0.0, epsilon = 0.0;
};

/// Asserts E[d_K(X(t))^2]^{1/2} <= delta + phi(t) d0 + psi(t) eps within
/// 3 combined standard errors, per time point.
inline SpdeBoundReport verify_spde_bound(const McEstimate& mc, const StochasticBoundTable& table,
                                         double d0, double epsilon, double delta) {
    if (mc.times.size() != table.times.size())
        throw ValidationError("verify_spde_bound: incompatible time grids");
    for (std::size_t i = 0; i < mc.times.size(); ++i)
        if (std::abs(mc.times[i] - table.times[i]) > 1e-9 * std::max(1.0, table.times[i]))
            throw ValidationError("verify_spde_bound: incompatible time grids");
    SpdeBoundReport report;
    report.delta = delta;
    report.d0 = d0;
    report.epsilon = epsilon;
    for (std::size_t i = 0; i < mc.times.size(); ++i) {
        SpdeBoundRow row;
        row.t = mc.times[i];
        row.lhs = mc.rms[i];
        row.rhs = delta + table.phi_values[i] * d0 + table.psi_values[i] * epsilon;
        row.slack = 3.0 * (mc.rms_se[i] + d0 * table.phi_se[i] + epsilon * table.psi_se[i]);
        row.pass = row.lhs <= row.rhs + row.slack;
        report.all_pass = report.all_pass && row.pass;
        report.rows.push_back(row);
    }
    return report;
}

} // namespace setdist
