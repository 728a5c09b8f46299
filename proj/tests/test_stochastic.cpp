#include "setdist/setdist.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace setdist;

namespace {

BrownianPanel zeroed(BrownianPanel panel) {
    for (auto& path : panel.paths)
        std::fill(path.begin(), path.end(), 0.0);
    return panel;
}

} // namespace

TEST_CASE("brownian panel: construction and statistics") {
    const GbmScenario gbm = build_gbm(0.05, 0.2);
    const std::size_t n = 100000;
    const BrownianPanel panel = sample_brownian_panel(gbm.model.noise, 1.0, n, 1234u, 0, n);
    REQUIRE(panel.paths[0][0] == 0.0);
    const double dt = panel.fine_dt();
    // disjoint increments are iid N(0, dt): sample variance within 3 SE
    KahanAccumulator s2;
    for (std::size_t k = 0; k < n; ++k) {
        const double inc = panel.increment(0, n, k);
        s2.add(inc * inc);
    }
    const double var = s2.sum / static_cast<double>(n);
    const double se = dt * std::sqrt(2.0 / static_cast<double>(n));
    REQUIRE(std::abs(var - dt) <= 3.0 * se);

    // slope of the interpolant is increment / delta, cell by cell
    const BrownianPanel coarse = sample_brownian_panel(gbm.model.noise, 1.0, 8, 77u, 3, 64);
    for (std::size_t k = 0; k < 8; ++k)
        REQUIRE(coarse.slope(0, 8, k) ==
                Catch::Approx(coarse.increment(0, 8, k) / coarse.delta_m()).epsilon(1e-15));
    // linear interpolation hits nodes exactly
    REQUIRE(coarse.value_at(0, 0.5) == Catch::Approx(coarse.value(0, 32)).epsilon(1e-15));

    // reproducible from (seed, path index)
    const BrownianPanel again = sample_brownian_panel(gbm.model.noise, 1.0, 8, 77u, 3, 64);
    REQUIRE(again.paths[0] == coarse.paths[0]);
    const BrownianPanel other = sample_brownian_panel(gbm.model.noise, 1.0, 8, 77u, 4, 64);
    REQUIRE(other.paths[0] != coarse.paths[0]);
}

TEST_CASE("solve_spde: zero volatility coincides with the deterministic solver") {
    GbmScenario gbm = build_gbm(0.07, 0.0);
    const BrownianPanel panel = sample_brownian_panel(gbm.model.noise, 1.0, 64, 5u, 0, 64);
    const Trajectory stoch = solve_spde(gbm.model, Curve::scalar(1.0), 1.0, 64, panel);
    const Trajectory det = solve_mild(gbm.model.det, Curve::scalar(1.0), 1.0, 64);
    for (std::size_t k = 0; k < det.times.size(); ++k)
        REQUIRE(stoch.states[k].as_scalar() == det.states[k].as_scalar());
}

TEST_CASE("solve_spde: strong half-order convergence for multiplicative noise") {
    const GbmScenario gbm = build_gbm(0.05, 0.4);
    const std::size_t fine = 4096, paths = 64;
    double rms_err[2] = {0.0, 0.0};
    const std::size_t steps_list[2] = {64, 512};
    for (std::size_t p = 0; p < paths; ++p) {
        const BrownianPanel panel =
            sample_brownian_panel(gbm.model.noise, 1.0, 64, 31337u, p, fine);
        const double w = panel.value(0, fine);
        const double exact = gbm.exact_solution(1.0, 1.0, w);
        for (int c = 0; c < 2; ++c) {
            const Trajectory traj =
                solve_spde(gbm.model, Curve::scalar(1.0), 1.0, steps_list[c], panel);
            const double e = traj.states.back().as_scalar() - exact;
            rms_err[c] += e * e;
        }
    }
    const double ratio = std::sqrt(rms_err[0] / rms_err[1]);
    // dt shrinks by 8, so a half-order scheme gains about sqrt(8) = 2.83
    REQUIRE(ratio > 1.8);
    REQUIRE(ratio < 4.5);
}

TEST_CASE("solve_spde: first-order convergence for additive noise") {
    // scalar OU: dX = beta X dt + sigma dW
    StochModel ou;
    ou.det.space = SpaceDescriptor::scalar_line();
    ou.det.semigroup = identity_semigroup();
    ou.det.drift = [](const Curve& h) { return -0.8 * h; };
    ou.det.lipschitz = 0.8;
    ou.noise.eigenvalues = {1.0};
    ou.noise.modes_r = 1;
    ou.noise.volatility_fields = {[](const Curve& h) { return Curve::scalar(0.3) + 0.0 * h; }};
    ou.common_lipschitz = 0.8;

    const std::size_t fine = 4096, paths = 64;
    double rms_err[2] = {0.0, 0.0};
    const std::size_t steps_list[2] = {128, 256};
    for (std::size_t p = 0; p < paths; ++p) {
        const BrownianPanel panel = sample_brownian_panel(ou.noise, 1.0, 64, 999u, p, fine);
        const Trajectory ref = solve_spde(ou, Curve::scalar(0.5), 1.0, fine, panel);
        for (int c = 0; c < 2; ++c) {
            const Trajectory traj = solve_spde(ou, Curve::scalar(0.5), 1.0, steps_list[c], panel);
            const double e = traj.states.back().as_scalar() - ref.states.back().as_scalar();
            rms_err[c] += e * e;
        }
    }
    const double ratio = std::sqrt(rms_err[0] / rms_err[1]);
    REQUIRE(ratio > 1.6);
    REQUIRE(ratio < 2.6);
}

TEST_CASE("stratonovich correction") {
    // constant fields have zero correction
    auto grid = Grid::log_spaced(30.0, 512);
    const HjmmScenario hjmm = build_hjmm(1.0, 2.3, 0.1, grid);
    const Curve rho_c = stratonovich_correction(hjmm.model, hjmm.basis[1]);
    for (double v : rho_c.values)
        REQUIRE(v == Catch::Approx(0.0).margin(1e-14));

    // multiplicative scalar field: rho(x) = sigma^2 x / 2, exact for linear fields
    const GbmScenario gbm = build_gbm(0.05, 0.2);
    for (double x : {-2.0, 0.3, 1.7}) {
        const Curve r = gbm.model.rho(Curve::scalar(x));
        REQUIRE(r.as_scalar() == Catch::Approx(gbm.exact_rho(x)).margin(1e-10));
    }

    // several commuting linear fields: rho(h) = (1/2) sum C_j^2 h
    StochModel multi;
    multi.det.space = SpaceDescriptor::scalar_line();
    multi.det.semigroup = identity_semigroup();
    multi.noise.eigenvalues = {1.0, 1.0, 1.0};
    multi.noise.modes_r = 3;
    const double cs[3] = {0.4, -0.9, 1.3};
    for (double c : cs)
        multi.noise.volatility_fields.push_back([c](const Curve& h) { return c * h; });
    const double expected = 0.5 * (cs[0] * cs[0] + cs[1] * cs[1] + cs[2] * cs[2]) * 1.7;
    REQUIRE(multi.rho(Curve::scalar(1.7)).as_scalar() == Catch::Approx(expected).margin(1e-8));
}

TEST_CASE("wong-zakai: zero-noise path reduces to the corrected drift flow") {
    const GbmScenario gbm = build_gbm(0.05, 0.3);
    const BrownianPanel panel =
        zeroed(sample_brownian_panel(gbm.model.noise, 1.0, 16, 4u, 0, 64));
    const Trajectory wz = solve_wong_zakai(gbm.model, Curve::scalar(1.0), panel, 64);
    // xi' = (mu - sigma^2/2) xi
    const double rate = gbm.mu - 0.5 * gbm.sigma * gbm.sigma;
    REQUIRE(wz.states.back().as_scalar() ==
            Catch::Approx(std::exp(rate * 1.0)).margin(2e-5));
}

TEST_CASE("wong-zakai: pathwise exactness for geometric noise") {
    // the WZ ODE for multiplicative scalar noise solves to
    // x exp((mu - sigma^2/2) t + sigma B_m(t))
    const GbmScenario gbm = build_gbm(0.05, 0.2);
    const BrownianPanel panel = sample_brownian_panel(gbm.model.noise, 1.0, 8, 6u, 2, 8);
    const Trajectory wz = solve_wong_zakai(gbm.model, Curve::scalar(1.0), panel, 512);
    const double rate = gbm.mu - 0.5 * gbm.sigma * gbm.sigma;
    for (std::size_t k = 0; k <= 8; ++k) {
        const double t = panel.delta_m() * static_cast<double>(k);
        const double expected =
            std::exp(rate * t + gbm.sigma * panel.value_at(0, t));
        REQUIRE(wz.state_at(t).as_scalar() == Catch::Approx(expected).epsilon(2e-4));
    }
}

TEST_CASE("wong-zakai converges to the Ito solution as the partition refines") {
    const GbmScenario gbm = build_gbm(0.05, 0.3);
    const std::size_t fine = 512, paths = 32;
    const std::size_t ms[4] = {8, 16, 32, 64};
    double avg_gap[4] = {0, 0, 0, 0};
    for (std::size_t p = 0; p < paths; ++p) {
        for (int c = 0; c < 4; ++c) {
            const std::size_t m = ms[c];
            const BrownianPanel panel =
                sample_brownian_panel(gbm.model.noise, 1.0, m, 2024u, p, fine);
            const Trajectory ito = solve_spde(gbm.model, Curve::scalar(1.0), 1.0, fine, panel);
            const Trajectory wz =
                solve_wong_zakai(gbm.model, Curve::scalar(1.0), panel, 1024 / m);
            double gap = 0.0;
            for (std::size_t k = 0; k <= m; ++k) {
                const double t = panel.delta_m() * static_cast<double>(k);
                gap = std::max(gap, std::abs(ito.state_at(t, 1e-9).as_scalar() -
                                             wz.state_at(t, 1e-9).as_scalar()));
            }
            avg_gap[c] += gap / static_cast<double>(paths);
        }
    }
    // soft monotonicity: warn on a single non-monotone step, require overall decay
    for (int c = 1; c < 4; ++c) {
        if (avg_gap[c] > avg_gap[c - 1])
            WARN("average WZ gap not monotone between m=" << ms[c - 1] << " and m=" << ms[c]);
    }
    REQUIRE(avg_gap[3] < avg_gap[0]);
}

TEST_CASE("pathwise Wong-Zakai bound check on geometric paths") {
    const GbmScenario gbm = build_gbm(0.05, 0.2);
    const ClosedSet k = gbm.set;
    const double gamma = gbm.model.det.beta + gbm.model.common_lipschitz;
    for (std::size_t p = 0; p < 64; ++p) {
        const BrownianPanel panel =
            sample_brownian_panel(gbm.model.noise, 1.0, 16, 321u, p, 1024);
        const Trajectory wz = solve_wong_zakai(gbm.model, Curve::scalar(1.0), panel, 64);
        const WzBoundReport report =
            pathwise_wz_bound_check(wz, k, panel, gamma, 0.0, gbm.model.common_lipschitz);
        REQUIRE(report.d0 == 1.0);
        REQUIRE(report.z_value >= 0.0);
        REQUIRE(report.max_violation <= 1e-6);
    }
}

TEST_CASE("mc_distance: exact geometric law and invariance") {
    const GbmScenario gbm = build_gbm(0.05, 0.2);
    const std::vector<double> times{0.25, 0.5, 1.0};
    const McEstimate est = mc_distance(gbm.model, gbm.set, Curve::scalar(1.0), times, 4000, 128, 8181u);
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double expected = gbm.exact_expected_distance(times[i], 1.0);
        REQUIRE(std::abs(est.mean[i] - expected) <= 3.0 * est.mean_se[i]);
        REQUIRE(est.rms[i] >= est.mean[i]); // Jensen
    }

    // started inside K the distance stays exactly zero on every path
    const McEstimate inv = mc_distance(gbm.model, gbm.set, Curve::scalar(-1.0), times, 500, 64, 5u);
    REQUIRE(inv.max_path_distance == 0.0);

    REQUIRE_THROWS_AS(mc_distance(gbm.model, gbm.set, Curve::scalar(1.0), times, 50, 64, 5u),
                      StatisticsError);
}

TEST_CASE("mc_distance: degenerate noise reproduces the deterministic report") {
    const GbmScenario gbm = build_gbm(0.08, 0.0);
    const std::vector<double> times{0.5, 1.0};
    const McEstimate est = mc_distance(gbm.model, gbm.set, Curve::scalar(1.0), times, 200, 64, 9u);
    const PdeBoundReport det = verify_pde_bound(gbm.model.det, gbm.set, Curve::scalar(1.0),
                                                /*epsilon=*/0.0, 1.0, 64);
    for (std::size_t i = 0; i < times.size(); ++i) {
        double lhs = 0.0;
        for (const auto& row : det.rows)
            if (std::abs(row.t - times[i]) < 1e-12)
                lhs = row.lhs;
        REQUIRE(est.rms[i] == Catch::Approx(lhs).margin(1e-14));
        REQUIRE(est.rms_se[i] == Catch::Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("mc_distance: standard errors shrink like the square root of the sample size") {
    const GbmScenario gbm = build_gbm(0.05, 0.25);
    const std::vector<double> times{1.0};
    const McEstimate small = mc_distance(gbm.model, gbm.set, Curve::scalar(1.0), times, 1000, 64, 44u);
    const McEstimate large = mc_distance(gbm.model, gbm.set, Curve::scalar(1.0), times, 4000, 64, 44u);
    const double ratio = small.rms_se[0] / large.rms_se[0];
    REQUIRE(ratio > 1.4);
    REQUIRE(ratio < 2.6);
}

TEST_CASE("mc_distance: bit-identical across worker counts") {
    const GbmScenario gbm = build_gbm(0.05, 0.2);
    const std::vector<double> times{0.5, 1.0};
    const std::size_t saved = default_thread_count();
    set_default_thread_count(1);
    const McEstimate a = mc_distance(gbm.model, gbm.set, Curve::scalar(1.0), times, 600, 64, 7u);
    set_default_thread_count(3);
    const McEstimate b = mc_distance(gbm.model, gbm.set, Curve::scalar(1.0), times, 600, 64, 7u);
    set_default_thread_count(saved);
    REQUIRE(a.rms == b.rms);
    REQUIRE(a.mean == b.mean);
    REQUIRE(a.rms_se == b.rms_se);
}

TEST_CASE("verify_spde_bound: geometric model with the identified linear form") {
    const GbmScenario gbm = build_gbm(0.05, 0.2);
    const double T = 1.0;
    const std::size_t nt = 5;
    std::vector<double> times;
    for (std::size_t i = 1; i < nt; ++i)
        times.push_back(T * static_cast<double>(i) / static_cast<double>(nt - 1));
    McEstimate est = mc_distance(gbm.model, gbm.set, Curve::scalar(1.0), times, 2000, 128, 313u);
    // prepend the trivial t = 0 row to line up with the table grid
    est.times.insert(est.times.begin(), 0.0);
    est.rms.insert(est.rms.begin(), 1.0);
    est.rms_se.insert(est.rms_se.begin(), 0.0);
    est.mean.insert(est.mean.begin(), 1.0);
    est.mean_se.insert(est.mean_se.begin(), 0.0);

    const double gamma = gbm.model.det.beta + gbm.model.common_lipschitz;
    const StochasticBoundTable table =
        estimate_stochastic_bounds(1, 16, gamma, gbm.model.common_lipschitz, T, nt, 4000, 99u);
    const SpdeBoundReport report = verify_spde_bound(est, table, 1.0, 0.0, 0.05);
    REQUIRE(report.rows.front().pass); // t = 0 collapses to d0 <= delta + d0
    REQUIRE(report.all_pass);

    StochasticBoundTable wrong = table;
    wrong.times.pop_back();
    wrong.phi_values.pop_back();
    REQUIRE_THROWS_AS(verify_spde_bound(est, wrong, 1.0, 0.0, 0.05), ValidationError);
}

TEST_CASE("invariance neighborhood: small starting distance stays small") {
    // eta = delta / (2 phi(T)) with phi(t) = e^{mu t} keeps the estimate under delta
    const GbmScenario gbm = build_gbm(0.05, 0.2);
    const double T = 1.0, delta = 0.05;
    const double eta = delta / (2.0 * std::exp(gbm.mu * T));
    const std::vector<double> times{0.25, 0.5, 1.0};
    const McEstimate est =
        mc_distance(gbm.model, gbm.set, Curve::scalar(eta), times, 2000, 128, 2718u);
    for (std::size_t i = 0; i < times.size(); ++i)
        REQUIRE(est.rms[i] <= delta + 3.0 * est.rms_se[i]);
}
