#pragma once

#include "setdist/errors.hpp"
#include "setdist/linalg.hpp"
#include "setdist/parallel.hpp"
#include "setdist/rng.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace setdist {

/// varphi_gamma(t) = int_0^t e^{gamma (t-s)} ds. Closed form (e^{gamma t}-1)/gamma
/// away from zero; a short series below |gamma t| < 1e-8 avoids cancellation.
inline double varphi(double gamma, double t) {
    const double gt = gamma * t;
    if (std::abs(gt) < 1e-8)
        return t * (1.0 + gt / 2.0 + gt * gt / 6.0);
    return std::expm1(gt) / gamma;
}

struct BoundParams {
    double gamma = 0.0;     // growth exponent per unit time
    double delta = 0.0;     // additive inflation
    double epsilon = 0.0;   // tangency slack
    double beta = 0.0;      // semigroup exponent
    double lipschitz = 0.0; // drift Lipschitz constant
};

/// Phi_{gamma,delta}(d,e,t) = e^{gamma t} d + varphi_gamma(t) (e + delta).
inline double big_phi(double gamma, double delta, double d, double e, double t) {
    return std::exp(gamma * t) * d + varphi(gamma, t) * (e + delta);
}

inline double big_phi(const BoundParams& p, double d, double e, double t) {
    return big_phi(p.gamma, p.delta, d, e, t);
}

// ---------------------------------------------------------------------------
// Monte Carlo estimation of the stochastic bound functions
// ---------------------------------------------------------------------------

/// Tabulated phi_{r,m}, psi_{r,m} with standard errors.
///
///   phi_{r,m}(t) = E[ e^{2 (gamma + Z) t} ]^{1/2}
///   psi_{r,m}(t) = E[ varphi_{gamma+Z}(t)^2 ]^{1/2}
///   Z = L * sum_j sup_t |Bdot_m^j(t)|
///
/// The sup of the piecewise-constant slope is the max over cells of
/// |increment| / delta_m, which is exact, not the proof-side sum bound.
struct StochasticBoundTable {
    std::vector<double> times;
    std::vector<double> phi_values, phi_se;
    std::vector<double> psi_values, psi_se;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    std::size_t modes_r = 0, partition_m = 0;
    double gamma = 0.0, lipschitz = 0.0, horizon = 0.0;
    // indices where the relative standard error of the underlying second
    // moment exceeded 10% (heavy exponential tails at large t)
    std::vector<std::size_t> high_variance_times;
};

inline StochasticBoundTable estimate_stochastic_bounds(std::size_t r, std::size_t m, double gamma,
                                                       double lipschitz, double horizon,
                                                       std::size_t n_times, std::size_t n_samples,
                                                       std::uint64_t seed) {
    if (r < 1 || m < 1)
        throw ValidationError("estimate_stochastic_bounds: r and m must be >= 1");
    if (!(horizon > 0.0))
        throw ValidationError("estimate_stochastic_bounds: horizon must be positive");
    if (n_samples < 100)
        throw StatisticsError("estimate_stochastic_bounds: fewer than 100 samples is statistically meaningless");
    if (n_times < 2)
        throw ValidationError("estimate_stochastic_bounds: need at least 2 time points");

    StochasticBoundTable table;
    table.samples = n_samples;
    table.seed = seed;
    table.modes_r = r;
    table.partition_m = m;
    table.gamma = gamma;
    table.lipschitz = lipschitz;
    table.horizon = horizon;
    table.times.resize(n_times);
    for (std::size_t i = 0; i < n_times; ++i)
        table.times[i] = horizon * static_cast<double>(i) / static_cast<double>(n_times - 1);

    const double delta_m = horizon / static_cast<double>(m);
    const double sqrt_dm = std::sqrt(delta_m);

    // fixed-size logical blocks; physical threads pick blocks, block partials
    // merge in block order, so results are independent of the worker count
    const std::size_t block = 2048;
    const std::size_t n_blocks = (n_samples + block - 1) / block;
    struct Partial {
        std::vector<KahanAccumulator> m_phi, m_phi2, m_psi, m_psi2;
    };
    std::vector<Partial> partials(n_blocks);

    parallel_for(n_blocks, [&](std::size_t bi) {
        Partial p;
        p.m_phi.resize(n_times);
        p.m_phi2.resize(n_times);
        p.m_psi.resize(n_times);
        p.m_psi2.resize(n_times);
        const std::size_t lo = bi * block;
        const std::size_t hi = std::min(lo + block, n_samples);
        for (std::size_t s = lo; s < hi; ++s) {
            RngStream rng(seed, s);
            double z = 0.0;
            for (std::size_t j = 0; j < r; ++j) {
                double ymax = 0.0;
                for (std::size_t k = 0; k < m; ++k) {
                    const double inc = sqrt_dm * rng.next_normal();
                    ymax = std::max(ymax, std::abs(inc) / delta_m);
                }
                z += ymax;
            }
            z *= lipschitz;
            for (std::size_t i = 0; i < n_times; ++i) {
                const double t = table.times[i];
                const double a = std::exp(2.0 * (gamma + z) * t);
                const double v = varphi(gamma + z, t);
                const double b = v * v;
                p.m_phi[i].add(a);
                p.m_phi2[i].add(a * a);
                p.m_psi[i].add(b);
                p.m_psi2[i].add(b * b);
            }
        }
        partials[bi] = std::move(p);
    });

    table.phi_values.resize(n_times);
    table.phi_se.resize(n_times);
    table.psi_values.resize(n_times);
    table.psi_se.resize(n_times);
    const double n = static_cast<double>(n_samples);
    for (std::size_t i = 0; i < n_times; ++i) {
        KahanAccumulator sa, sa2, sb, sb2;
        for (const auto& p : partials) {
            sa.merge(p.m_phi[i]);
            sa2.merge(p.m_phi2[i]);
            sb.merge(p.m_psi[i]);
            sb2.merge(p.m_psi2[i]);
        }
        const double mean_a = sa.sum / n;
        const double var_a = std::max(sa2.sum / n - mean_a * mean_a, 0.0);
        const double se_a = std::sqrt(var_a / n);
        const double mean_b = sb.sum / n;
        const double var_b = std::max(sb2.sum / n - mean_b * mean_b, 0.0);
        const double se_b = std::sqrt(var_b / n);
        table.phi_values[i] = std::sqrt(std::max(mean_a, 0.0));
        // delta method: se(sqrt(M)) = se(M) / (2 sqrt(M))
        table.phi_se[i] = mean_a > 0.0 ? se_a / (2.0 * std::sqrt(mean_a)) : se_a;
        table.psi_values[i] = std::sqrt(std::max(mean_b, 0.0));
        table.psi_se[i] = mean_b > 0.0 ? se_b / (2.0 * std::sqrt(mean_b)) : se_b;
        if (mean_a > 0.0 && se_a / mean_a > 0.1)
            table.high_variance_times.push_back(i);
    }
    return table;
}

} // namespace setdist
