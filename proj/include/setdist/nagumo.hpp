#pragma once

#include "setdist/errors.hpp"
#include "setdist/evolution.hpp"
#include "setdist/rng.hpp"
#include "setdist/sets.hpp"
#include "setdist/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace setdist {

/// Numerical liminf protocol: quotients on a geometric t-sequence, the
/// estimate being the minimum over the tail half. The floor 1e-6 * t0 keeps
/// the quotient clear of space-discretization noise.
struct LiminfEstimate {
    enum class Form { Semigroup, Generator };
    std::vector<double> t_sequence;
    std::vector<double> quotients;
    double estimate = 0.0;
    Form form = Form::Semigroup;
    bool flagged = false;            // a distance solve failed to converge
    bool input_outside_set = false;  // d_K(x) was not ~0 on entry
    std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<double> liminf_t_sequence(double t0, std::size_t levels) {
    if (!(t0 > 0.0))
        throw ValidationError("liminf: t0 must be positive");
    if (levels < 4)
        throw ValidationError("liminf: need at least 4 levels");
    const double t_floor = 1e-6 * t0;
    std::vector<double> ts;
    double t = t0;
    for (std::size_t k = 0; k < levels && t >= t_floor; ++k, t *= 0.5)
        ts.push_back(t);
    return ts;
}

inline LiminfEstimate liminf_protocol(const ClosedSet& set, const Curve& x,
                                      const std::function<Curve(double)>& probe,
                                      double t0, std::size_t levels, LiminfEstimate::Form form) {
    LiminfEstimate est;
    est.form = form;
    est.t_sequence = liminf_t_sequence(t0, levels);
    const ProjectionResult at_x = set.project(x);
    double scale = 1.0;
    for (double v : x.values)
        scale = std::max(scale, std::abs(v));
    if (at_x.distance > 1e-6 * scale) {
        est.input_outside_set = true;
        est.warnings.push_back("input point is outside the set: d_K(x) = " +
                               std::to_string(at_x.distance));
    }
    est.quotients.reserve(est.t_sequence.size());
    for (double t : est.t_sequence) {
        const ProjectionResult pr = set.project(probe(t));
        if (!pr.converged) {
            est.flagged = true;
            est.warnings.push_back("distance solver did not converge at t = " + std::to_string(t));
        }
        est.quotients.push_back(pr.distance / t);
    }
    const std::size_t tail = est.quotients.size() / 2;
    double mn = est.quotients[tail];
    for (std::size_t k = tail; k < est.quotients.size(); ++k)
        mn = std::min(mn, est.quotients[k]);
    est.estimate = mn;
    return est;
}

} // namespace detail

/// Semigroup-form tangency quotient q(t) = d_K(S_t x + t alpha(x)) / t.
inline LiminfEstimate estimate_snc(const ClosedSet& set, const EvolutionModel& model,
                                   const Curve& x, double t0, std::size_t levels) {
    const Curve ax = model.apply_drift(x);
    auto probe = [&](double t) {
        Curve p = model.apply_semigroup(t, x);
        axpy(p, t, ax);
        return p;
    };
    return detail::liminf_protocol(set, x, probe, t0, levels, LiminfEstimate::Form::Semigroup);
}

/// Generator-form quotient q(t) = d_K(x + t (Ax + alpha(x))) / t, valid when
/// the finite-difference generator action applies to x.
inline LiminfEstimate estimate_snc_generator_form(const ClosedSet& set, const EvolutionModel& model,
                                                  const Curve& x, double t0, std::size_t levels) {
    if (!model.generator)
        throw DomainError("estimate_snc_generator_form: model has no generator handle");
    Curve direction = apply_generator(model.generator, x);
    axpy(direction, 1.0, model.apply_drift(x));
    auto probe = [&](double t) {
        Curve p = x;
        axpy(p, t, direction);
        return p;
    };
    return detail::liminf_protocol(set, x, probe, t0, levels, LiminfEstimate::Form::Generator);
}

/// max_k || Ax - (S_{t_k} x - x)/t_k ||: how far the semigroup is from its
/// generator along the probe sequence. The two liminf forms agree within this
/// defect.
inline double semigroup_differentiability_defect(const EvolutionModel& model, const Curve& x,
                                                 double t0, std::size_t levels) {
    if (!model.generator)
        throw DomainError("semigroup_differentiability_defect: model has no generator handle");
    const Curve ax = apply_generator(model.generator, x);
    double defect = 0.0;
    for (double t : detail::liminf_t_sequence(t0, levels)) {
        Curve diff = model.apply_semigroup(t, x) - x;
        diff = (1.0 / t) * diff;
        defect = std::max(defect, norm(model.space, ax - diff));
    }
    return defect;
}

/// Stochastic quotient q(t) = d_K(S_t h + t (alpha(h) - rho(h) + sigma(h)u))/t
/// for one noise direction u, given by its coefficients against the first r
/// noise modes.
inline LiminfEstimate estimate_ssnc(const ClosedSet& set, const StochModel& model, const Curve& h,
                                    const std::vector<double>& u, double t0, std::size_t levels) {
    if (u.size() != model.noise.modes_r)
        throw ValidationError("estimate_ssnc: u must carry one coefficient per active noise mode");
    Curve direction = model.det.apply_drift(h);
    axpy(direction, -1.0, model.rho(h));
    for (std::size_t j = 0; j < u.size(); ++j)
        if (u[j] != 0.0)
            axpy(direction, u[j], model.sigma_field(j, h));
    auto probe = [&](double t) {
        Curve p = model.det.apply_semigroup(t, h);
        axpy(p, t, direction);
        return p;
    };
    return detail::liminf_protocol(set, h, probe, t0, levels, LiminfEstimate::Form::Semigroup);
}

// ---------------------------------------------------------------------------
// batch driver
// ---------------------------------------------------------------------------

struct SsncBatchEntry {
    std::size_t h_index = 0;
    std::vector<double> u;
    double estimate = 0.0;
    bool flagged = false;
};

/// Sweep over sampled set points and extreme noise directions. The condition
/// quantifies over all u in the noise space, which is not verifiable; the
/// sweep samples coefficients in {-2,-1,0,1,2} per mode and is labeled a
/// heuristic in reports.
struct SsncBatchReport {
    std::vector<SsncBatchEntry> entries;
    double max_estimate = 0.0;
    bool any_flagged = false;
    std::string protocol = "extreme-point sweep, coefficients {-2,-1,0,1,2} per mode (heuristic)";
};

inline SsncBatchReport estimate_ssnc_batch(const ClosedSet& set, const StochModel& model,
                                           const std::vector<Curve>& h_samples, double t0,
                                           std::size_t levels, std::size_t max_directions = 256,
                                           std::uint64_t seed = 0) {
    if (h_samples.empty())
        throw ValidationError("estimate_ssnc_batch: no sample points");
    const std::size_t r = model.noise.modes_r;
    const std::vector<double> coeffs = {-2.0, -1.0, 0.0, 1.0, 2.0};
    std::vector<std::vector<double>> directions;
    double combos = 1.0;
    for (std::size_t j = 0; j < r; ++j)
        combos *= static_cast<double>(coeffs.size());
    if (combos <= static_cast<double>(max_directions)) {
        std::vector<double> u(r, 0.0);
        std::vector<std::size_t> idx(r, 0);
        for (;;) {
            for (std::size_t j = 0; j < r; ++j)
                u[j] = coeffs[idx[j]];
            directions.push_back(u);
            std::size_t j = 0;
            while (j < r && ++idx[j] == coeffs.size()) {
                idx[j] = 0;
                ++j;
            }
            if (j == r)
                break;
        }
    } else {
        RngStream rng(seed, 0x55aa);
        directions.emplace_back(r, 0.0); // always include u = 0
        for (std::size_t k = 1; k < max_directions; ++k) {
            std::vector<double> u(r);
            for (std::size_t j = 0; j < r; ++j)
                u[j] = coeffs[rng.next_u64() % coeffs.size()];
            directions.push_back(std::move(u));
        }
    }

    SsncBatchReport report;
    for (std::size_t hi = 0; hi < h_samples.size(); ++hi) {
        for (const auto& u : directions) {
            const LiminfEstimate est = estimate_ssnc(set, model, h_samples[hi], u, t0, levels);
            SsncBatchEntry entry;
            entry.h_index = hi;
            entry.u = u;
            entry.estimate = est.estimate;
            entry.flagged = est.flagged;
            report.any_flagged = report.any_flagged || est.flagged;
            report.max_estimate = std::max(report.max_estimate, est.estimate);
            report.entries.push_back(std::move(entry));
        }
    }
    return report;
}

} // namespace setdist
