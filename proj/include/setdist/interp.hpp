#pragma once

#include "setdist/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace setdist {

/// Monotone cubic (Fritsch-Carlson) interpolant. Shape preserving: no
/// overshoot between data points, which keeps translated curves inside
/// pointwise bounds of the original samples.
class PchipInterpolant {
public:
    PchipInterpolant(const std::vector<double>& x, const std::vector<double>& y)
        : x_(x), y_(y) {
        const std::size_t n = x_.size();
        if (n < 2 || y_.size() != n)
            throw DegenerateGridError("pchip: need at least 2 matched points");
        d_.resize(n);
        if (n == 2) {
            const double s = (y_[1] - y_[0]) / (x_[1] - x_[0]);
            d_[0] = d_[1] = s;
            return;
        }
        std::vector<double> h(n - 1), slope(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            h[i] = x_[i + 1] - x_[i];
            slope[i] = (y_[i + 1] - y_[i]) / h[i];
        }
        for (std::size_t i = 1; i + 1 < n; ++i) {
            if (slope[i - 1] * slope[i] <= 0.0) {
                d_[i] = 0.0;
            } else {
                // weighted harmonic mean of adjacent secant slopes
                const double w1 = 2.0 * h[i] + h[i - 1];
                const double w2 = h[i] + 2.0 * h[i - 1];
                d_[i] = (w1 + w2) / (w1 / slope[i - 1] + w2 / slope[i]);
            }
        }
        d_[0] = edge_derivative(h[0], h[1], slope[0], slope[1]);
        d_[n - 1] = edge_derivative(h[n - 2], h[n - 3], slope[n - 2], slope[n - 3]);
    }

    double operator()(double xq) const {
        if (xq <= x_.front()) {
            const double t = xq - x_.front();
            return y_.front() + d_.front() * t;
        }
        if (xq >= x_.back()) {
            const double t = xq - x_.back();
            return y_.back() + d_.back() * t;
        }
        auto it = std::upper_bound(x_.begin(), x_.end(), xq);
        const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
        const double h = x_[i + 1] - x_[i];
        const double t = (xq - x_[i]) / h;
        const double t2 = t * t, t3 = t2 * t;
        const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        const double h10 = t3 - 2.0 * t2 + t;
        const double h01 = -2.0 * t3 + 3.0 * t2;
        const double h11 = t3 - t2;
        return h00 * y_[i] + h10 * h * d_[i] + h01 * y_[i + 1] + h11 * h * d_[i + 1];
    }

private:
    static double edge_derivative(double h0, double h1, double s0, double s1) {
        // one-sided three-point estimate, limited per Fritsch-Carlson
        double d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
        if (d * s0 <= 0.0)
            d = 0.0;
        else if (s0 * s1 <= 0.0 && std::abs(d) > 3.0 * std::abs(s0))
            d = 3.0 * s0;
        return d;
    }

    std::vector<double> x_, y_, d_;
};

} // namespace setdist
