#pragma once

// Tabulated scalar function with cubic Hermite interpolation.
//
// A Curve stores (x, value, derivative) triples on a strictly increasing grid
// and interpolates both the value and the first derivative consistently: the
// derivative accessor evaluates the exact derivative of the interpolating
// cubic, which matches the stored slopes at the nodes. Nothing in the library
// differentiates tabulated data numerically; second derivatives are always
// recovered from the underlying ODE by the object that owns the curve.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "refract/error.hpp"

namespace refract {

class Curve {
public:
    Curve() = default;
    Curve(std::vector<double> x, std::vector<double> value, std::vector<double> deriv)
        : x_(std::move(x)), v_(std::move(value)), d_(std::move(deriv)) {
        if (x_.size() < 2 || x_.size() != v_.size() || x_.size() != d_.size())
            raise(Errc::validation, "curve needs matching x/value/derivative arrays of size >= 2");
        for (std::size_t i = 1; i < x_.size(); ++i)
            if (!(x_[i] > x_[i - 1]))
                raise(Errc::validation, "curve grid must be strictly increasing");
    }

    bool empty() const noexcept { return x_.empty(); }
    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }
    std::size_t size() const noexcept { return x_.size(); }
    const std::vector<double>& grid() const noexcept { return x_; }
    const std::vector<double>& values() const noexcept { return v_; }
    const std::vector<double>& derivs() const noexcept { return d_; }

    double value(double x) const {
        const Seg s = locate(x);
        return s.h00 * v_[s.i] + s.h10 * s.h * d_[s.i] + s.h01 * v_[s.i + 1] + s.h11 * s.h * d_[s.i + 1];
    }

    /// Derivative of the interpolating cubic (equals stored slopes at nodes).
    double deriv(double x) const {
        const Seg s = locate(x);
        return s.g00 * v_[s.i] + s.g10 * d_[s.i] + s.g01 * v_[s.i + 1] + s.g11 * d_[s.i + 1];
    }

    /// Second derivative of the interpolating cubic. Only O(h^2) accurate —
    /// used by consistency diagnostics, never as a published second derivative.
    double second_deriv_of_interpolant(double x) const {
        const Seg s = locate(x);
        const double t = s.t, h = s.h;
        const double m00 = (12 * t - 6) / (h * h), m10 = (6 * t - 4) / h;
        const double m01 = (6 - 12 * t) / (h * h), m11 = (6 * t - 2) / h;
        return m00 * v_[s.i] + m10 * d_[s.i] + m01 * v_[s.i + 1] + m11 * d_[s.i + 1];
    }

private:
    struct Seg {
        std::size_t i;
        double h, t;
        double h00, h10, h01, h11;  // value basis
        double g00, g10, g01, g11;  // derivative basis
    };

    Seg locate(double x) const {
        if (empty()) raise(Errc::domain, "evaluating an empty curve");
        const double lo = x_.front(), hi = x_.back();
        // Tolerate endpoint rounding from grid arithmetic, nothing more.
        const double slack = 1e-12 * std::max({1.0, std::abs(lo), std::abs(hi)});
        if (x < lo - slack || x > hi + slack)
            raise(Errc::domain, "curve evaluated at x = " + std::to_string(x) +
                                    " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        x = std::clamp(x, lo, hi);
        std::size_t i = static_cast<std::size_t>(
            std::upper_bound(x_.begin(), x_.end(), x) - x_.begin());
        i = std::clamp<std::size_t>(i, 1, x_.size() - 1) - 1;
        Seg s;
        s.i = i;
        s.h = x_[i + 1] - x_[i];
        s.t = (x - x_[i]) / s.h;
        const double t = s.t, t2 = t * t, t3 = t2 * t;
        s.h00 = 2 * t3 - 3 * t2 + 1;
        s.h10 = t3 - 2 * t2 + t;
        s.h01 = -2 * t3 + 3 * t2;
        s.h11 = t3 - t2;
        s.g00 = (6 * t2 - 6 * t) / s.h;
        s.g10 = 3 * t2 - 4 * t + 1;
        s.g01 = (6 * t - 6 * t2) / s.h;
        s.g11 = 3 * t2 - 2 * t;
        return s;
    }

    std::vector<double> x_, v_, d_;
};

/// Fritsch-Carlson slope limiting: clamps the given slopes so the Hermite
/// interpolant of monotone data stays monotone. Used for user-supplied
/// coefficient tables, where monotonicity is a modelling requirement.
inline std::vector<double> monotone_limited_slopes(const std::vector<double>& x,
                                                   const std::vector<double>& v,
                                                   std::vector<double> d) {
    const std::size_t n = x.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double sec = (v[i + 1] - v[i]) / (x[i + 1] - x[i]);
        if (sec == 0.0) {
            d[i] = 0.0;
            d[i + 1] = 0.0;
            continue;
        }
        for (std::size_t j : {i, i + 1}) {
            const double a = d[j] / sec;
            if (a < 0.0)
                d[j] = 0.0;  // slope fights the data direction
            else if (a > 3.0)
                d[j] = 3.0 * sec;
        }
    }
    return d;
}

}  // namespace refract
