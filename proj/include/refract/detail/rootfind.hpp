#pragma once

// Scalar root bracketing and bisection.
//
// All barrier searches in the library use the same recipe: scan a grid for
// sign changes, then bisect the chosen bracket to a fixed x-tolerance.
// Bisection is deliberately preferred over faster methods: the objective is
// only evaluated through interpolated curves, and bisection's robustness to
// small interpolation wobble matters more than iteration count here.

#include <cmath>
#include <utility>
#include <vector>

#include "refract/error.hpp"

namespace refract::detail {

struct Bracket {
    double lo = 0.0, hi = 0.0;
    double f_lo = 0.0, f_hi = 0.0;
};

/// Scan [a, b] with n uniform subintervals and return every sign-change
/// bracket in order. Exact zeros at grid nodes are returned as degenerate
/// brackets (lo == hi).
template <typename F>
std::vector<Bracket> scan_sign_changes(F&& f, double a, double b, int n) {
    std::vector<Bracket> out;
    double x_prev = a;
    double f_prev = f(a);
    for (int i = 1; i <= n; ++i) {
        const double x = a + (b - a) * static_cast<double>(i) / n;
        const double fx = f(x);
        if (f_prev == 0.0) {
            out.push_back({x_prev, x_prev, 0.0, 0.0});
        } else if (std::signbit(f_prev) != std::signbit(fx)) {
            out.push_back({x_prev, x, f_prev, fx});
        }
        x_prev = x;
        f_prev = fx;
    }
    if (f_prev == 0.0) out.push_back({b, b, 0.0, 0.0});
    return out;
}

/// Bisect a sign-change bracket down to |hi - lo| <= xtol; returns the
/// midpoint of the final bracket.
template <typename F>
double bisect(F&& f, Bracket br, double xtol, int max_iter = 200) {
    if (br.lo == br.hi) return br.lo;
    double lo = br.lo, hi = br.hi, f_lo = br.f_lo;
    for (int it = 0; it < max_iter && (hi - lo) > xtol; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if (std::signbit(fm) == std::signbit(f_lo)) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace refract::detail
