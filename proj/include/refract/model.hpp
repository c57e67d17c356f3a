#pragma once

// Problem data: drift, diffusion, withdrawal bound, discount rate.
//
// A model describes the controlled diffusion
//
//     dX_t = (mu(X_t) - l_t) dt + sigma(X_t) dW_t,   l_t in [0, F(X_t)],
//
// killed at the origin and discounted at rate q. The standing assumptions the
// validator enforces are exactly the ones the solver's theory needs:
//
//   * mu concave with mu(0) > 0 and mu'(0+) < q,
//   * sigma Lipschitz on the working domain with sigma >= eps > 0,
//   * F nondecreasing, concave, F(0) >= 0.
//
// For the boundary analysis the coefficients are extended to x < 0 by
// first-order Taylor data at 0+ (affine mu and F, frozen sigma), which turns
// the negative axis into an OU-type regime with explicit decaying solutions.

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "refract/curve.hpp"
#include "refract/error.hpp"

namespace refract {

enum class CoeffKind { affine, logistic, sqrt_affine, constant, custom };
enum class CoeffRole { drift, diffusion, bound };

inline const char* to_string(CoeffKind k) {
    switch (k) {
        case CoeffKind::affine: return "affine";
        case CoeffKind::logistic: return "logistic";
        case CoeffKind::sqrt_affine: return "sqrt_affine";
        case CoeffKind::constant: return "constant";
        case CoeffKind::custom: return "custom";
    }
    return "?";
}

/// One sample of a user-supplied coefficient table.
struct CoeffSample {
    double x = 0.0;
    double value = 0.0;
    double deriv = 0.0;
};

/// A scalar coefficient x -> value on the nonnegative axis.
///
/// Closed-form kinds evaluate their formula for any x (the working-domain
/// restriction is a property of the solve, not of the formula); custom tables
/// extend linearly beyond their last sample so that simulated paths slightly
/// outside the tabulated range remain well defined.
class CoefficientSpec {
public:
    CoeffKind kind = CoeffKind::constant;
    double p0 = 0.0, p1 = 0.0, p2 = 0.0;
    std::vector<CoeffSample> table;

    static CoefficientSpec affine(double c0, double c1) {
        CoefficientSpec s;
        s.kind = CoeffKind::affine;
        s.p0 = c0;
        s.p1 = c1;
        return s;
    }
    static CoefficientSpec logistic(double m0, double m1, double cap) {
        CoefficientSpec s;
        s.kind = CoeffKind::logistic;
        s.p0 = m0;
        s.p1 = m1;
        s.p2 = cap;
        return s;
    }
    static CoefficientSpec sqrt_affine(double s0, double s1) {
        CoefficientSpec s;
        s.kind = CoeffKind::sqrt_affine;
        s.p0 = s0;
        s.p1 = s1;
        return s;
    }
    static CoefficientSpec constant(double s0) {
        CoefficientSpec s;
        s.kind = CoeffKind::constant;
        s.p0 = s0;
        return s;
    }
    static CoefficientSpec custom(std::vector<CoeffSample> samples) {
        CoefficientSpec s;
        s.kind = CoeffKind::custom;
        s.table = std::move(samples);
        s.build_table_curve();
        return s;
    }

    double value(double x) const {
        switch (kind) {
            case CoeffKind::affine: return p0 + p1 * x;
            case CoeffKind::logistic: return p0 + p1 * x * (1.0 - x / p2);
            case CoeffKind::sqrt_affine: return std::sqrt(p0 + p1 * x);
            case CoeffKind::constant: return p0;
            case CoeffKind::custom: break;
        }
        if (!curve_) raise(Errc::validation, "custom coefficient has no table");
        if (x < curve_->x_min())
            return curve_->values().front() + curve_->derivs().front() * (x - curve_->x_min());
        if (x > curve_->x_max())
            return curve_->values().back() + curve_->derivs().back() * (x - curve_->x_max());
        return curve_->value(x);
    }

    double deriv(double x) const {
        switch (kind) {
            case CoeffKind::affine: return p1;
            case CoeffKind::logistic: return p1 * (1.0 - 2.0 * x / p2);
            case CoeffKind::sqrt_affine: return 0.5 * p1 / std::sqrt(p0 + p1 * x);
            case CoeffKind::constant: return 0.0;
            case CoeffKind::custom: break;
        }
        if (!curve_) raise(Errc::validation, "custom coefficient has no table");
        if (x < curve_->x_min()) return curve_->derivs().front();
        if (x > curve_->x_max()) return curve_->derivs().back();
        return curve_->deriv(x);
    }

    bool operator==(const CoefficientSpec& o) const {
        if (kind != o.kind || p0 != o.p0 || p1 != o.p1 || p2 != o.p2) return false;
        if (table.size() != o.table.size()) return false;
        for (std::size_t i = 0; i < table.size(); ++i)
            if (table[i].x != o.table[i].x || table[i].value != o.table[i].value ||
                table[i].deriv != o.table[i].deriv)
                return false;
        return true;
    }

private:
    void build_table_curve() {
        if (table.size() < 2)
            raise(Errc::validation, "custom coefficient table needs at least two samples");
        std::vector<double> x, v, d;
        x.reserve(table.size());
        for (const auto& s : table) {
            x.push_back(s.x);
            v.push_back(s.value);
            d.push_back(s.deriv);
        }
        // Limit the supplied slopes so the interpolant cannot overshoot
        // between monotone samples (the validator then checks the result).
        d = monotone_limited_slopes(x, v, d);
        curve_ = std::make_shared<const Curve>(std::move(x), std::move(v), std::move(d));
    }

    std::shared_ptr<const Curve> curve_;
};

struct ModelSpec {
    CoefficientSpec mu;     ///< drift, concave, mu(0) > 0
    CoefficientSpec sigma;  ///< diffusion, >= eps on the working domain
    CoefficientSpec bound;  ///< withdrawal bound F, nondecreasing concave
    double q = 0.0;         ///< discount rate, q > mu'(0+)
};

struct ModelOptions {
    double x_max = 50.0;          ///< right end of the working domain
    double epsilon = 1e-6;        ///< uniform ellipticity floor for sigma
    double concavity_tol = 1e-9;  ///< allowance on discrete second differences
};

struct Violation {
    std::string code;     ///< stable identifier, e.g. "DriftAtZeroNonpositive"
    std::string message;  ///< human-readable detail
};

namespace detail_model {

inline void check_concave_nondecreasing(const CoefficientSpec& c, double x_hi, double tol,
                                        const char* name, bool need_nondecreasing,
                                        std::vector<Violation>& out) {
    // Closed forms first: exact analytic conditions.
    switch (c.kind) {
        case CoeffKind::constant:
            return;
        case CoeffKind::affine:
            if (need_nondecreasing && c.p1 < 0.0)
                out.push_back({"BoundNotMonotone", std::string(name) + " has negative slope"});
            return;
        case CoeffKind::logistic:
            if (c.p2 <= 0.0 || c.p1 < 0.0)
                out.push_back({"NotConcave", std::string(name) + " logistic needs m1 >= 0, K > 0"});
            return;
        case CoeffKind::sqrt_affine:
            // sqrt of an affine function is concave wherever defined.
            return;
        case CoeffKind::custom:
            break;
    }
    // Tabulated: discrete checks on a uniform grid over the working domain.
    const int n = 2000;
    const double h = x_hi / n;
    double prev2 = c.value(0.0), prev = c.value(h);
    if (need_nondecreasing && prev < prev2 - tol)
        out.push_back({"BoundNotMonotone", std::string(name) + " decreases near 0"});
    for (int i = 2; i <= n; ++i) {
        const double cur = c.value(i * h);
        if (need_nondecreasing && cur < prev - tol) {
            out.push_back({"BoundNotMonotone",
                           std::string(name) + " decreases near x = " + std::to_string(i * h)});
            return;
        }
        const double d2 = cur - 2.0 * prev + prev2;  // h^2 * f''
        if (d2 > tol) {
            out.push_back({"NotConcave", std::string(name) + " convex near x = " +
                                             std::to_string((i - 1) * h) +
                                             " (second difference " + std::to_string(d2) + ")"});
            return;
        }
        prev2 = prev;
        prev = cur;
    }
}

}  // namespace detail_model

/// Check all standing assumptions; returns every violation found (empty = valid).
inline std::vector<Violation> check_model(const ModelSpec& s, const ModelOptions& opt = {}) {
    std::vector<Violation> out;

    // Structural kind/role compatibility.
    if (s.mu.kind == CoeffKind::sqrt_affine)
        out.push_back({"BadKindForRole", "sqrt_affine is a diffusion shape, not a drift"});
    if (s.sigma.kind == CoeffKind::logistic)
        out.push_back({"BadKindForRole", "logistic is a drift shape, not a diffusion"});
    if (s.bound.kind == CoeffKind::logistic || s.bound.kind == CoeffKind::sqrt_affine)
        out.push_back({"BadKindForRole", "withdrawal bound must be affine, constant, or custom"});
    if (!out.empty()) return out;  // later checks assume sensible shapes

    if (!(s.q > 0.0)) out.push_back({"DiscountTooSmall", "discount rate q must be positive"});

    if (!(s.mu.value(0.0) > 0.0))
        out.push_back({"DriftAtZeroNonpositive",
                       "mu(0) = " + std::to_string(s.mu.value(0.0)) + " must be positive"});
    if (!(s.mu.deriv(0.0) < s.q))
        out.push_back({"DiscountTooSmall", "q = " + std::to_string(s.q) +
                                               " must exceed mu'(0+) = " +
                                               std::to_string(s.mu.deriv(0.0))});

    // Diffusion positivity on a dense grid (also catches sqrt_affine domains
    // whose argument goes negative inside [0, x_max]).
    {
        const int n = 2000;
        for (int i = 0; i <= n; ++i) {
            const double x = opt.x_max * i / n;
            double sig = std::numeric_limits<double>::quiet_NaN();
            if (s.sigma.kind == CoeffKind::sqrt_affine && s.sigma.p0 + s.sigma.p1 * x <= 0.0) {
                sig = 0.0;
            } else {
                sig = s.sigma.value(x);
            }
            if (!(sig >= opt.epsilon)) {
                out.push_back({"DiffusionDegenerate",
                               "sigma(x) < eps at x = " + std::to_string(x)});
                break;
            }
        }
    }

    if (s.bound.value(0.0) < 0.0)
        out.push_back({"BoundNotMonotone", "F(0) must be nonnegative"});

    detail_model::check_concave_nondecreasing(s.mu, opt.x_max, opt.concavity_tol, "mu",
                                              /*need_nondecreasing=*/false, out);
    detail_model::check_concave_nondecreasing(s.bound, opt.x_max, opt.concavity_tol, "F",
                                              /*need_nondecreasing=*/true, out);
    return out;
}

class ValidationError : public Error {
public:
    ValidationError(std::vector<Violation> v, const std::string& what)
        : Error(Errc::validation, what), violations_(std::move(v)) {}
    const std::vector<Violation>& violations() const noexcept { return violations_; }

private:
    std::vector<Violation> violations_;
};

/// A model that passed check_model, together with its working domain.
class ValidatedModel {
public:
    const ModelSpec& spec() const noexcept { return spec_; }
    const ModelOptions& options() const noexcept { return opts_; }
    double q() const noexcept { return spec_.q; }

    /// Left end of the extended working domain: ~10 standard deviations of
    /// the frozen-sigma OU regime below the origin.
    double x_lo() const { return -10.0 * spec_.sigma.value(0.0) / std::sqrt(spec_.q); }

    /// Right end: far enough out that the decaying solution and the resolvent
    /// envelope have both settled.
    double x_hi() const {
        const double scale =
            10.0 * (spec_.mu.value(0.0) + spec_.bound.value(0.0) + spec_.bound.deriv(0.0)) / spec_.q;
        return std::max(opts_.x_max, scale);
    }

private:
    friend ValidatedModel validate_model(const ModelSpec&, const ModelOptions&);
    ValidatedModel(ModelSpec s, ModelOptions o) : spec_(std::move(s)), opts_(o) {}
    ModelSpec spec_;
    ModelOptions opts_;
};

/// Validate or throw a ValidationError listing every violation.
inline ValidatedModel validate_model(const ModelSpec& s, const ModelOptions& opt = {}) {
    auto violations = check_model(s, opt);
    if (!violations.empty()) {
        std::ostringstream msg;
        msg << "model rejected:";
        for (const auto& v : violations) msg << "\n  [" << v.code << "] " << v.message;
        throw ValidationError(std::move(violations), msg.str());
    }
    return ValidatedModel(s, opt);
}

/// Coefficient values at one point of the extended real line.
struct Coeffs {
    double mu = 0.0;
    double sigma = 0.0;
    double F = 0.0;
    double mu_prime = 0.0;
    double F_prime = 0.0;
};

/// Validated model plus the affine/frozen extension to x < 0.
class ExtendedModel {
public:
    explicit ExtendedModel(ValidatedModel base)
        : base_(std::move(base)),
          mu0_(base_.spec().mu.value(0.0)),
          mu_d0_(base_.spec().mu.deriv(0.0)),
          f0_(base_.spec().bound.value(0.0)),
          f_d0_(base_.spec().bound.deriv(0.0)),
          sigma0_(base_.spec().sigma.value(0.0)) {}

    const ValidatedModel& base() const noexcept { return base_; }
    double q() const noexcept { return base_.q(); }
    double x_lo() const { return base_.x_lo(); }
    double x_hi() const { return base_.x_hi(); }

    /// mu(0), mu'(0+), F(0), F'(0+), sigma(0) — the extension data.
    double mu0() const noexcept { return mu0_; }
    double mu_prime0() const noexcept { return mu_d0_; }
    double f0() const noexcept { return f0_; }
    double f_prime0() const noexcept { return f_d0_; }
    double sigma0() const noexcept { return sigma0_; }

    Coeffs eval_coeffs(double x) const {
        // Generous guard: catches nonsense arguments (inf, NaN, overflowed
        // positions) while leaving room for far-right tail integration, whose
        // start point can sit orders of magnitude beyond the working domain.
        const double span = 1e6 * std::max({1.0, std::abs(x_lo()), x_hi()});
        if (!(std::abs(x) <= span))
            raise(Errc::domain, "coefficient evaluation far outside the working domain, x = " +
                                    std::to_string(x));
        Coeffs c;
        if (x < 0.0) {
            c.mu = mu0_ + mu_d0_ * x;
            c.sigma = sigma0_;
            c.F = f0_ + f_d0_ * x;
            c.mu_prime = mu_d0_;
            c.F_prime = f_d0_;
        } else {
            const ModelSpec& s = base_.spec();
            c.mu = s.mu.value(x);
            c.sigma = s.sigma.value(x);
            c.F = s.bound.value(x);
            c.mu_prime = s.mu.deriv(x);
            c.F_prime = s.bound.deriv(x);
        }
        return c;
    }

private:
    ValidatedModel base_;
    double mu0_, mu_d0_, f0_, f_d0_, sigma0_;
};

inline ExtendedModel extend_to_real_line(const ValidatedModel& m) { return ExtendedModel(m); }

}  // namespace refract
