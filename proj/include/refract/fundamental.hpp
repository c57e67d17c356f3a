#pragma once

// Fundamental solutions of the killed generator equations.
//
// Three objects drive the whole solver; all solve (G - q) u = 0 for a
// diffusion generator G = (sigma^2/2) d^2/dx^2 + c(x) d/dx:
//
//   psi        increasing, c = mu (no withdrawal), psi(0) = 0, psi'(0+) = 1;
//   phi        decreasing, c = mu - F (full withdrawal), phi(0) = 1,
//              phi(+inf) = 0;
//   phi_tilde  increasing on the negative axis for the extended coefficients,
//              phi_tilde(0) = 1, phi_tilde(-inf) = 0.
//
// Each is available through two backings:
//
//   * tabulated: adaptive ODE integration. psi is a forward initial-value
//     problem (switching to log-derivative form if it overflows); phi comes
//     from the backward Riccati equation for v = phi'/phi started at the
//     decaying root, which isolates the decreasing solution without shooting.
//
//   * closed_form: for affine drift with constant, affine, or sqrt-affine
//     diffusion, via parabolic cylinder / Kummer / Tricomi kernels. These are
//     evaluated as sums of log-parts, because the Gaussian-type prefactors
//     and the confluent factors cancel exponents of order x^2 against each
//     other.
//
// Exposed second derivatives always come from the ODE identity
// u'' = 2 (q u - c u') / sigma^2; closed-form backings additionally provide
// the direct parameter-shift second derivative so tests can check the kernel
// formulas against the ODE without circularity.

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "refract/curve.hpp"
#include "refract/detail/ode.hpp"
#include "refract/detail/rootfind.hpp"
#include "refract/error.hpp"
#include "refract/model.hpp"
#include "refract/specfun.hpp"

namespace refract {

enum class FundamentalKind { psi, phi, phi_tilde };

struct SolveOptions {
    double x_hi = 0.0;     ///< 0 -> model default
    double tol = 1e-11;    ///< ODE relative tolerance
    double grid_dx = 1e-2; ///< output node spacing
};

// ---------------------------------------------------------------------------
// Closed-form kernels
// ---------------------------------------------------------------------------

class KernelBase {
public:
    struct Point {
        double value = 0.0;
        double deriv = 0.0;
        double second = 0.0;     ///< direct parameter-shift second derivative
        double log_value = 0.0;  ///< log(value); -inf at a zero
        // Log-scale companions: finite even where value/deriv overflow, so
        // ratio-based consumers never see inf/inf.
        double ratio = 0.0;         ///< u'/u
        double second_ratio = 0.0;  ///< u''/u
    };
    virtual ~KernelBase() = default;
    virtual Point eval(double x) const = 0;
    virtual double x_max() const = 0;
    virtual const char* family() const = 0;
};

namespace detail_fd {

// Shared composition for kernels of the form u = exp(g(x)) * Phi(w(x)):
//   u'/u  = g' + r w',           with r = Phi'/Phi,
//   u''/u = g'' + (g')^2 + 2 g' r w' + R (w')^2 + r w'',  with R = Phi''/Phi.
struct Parts {
    double g, gp, gpp;
    double w, wp, wpp;
    double log_phi, r, R;
};

inline KernelBase::Point compose(const Parts& p, double log_norm) {
    KernelBase::Point out;
    out.log_value = p.g + p.log_phi - log_norm;
    out.value = std::exp(out.log_value);
    out.ratio = p.gp + p.r * p.wp;
    out.second_ratio = p.gpp + p.gp * p.gp + 2.0 * p.gp * p.r * p.wp + p.R * p.wp * p.wp +
                       p.r * p.wpp;
    out.deriv = out.ratio * out.value;
    out.second = out.second_ratio * out.value;
    return out;
}

inline double sign_of(double x) { return x >= 0.0 ? 1.0 : -1.0; }

// Ratio of two same-sign special function results, exp(log difference).
inline double log_ratio(const SpecFunResult& num, const SpecFunResult& den) {
    if (num.sign == 0) return 0.0;
    if (den.sign == 0) raise(Errc::numerical, "kernel factor vanished where a ratio is needed");
    return num.sign * den.sign * std::exp(num.log_abs - den.log_abs);
}

// --- constant sigma -------------------------------------------------------

/// Decreasing solution for drift c0 + c1 x, constant sigma. For c1 != 0 a
/// parabolic cylinder kernel; for c1 == 0 a plain exponential.
class DecaySigmaConst final : public KernelBase {
public:
    DecaySigmaConst(double c0, double c1, double sigma, double q)
        : c0_(c0), c1_(c1), s2_(sigma * sigma) {
        if (std::abs(c1) < 1e-14) {
            exponential_ = true;
            theta_ = (std::sqrt(c0 * c0 + 2.0 * q * s2_) + c0) / s2_;
            x_max_ = 1e18;
            return;
        }
        const double s = sign_of(c1);
        lambda_ = q / std::abs(c1) + (s > 0.0 ? 1.0 : 0.0);
        zfac_ = std::sqrt(2.0 / std::abs(c1)) / sigma;
        zsign_ = s;
        zp_ = std::sqrt(2.0 * std::abs(c1)) / sigma;  // dz/dx, constant and positive
        if (std::abs(z_of(0.0)) >= kSpecFunZMax)
            raise(Errc::unsupported, "constant-sigma kernel argument out of range at x = 0");
        // |z(x)| grows linearly; cap the domain at |z| = Z_MAX.
        const double bound = kSpecFunZMax / zfac_;
        const double r1 = (bound - c0) / c1, r2 = (-bound - c0) / c1;
        x_max_ = std::max(r1, r2);
        norm_ = raw(0.0);
    }

    Point eval(double x) const override {
        if (exponential_) {
            Point p;
            p.log_value = -theta_ * x;
            p.value = std::exp(p.log_value);
            p.ratio = -theta_;
            p.second_ratio = theta_ * theta_;
            p.deriv = p.ratio * p.value;
            p.second = p.second_ratio * p.value;
            return p;
        }
        return compose(raw_parts(x), norm_);
    }
    double x_max() const override { return x_max_; }
    const char* family() const override { return "sigma_const"; }

private:
    double z_of(double x) const { return zsign_ * zfac_ * (c0_ + c1_ * x); }

    Parts raw_parts(double x) const {
        Parts p;
        p.g = -x * (2.0 * c0_ + c1_ * x) / (2.0 * s2_);
        p.gp = -(c0_ + c1_ * x) / s2_;
        p.gpp = -c1_ / s2_;
        p.w = z_of(x);
        p.wp = zp_;
        p.wpp = 0.0;
        const auto d0 = parabolic_cylinder_d(lambda_, p.w);
        const auto d1 = parabolic_cylinder_d(lambda_ + 1.0, p.w);
        p.log_phi = d0.log_abs;
        p.r = -0.5 * p.w - lambda_ * log_ratio(d1, d0);
        p.R = 0.25 * p.w * p.w + lambda_ - 0.5;  // Weber ODE
        return p;
    }
    double raw(double x) const {
        const Parts p = raw_parts(x);
        return p.g + p.log_phi;
    }

    double c0_, c1_, s2_;
    bool exponential_ = false;
    double theta_ = 0.0;
    double lambda_ = 0.0, zfac_ = 0.0, zsign_ = 1.0, zp_ = 0.0;
    double norm_ = 0.0, x_max_ = 0.0;
};

/// Increasing-type second solution for drift m0 + m1 x, constant sigma:
/// the even Weber solution, evaluated as the symmetric parabolic cylinder
/// combination D_{-lambda}(z) + D_{-lambda}(-z) (both solve the same Weber
/// equation, the sum is even and positive). Keeping the argument z — rather
/// than the equivalent Kummer form in z^2/2 — means the usable domain is
/// |z| <= Z_MAX instead of z^2/2 <= Z_MAX. Plain exponential when m1 == 0.
/// Normalised to 1 at x = 0.
class GrowthSigmaConst final : public KernelBase {
public:
    GrowthSigmaConst(double m0, double m1, double sigma, double q)
        : m0_(m0), m1_(m1), s2_(sigma * sigma) {
        if (std::abs(m1) < 1e-14) {
            exponential_ = true;
            rho_ = (std::sqrt(m0 * m0 + 2.0 * q * s2_) - m0) / s2_;
            x_max_ = 1e18;
            return;
        }
        const double a0 = q / std::abs(m1) + 0.5 * sign_of(m1);
        lambda_ = a0 + 0.5;  // D_{-lambda} solves u'' = (z^2/4 + lambda - 1/2) u
        weber_a_ = a0;
        zfac_ = std::sqrt(2.0 / std::abs(m1)) / sigma;
        zp_ = zfac_ * m1;  // signed slope of z(x)
        if (std::abs(z_of(0.0)) >= kSpecFunZMax)
            raise(Errc::unsupported, "constant-sigma kernel argument out of range at x = 0");
        const double bound = kSpecFunZMax / zfac_;
        x_max_ = std::max((bound - m0) / m1, (-bound - m0) / m1);
        norm_ = 0.0;
        const Parts p0 = raw_parts(0.0);
        norm_ = p0.g + p0.log_phi;
    }

    Point eval(double x) const override {
        if (exponential_) {
            Point p;
            p.log_value = rho_ * x;
            p.value = std::exp(p.log_value);
            p.ratio = rho_;
            p.second_ratio = rho_ * rho_;
            p.deriv = p.ratio * p.value;
            p.second = p.second_ratio * p.value;
            return p;
        }
        return compose(raw_parts(x), norm_);
    }
    double x_max() const override { return x_max_; }
    const char* family() const override { return "sigma_const"; }

private:
    double z_of(double x) const { return zfac_ * (m0_ + m1_ * x); }

    Parts raw_parts(double x) const {
        Parts p;
        p.g = -x * (2.0 * m0_ + m1_ * x) / (2.0 * s2_);
        p.gp = -(m0_ + m1_ * x) / s2_;
        p.gpp = -m1_ / s2_;
        const double z = z_of(x);
        p.w = z;
        p.wp = zp_;
        p.wpp = 0.0;
        const auto dp = parabolic_cylinder_d(lambda_, z);
        const auto dm = parabolic_cylinder_d(lambda_, -z);
        const auto d1p = parabolic_cylinder_d(lambda_ + 1.0, z);
        const auto d1m = parabolic_cylinder_d(lambda_ + 1.0, -z);
        const auto sum = detail_sf::linear_combine(1.0, dp, 1.0, dm);
        p.log_phi = sum.log_abs;
        // y = D(z) + D(-z); y' = -(z/2) y - lambda (D1(z) - D1(-z)).
        const auto diff = detail_sf::linear_combine(1.0, d1p, -1.0, d1m);
        const double dd = diff.sign * std::exp(diff.log_abs - sum.log_abs);
        p.r = -0.5 * z - lambda_ * dd;
        p.R = 0.25 * z * z + weber_a_;  // Weber ODE for the even solution
        return p;
    }

    double m0_, m1_, s2_;
    bool exponential_ = false;
    double rho_ = 0.0;
    double lambda_ = 0.0, weber_a_ = 0.0, zfac_ = 0.0, zp_ = 0.0;
    double norm_ = 0.0, x_max_ = 0.0;
};

// --- affine sigma ---------------------------------------------------------

/// Kummer-type kernel for sigma = s0 + s1 x (s1 > 0) and affine drift
/// a0x + a1x... drift d0 + d1 x. Covers both the decreasing solution (with
/// the full-withdrawal drift) and the increasing-type second solution (with
/// reflected parameters), selected by `growing`.
class KernelSigmaAffine final : public KernelBase {
public:
    KernelSigmaAffine(double d0, double d1, double s0, double s1, double q, bool growing)
        : s0_(s0), s1_(s1) {
        if (!(s1 > 0.0)) raise(Errc::unsupported, "affine-sigma kernel needs s1 > 0");
        const double s1sq = s1 * s1;
        const double delta = std::sqrt((s1sq - 2.0 * d1) * (s1sq - 2.0 * d1) + 8.0 * q * s1sq);
        const double a = (delta - s1sq + 2.0 * d1) / (2.0 * s1sq);
        const double b = 1.0 + delta / s1sq;
        A_ = 2.0 * (d0 * s1 - d1 * s0) / s1sq;
        if (growing) {
            // Second solution: exponent b-a-1 and reflected Kummer parameters.
            e_ = b - a - 1.0;
            ka_ = 1.0 + a - b;
            kb_ = 2.0 - b;
        } else {
            e_ = -a;
            ka_ = a;
            kb_ = b;
        }
        if (std::abs(A_) / s0 >= kSpecFunZMax)
            raise(Errc::unsupported, "affine-sigma kernel argument out of range at x = 0");
        norm_ = 0.0;
        norm_ = raw_parts(0.0).g + raw_parts(0.0).log_phi;
    }

    Point eval(double x) const override { return compose(raw_parts(x), norm_); }
    double x_max() const override { return 1e18; }  // |w| only shrinks with x
    const char* family() const override { return "sigma_affine"; }

private:
    Parts raw_parts(double x) const {
        const double S = s0_ + s1_ * x;
        Parts p;
        p.g = e_ * std::log(S / s0_);
        p.gp = e_ * s1_ / S;
        p.gpp = -e_ * s1_ * s1_ / (S * S);
        p.w = A_ / S;
        p.wp = -A_ * s1_ / (S * S);
        p.wpp = 2.0 * A_ * s1_ * s1_ / (S * S * S);
        if (std::abs(A_) < 1e-14) {
            // Drift proportional to sigma: the Kummer factor is constant 1.
            p.log_phi = 0.0;
            p.r = 0.0;
            p.R = 0.0;
            return p;
        }
        const auto mv = kummer_m(ka_, kb_, p.w);
        const auto m1v = kummer_m(ka_ + 1.0, kb_ + 1.0, p.w);
        if (mv.sign <= 0)
            raise(Errc::numerical, "affine-sigma kernel factor is not positive on the domain");
        p.log_phi = mv.log_abs;
        p.r = (ka_ / kb_) * log_ratio(m1v, mv);
        p.R = (ka_ + (p.w - kb_) * p.r) / p.w;  // Kummer ODE
        return p;
    }

    double s0_, s1_;
    double A_ = 0.0, e_ = 0.0, ka_ = 0.0, kb_ = 0.0;
    double norm_ = 0.0;
};

// --- affine sigma^2 (sigma = sqrt(s0 + s1 x)) ------------------------------

/// Tricomi kernel for the decreasing solution with drift d0 + d1 x, d1 != 0.
class DecaySigma2Affine final : public KernelBase {
public:
    DecaySigma2Affine(double d0, double d1, double s0, double s1, double q)
        : d1_(d1), s0_(s0), s1_(s1) {
        if (!(s1 > 0.0)) raise(Errc::unsupported, "sqrt-affine-sigma kernel needs s1 > 0");
        if (std::abs(d1) < 1e-12)
            raise(Errc::unsupported,
                  "sqrt-affine-sigma kernel is degenerate for slope-free drift (use the ODE path)");
        const double a = q / std::abs(d1);
        const double b = 1.0 + 2.0 * (d1 * s0 - d0 * s1) / (s1 * s1);
        if (d1 > 0.0) {
            ua_ = 1.0 + a;
            ub_ = 1.0 + b;
            wfac_ = 2.0 * d1 / (s1 * s1);
            gexp_ = b;
            glin_ = -2.0 * d1 / s1;
        } else {
            ua_ = a;
            ub_ = 1.0 - b;
            wfac_ = -2.0 * d1 / (s1 * s1);
            gexp_ = 0.0;
            glin_ = 0.0;
        }
        x_max_ = (kSpecFunZMax / wfac_ - s0) / s1;
        if (!(x_max_ > 0.0))
            raise(Errc::unsupported, "sqrt-affine-sigma kernel argument out of range at x = 0");
        norm_ = 0.0;
        const Parts p0 = raw_parts(0.0);
        norm_ = p0.g + p0.log_phi;
    }

    Point eval(double x) const override { return compose(raw_parts(x), norm_); }
    double x_max() const override { return x_max_; }
    const char* family() const override { return "sigma2_affine"; }

private:
    Parts raw_parts(double x) const {
        const double S = s0_ + s1_ * x;
        Parts p;
        p.g = glin_ * x + gexp_ * std::log(S / s0_);
        p.gp = glin_ + gexp_ * s1_ / S;
        p.gpp = -gexp_ * s1_ * s1_ / (S * S);
        p.w = wfac_ * S;
        p.wp = wfac_ * s1_;
        p.wpp = 0.0;
        const auto uv = tricomi_u(ua_, ub_, p.w);
        const auto u1v = tricomi_u(ua_ + 1.0, ub_ + 1.0, p.w);
        p.log_phi = uv.log_abs;
        p.r = -ua_ * log_ratio(u1v, uv);
        p.R = (ua_ + (p.w - ub_) * p.r) / p.w;  // U solves the Kummer ODE too
        return p;
    }

    double d1_, s0_, s1_;
    double ua_ = 0.0, ub_ = 0.0, wfac_ = 0.0, gexp_ = 0.0, glin_ = 0.0;
    double norm_ = 0.0, x_max_ = 0.0;
};

/// Kummer kernel for the increasing-type solution with drift m0 + m1 x,
/// m1 != 0, sigma^2 affine.
class GrowthSigma2Affine final : public KernelBase {
public:
    GrowthSigma2Affine(double m0, double m1, double s0, double s1, double q)
        : s0_(s0), s1_(s1) {
        if (!(s1 > 0.0)) raise(Errc::unsupported, "sqrt-affine-sigma kernel needs s1 > 0");
        if (std::abs(m1) < 1e-12)
            raise(Errc::unsupported,
                  "sqrt-affine-sigma kernel is degenerate for slope-free drift (use the ODE path)");
        const double a = q / std::abs(m1);
        const double b = 1.0 + 2.0 * (m1 * s0 - m0 * s1) / (s1 * s1);
        if (m1 > 0.0) {
            ka_ = 1.0 + a;
            kb_ = 1.0 + b;
            wfac_ = 2.0 * m1 / (s1 * s1);
            gexp_ = b;
            glin_ = -2.0 * m1 / s1;
        } else {
            ka_ = a + b;
            kb_ = b;
            wfac_ = -2.0 * m1 / (s1 * s1);
            gexp_ = b;
            glin_ = 0.0;
        }
        x_max_ = (kSpecFunZMax / wfac_ - s0) / s1;
        if (!(x_max_ > 0.0))
            raise(Errc::unsupported, "sqrt-affine-sigma kernel argument out of range at x = 0");
        norm_ = 0.0;
        const Parts p0 = raw_parts(0.0);
        norm_ = p0.g + p0.log_phi;
    }

    Point eval(double x) const override { return compose(raw_parts(x), norm_); }
    double x_max() const override { return x_max_; }
    const char* family() const override { return "sigma2_affine"; }

private:
    Parts raw_parts(double x) const {
        const double S = s0_ + s1_ * x;
        Parts p;
        p.g = glin_ * x + gexp_ * std::log(S / s0_);
        p.gp = glin_ + gexp_ * s1_ / S;
        p.gpp = -gexp_ * s1_ * s1_ / (S * S);
        p.w = wfac_ * S;
        p.wp = wfac_ * s1_;
        p.wpp = 0.0;
        const auto mv = kummer_m(ka_, kb_, p.w);
        const auto m1v = kummer_m(ka_ + 1.0, kb_ + 1.0, p.w);
        if (mv.sign <= 0)
            raise(Errc::numerical, "sqrt-affine-sigma kernel factor is not positive on the domain");
        p.log_phi = mv.log_abs;
        p.r = (ka_ / kb_) * log_ratio(m1v, mv);
        p.R = (ka_ + (p.w - kb_) * p.r) / p.w;
        return p;
    }

    double s0_, s1_;
    double ka_ = 0.0, kb_ = 0.0, wfac_ = 0.0, gexp_ = 0.0, glin_ = 0.0;
    double norm_ = 0.0, x_max_ = 0.0;
};

/// psi assembled from the two kernel solutions of its family:
///   psi = kappa (p - phi0),  kappa = 1 / (p'(0) - phi0'(0)),
/// where p is the increasing-type solution and phi0 the decreasing solution
/// for the *uncontrolled* drift. Gives psi(0) = 0, psi'(0+) = 1 exactly.
class PsiAssembly final : public KernelBase {
public:
    PsiAssembly(std::shared_ptr<const KernelBase> p, std::shared_ptr<const KernelBase> phi0)
        : p_(std::move(p)), phi0_(std::move(phi0)) {
        const double dp = p_->eval(0.0).deriv;
        const double d0 = phi0_->eval(0.0).deriv;
        if (!(dp > d0)) raise(Errc::numerical, "kernel slopes cannot normalise psi at the origin");
        kappa_ = 1.0 / (dp - d0);
        x_max_ = std::min(p_->x_max(), phi0_->x_max());
    }

    Point eval(double x) const override {
        const Point a = p_->eval(x);
        const Point b = phi0_->eval(x);
        Point out;
        out.value = kappa_ * (a.value - b.value);
        out.deriv = kappa_ * (a.deriv - b.deriv);
        out.second = kappa_ * (a.second - b.second);
        // Ratios through the log-scale data: with t = phi0/p (in (0,1] for
        // x >= 0, since p grows and phi0 decays from a shared value 1),
        //   psi'/psi = (r_p - r_0 t) / (1 - t),
        // which stays finite long after p itself has overflowed. expm1 keeps
        // 1 - t accurate near the origin where both factors are ~1.
        const double dlog = b.log_value - a.log_value;
        const double t = std::exp(dlog);
        const double one_minus_t = -std::expm1(dlog);
        out.ratio = (a.ratio - b.ratio * t) / one_minus_t;
        out.second_ratio = (a.second_ratio - b.second_ratio * t) / one_minus_t;
        out.log_value = std::log(kappa_) + a.log_value + std::log1p(-t);
        return out;
    }
    double x_max() const override { return x_max_; }
    const char* family() const override { return p_->family(); }
    double kappa() const { return kappa_; }

private:
    std::shared_ptr<const KernelBase> p_, phi0_;
    double kappa_ = 0.0, x_max_ = 0.0;
};

/// Reflection adaptor: evaluates a decreasing kernel at -x, turning it into
/// an increasing solution on the negative axis (used for phi_tilde).
class MirrorKernel final : public KernelBase {
public:
    explicit MirrorKernel(std::shared_ptr<const KernelBase> base) : base_(std::move(base)) {}
    Point eval(double x) const override {
        Point p = base_->eval(-x);
        p.deriv = -p.deriv;
        p.ratio = -p.ratio;
        return p;
    }
    double x_max() const override { return 0.0; }
    double x_min() const { return -base_->x_max(); }
    const char* family() const override { return base_->family(); }

private:
    std::shared_ptr<const KernelBase> base_;
};

}  // namespace detail_fd

// ---------------------------------------------------------------------------
// FundamentalSolution
// ---------------------------------------------------------------------------

class FundamentalSolution {
public:
    enum class Backing { closed_form, tabulated };

    FundamentalKind kind() const noexcept { return kind_; }
    Backing backing() const noexcept { return backing_; }
    double domain_lo() const noexcept { return lo_; }
    double domain_hi() const noexcept { return hi_; }
    double q() const noexcept { return q_; }
    double drift(double x) const { return drift_(x); }
    double sigma(double x) const { return sigma_(x); }

    double value(double x) const {
        switch (rep(x)) {
            case Rep::kernel: return kernel_->eval(x).value;
            case Rep::linear: return lin_.value(x);
            case Rep::logpiece: return std::exp(logc_.value(x));  // may overflow to inf
        }
        return 0.0;
    }

    double deriv(double x) const {
        switch (rep(x)) {
            case Rep::kernel: return kernel_->eval(x).deriv;
            case Rep::linear: return lin_.deriv(x);
            case Rep::logpiece: return logc_.deriv(x) * std::exp(logc_.value(x));
        }
        return 0.0;
    }

    /// log of the (positive) solution; -inf where it vanishes.
    double log_value(double x) const {
        switch (rep(x)) {
            case Rep::kernel: return kernel_->eval(x).log_value;
            case Rep::linear: {
                const double v = lin_.value(x);
                return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
            }
            case Rep::logpiece: return logc_.value(x);
        }
        return 0.0;
    }

    /// u'(x)/u(x), finite and well-scaled even where u itself overflows.
    double ratio(double x) const {
        switch (rep(x)) {
            case Rep::kernel: return kernel_->eval(x).ratio;
            case Rep::linear: return lin_.deriv(x) / lin_.value(x);
            case Rep::logpiece: return logc_.deriv(x);
        }
        return 0.0;
    }

    /// Second derivative via the ODE identity u'' = 2 (q u - c u') / sigma^2.
    double second_deriv(double x) const {
        const double s = sigma_(x);
        return 2.0 * (q_ * value(x) - drift_(x) * deriv(x)) / (s * s);
    }

    /// u''/u via the same identity (ratio form; safe in the log regime).
    double second_ratio(double x) const {
        const double s = sigma_(x);
        return 2.0 * (q_ - drift_(x) * ratio(x)) / (s * s);
    }

    /// Direct parameter-shift second derivative of the closed form. Only for
    /// closed_form backing; lets tests verify the kernel formula against the
    /// ODE without circular use of the identity above.
    double kernel_second_deriv(double x) const {
        if (backing_ != Backing::closed_form)
            raise(Errc::unsupported, "kernel second derivative requires a closed-form backing");
        return kernel_->eval(x).second;
    }

    const char* family() const {
        return backing_ == Backing::closed_form ? kernel_->family() : "tabulated";
    }

    const Curve* linear_piece() const { return lin_.empty() ? nullptr : &lin_; }
    const Curve* log_piece() const { return logc_.empty() ? nullptr : &logc_; }
    double switch_x() const { return switch_x_; }

    // -- factories used by the solvers ------------------------------------
    static FundamentalSolution make_tabulated(FundamentalKind kind, Curve lin, Curve logc,
                                              double switch_x, double lo, double hi,
                                              std::function<double(double)> drift,
                                              std::function<double(double)> sigma, double q) {
        FundamentalSolution f;
        f.kind_ = kind;
        f.backing_ = Backing::tabulated;
        f.lin_ = std::move(lin);
        f.logc_ = std::move(logc);
        f.switch_x_ = switch_x;
        f.lo_ = lo;
        f.hi_ = hi;
        f.drift_ = std::move(drift);
        f.sigma_ = std::move(sigma);
        f.q_ = q;
        return f;
    }

    static FundamentalSolution make_closed_form(FundamentalKind kind,
                                                std::shared_ptr<const KernelBase> kernel, double lo,
                                                double hi, std::function<double(double)> drift,
                                                std::function<double(double)> sigma, double q) {
        FundamentalSolution f;
        f.kind_ = kind;
        f.backing_ = Backing::closed_form;
        f.kernel_ = std::move(kernel);
        f.lo_ = lo;
        f.hi_ = hi;
        f.drift_ = std::move(drift);
        f.sigma_ = std::move(sigma);
        f.q_ = q;
        return f;
    }

private:
    enum class Rep { kernel, linear, logpiece };
    Rep rep(double x) const {
        if (backing_ == Backing::closed_form) return Rep::kernel;
        if (!lin_.empty() && (logc_.empty() || x <= switch_x_)) return Rep::linear;
        return Rep::logpiece;
    }

    FundamentalKind kind_ = FundamentalKind::psi;
    Backing backing_ = Backing::tabulated;
    Curve lin_;    // (u, u') — empty when unused
    Curve logc_;   // (log u, u'/u) — empty when unused
    double switch_x_ = std::numeric_limits<double>::infinity();
    std::shared_ptr<const KernelBase> kernel_;
    double lo_ = 0.0, hi_ = 0.0, q_ = 0.0;
    std::function<double(double)> drift_, sigma_;
};

// ---------------------------------------------------------------------------
// ODE-backed solvers
// ---------------------------------------------------------------------------

namespace detail_fd {

inline double default_x_hi(const ExtendedModel& m, const SolveOptions& opt) {
    return opt.x_hi > 0.0 ? opt.x_hi : m.x_hi();
}

struct GenDrift {
    const ExtendedModel* m;
    bool full_withdrawal;
    double operator()(double x) const {
        const Coeffs c = m->eval_coeffs(x);
        return full_withdrawal ? c.mu - c.F : c.mu;
    }
};
struct GenSigma {
    const ExtendedModel* m;
    double operator()(double x) const { return m->eval_coeffs(x).sigma; }
};

}  // namespace detail_fd

/// Increasing solution psi on [0, x_hi]: forward IVP from psi(0) = 0,
/// psi'(0+) = 1. If the linear solve overflows (strongly negative drift far
/// out), it switches to integrating (log psi, psi'/psi) from the switch point.
inline FundamentalSolution solve_psi(const ExtendedModel& m, const SolveOptions& opt = {}) {
    const double x_hi = detail_fd::default_x_hi(m, opt);
    const double q = m.q();
    // Capture a copy: these closures outlive this call inside the returned
    // solution, which must not dangle when the caller moves the model.
    auto mu = [m](double x) { return m.eval_coeffs(x).mu; };
    auto sig = [m](double x) { return m.eval_coeffs(x).sigma; };

    detail::OdeOptions oo;
    oo.rtol = opt.tol;
    oo.atol = 1e-14;
    oo.dx_out = opt.grid_dx;

    auto rhs = [&](double x, const std::array<double, 2>& y, std::array<double, 2>& dy) {
        const Coeffs c = m.eval_coeffs(x);
        dy[0] = y[1];
        dy[1] = 2.0 * (q * y[0] - c.mu * y[1]) / (c.sigma * c.sigma);
    };
    // Switch to log-derivative form well before trouble. Two triggers:
    // magnitude (long before overflow), and log-slope u'/u — between output
    // nodes the (u, u') pair is Hermite-interpolated, and for exponential-type
    // growth the interpolation error scales like (u'/u * dx_out)^4 relative to
    // u, so a steep solution must be handed to the (log u, u'/u) form even
    // while its values are still small. The |u| > 1 clause keeps the slope
    // trigger quiet around the origin, where u'/u ~ 1/x is large but u is
    // polynomial and interpolates cleanly.
    constexpr double kMagGuard = 1e8;
    constexpr double kSlopeGuard = 3.0;
    auto stop = [&](double, const std::array<double, 2>& y) {
        if (std::abs(y[0]) > kMagGuard || std::abs(y[1]) > kMagGuard) return true;
        return std::abs(y[0]) > 1.0 && std::abs(y[1]) > kSlopeGuard * std::abs(y[0]);
    };
    auto lin_sol = detail::integrate_ode<2>(rhs, 0.0, x_hi, {0.0, 1.0}, oo, stop);

    std::vector<double> xs, vs, ds;
    xs.reserve(lin_sol.nodes.size());
    for (const auto& n : lin_sol.nodes) {
        xs.push_back(n.x);
        vs.push_back(n.y[0]);
        ds.push_back(n.y[1]);
    }
    Curve lin(std::move(xs), std::move(vs), std::move(ds));

    Curve logc;
    double switch_x = std::numeric_limits<double>::infinity();
    if (lin_sol.stopped_early) {
        // Continue in log-derivative form: L' = v, v' = 2(q - mu v)/s^2 - v^2.
        switch_x = lin_sol.x_end;
        const double u = lin_sol.y_end[0], du = lin_sol.y_end[1];
        auto rhs_log = [&](double x, const std::array<double, 2>& y, std::array<double, 2>& dy) {
            const Coeffs c = m.eval_coeffs(x);
            dy[0] = y[1];
            dy[1] = 2.0 * (q - c.mu * y[1]) / (c.sigma * c.sigma) - y[1] * y[1];
        };
        auto log_sol = detail::integrate_ode<2>(rhs_log, switch_x, x_hi,
                                                {std::log(u), du / u}, oo);
        std::vector<double> lx, lv, ld;
        for (const auto& n : log_sol.nodes) {
            lx.push_back(n.x);
            lv.push_back(n.y[0]);
            ld.push_back(n.y[1]);
        }
        logc = Curve(std::move(lx), std::move(lv), std::move(ld));
    }

    return FundamentalSolution::make_tabulated(FundamentalKind::psi, std::move(lin),
                                               std::move(logc), switch_x, 0.0, x_hi, mu, sig, q);
}

/// Decreasing solution phi on [0, x_hi], phi(0) = 1, via the backward Riccati
/// equation for v = phi'/phi. Backward integration attracts v onto the
/// decaying branch, so no shooting is required; the only delicate point is
/// the starting value far to the right.
inline FundamentalSolution solve_phi(const ExtendedModel& m, const SolveOptions& opt = {}) {
    const double q = m.q();
    // Capture a copy: these closures outlive this call inside the returned
    // solution, which must not dangle when the caller moves the model.
    auto drift = [m](double x) {
        const Coeffs c = m.eval_coeffs(x);
        return c.mu - c.F;
    };
    auto sig = [m](double x) { return m.eval_coeffs(x).sigma; };

    // Frozen-coefficient factorisation of the Riccati right-hand side:
    //   v' = 2(q - c v)/s^2 - v^2 = -(v - lam_p)(v - lam_m),
    // with lam_{p,m} the roots of (s^2/2) v^2 + c v - q. The decaying branch
    // tracks lam_m offset by the slow-manifold correction lam_m'/(lam_p -
    // lam_m) (drop delta' and delta^2 in the expansion v = lam_m + delta).
    auto lam_minus = [&](double x) {
        const double c = drift(x);
        const double s2 = sig(x) * sig(x);
        const double disc = c * c + 2.0 * q * s2;
        if (!(disc > 0.0))
            raise(Errc::numerical, "no decaying branch at x = " + std::to_string(x));
        return (-c - std::sqrt(disc)) / s2;
    };
    auto branch_start = [&](double x) {
        const double c = drift(x);
        const double s2 = sig(x) * sig(x);
        const double gap = 2.0 * std::sqrt(c * c + 2.0 * q * s2) / s2;  // lam_p - lam_m
        const double h = 1e-4 * std::max(1.0, std::abs(x));
        const double dlm = (lam_minus(x + h) - lam_minus(x - h)) / (2.0 * h);
        return lam_minus(x) + dlm / gap;
    };

    const double x_hi = detail_fd::default_x_hi(m, opt);

    auto rhs_v = [&](double x, const std::array<double, 1>& y, std::array<double, 1>& dy) {
        const double cx = drift(x);
        const double s2 = sig(x) * sig(x);
        dy[0] = 2.0 * (q - cx * y[0]) / s2 - y[0] * y[0];
    };

    // Tail phase: carry the corrected start from `from` down to x_hi. No
    // consumer sees this stretch, so skip dense output and let the step run.
    detail::OdeOptions tail;
    tail.rtol = opt.tol;
    tail.atol = 1e-14;
    tail.dx_out = 0.0;
    tail.h_max = 2.0;
    auto v_at_xhi = [&](double from) {
        if (from <= x_hi) return branch_start(x_hi);
        return detail::integrate_ode<1>(rhs_v, from, x_hi, {branch_start(from)}, tail).y_end[0];
    };

    // The start error contracts backward at rate lam_p - lam_m, which decays
    // like 1/x when sigma grows linearly — polynomial, not exponential,
    // damping. Push the start point outward until v(x_hi) stops moving.
    double v_hi = v_at_xhi(x_hi);
    double from = x_hi;
    bool settled = false;
    for (int round = 0; round < 14 && !settled; ++round) {
        from = std::max(2.0 * from, from + 5.0);
        const double v2 = v_at_xhi(from);
        settled = std::abs(v2 - v_hi) <= 1e-11 * (1.0 + std::abs(v2));
        v_hi = v2;
    }
    if (!settled)
        raise(Errc::numerical,
              "the decaying solution has not settled by the right boundary "
              "(start-point doubling did not converge)");

    // Dense phase on [0, x_hi]: state y0 = v, y1 = log phi up to a constant.
    detail::OdeOptions oo;
    oo.rtol = opt.tol;
    oo.atol = 1e-14;
    oo.dx_out = opt.grid_dx;
    auto rhs = [&](double x, const std::array<double, 2>& y, std::array<double, 2>& dy) {
        const double cx = drift(x);
        const double sx = sig(x);
        dy[0] = 2.0 * (q - cx * y[0]) / (sx * sx) - y[0] * y[0];
        dy[1] = y[0];
    };
    auto sol = detail::integrate_ode<2>(rhs, x_hi, 0.0, {v_hi, 0.0}, oo);

    // Nodes arrive right-to-left; reverse and renormalise so log phi(0) = 0.
    const double l0 = sol.nodes.back().y[1];
    std::vector<double> xs, lv, ld;
    xs.reserve(sol.nodes.size());
    for (auto it = sol.nodes.rbegin(); it != sol.nodes.rend(); ++it) {
        xs.push_back(it->x);
        lv.push_back(it->y[1] - l0);
        ld.push_back(it->y[0]);
    }
    Curve logc(std::move(xs), std::move(lv), std::move(ld));
    const double hi = logc.x_max();
    return FundamentalSolution::make_tabulated(FundamentalKind::phi, Curve{}, std::move(logc),
                                               -std::numeric_limits<double>::infinity(), 0.0, hi,
                                               drift, sig, q);
}

/// Increasing solution phi_tilde on [x_lo, 0] for the extended (affine drift,
/// frozen sigma) coefficients, phi_tilde(0) = 1, phi_tilde(-inf) = 0.
/// Uses the constant-sigma closed form reflected about the origin; if the
/// reflected parameters leave the kernel's argument range (very small drift
/// slope), it falls back to the mirrored Riccati solve.
inline FundamentalSolution solve_phi_tilde(const ExtendedModel& m, const SolveOptions& opt = {}) {
    const double q = m.q();
    const double c0 = m.mu0() - m.f0();
    const double c1 = m.mu_prime0() - m.f_prime0();
    const double s0 = m.sigma0();
    const double x_lo = m.x_lo();
    auto drift = [c0, c1](double x) { return c0 + c1 * x; };
    auto sig = [s0](double) { return s0; };

    // Mirror: w(y) = phi_tilde(-y) is the decreasing solution for drift
    // (-c0) + c1 y with the same sigma.
    try {
        auto base = std::make_shared<detail_fd::DecaySigmaConst>(-c0, c1, s0, q);
        if (base->x_max() >= -x_lo) {
            auto mirrored = std::make_shared<detail_fd::MirrorKernel>(base);
            return FundamentalSolution::make_closed_form(FundamentalKind::phi_tilde,
                                                         std::move(mirrored), x_lo, 0.0, drift,
                                                         sig, q);
        }
    } catch (const Error& e) {
        if (e.kind() != Errc::unsupported) throw;
        // fall through to the tabulated mirror solve
    }

    // Tabulated fallback: backward Riccati for the mirrored problem on
    // y in [0, -x_lo], then flip back.
    detail::OdeOptions oo;
    oo.rtol = opt.tol;
    oo.atol = 1e-14;
    oo.dx_out = opt.grid_dx;
    auto mdrift = [c0, c1](double y) { return -c0 + c1 * y; };
    const double y_hi = -x_lo + 10.0;
    const double c_end = mdrift(y_hi);
    const double v_hi = (-c_end - std::sqrt(c_end * c_end + 2.0 * q * s0 * s0)) / (s0 * s0);
    auto rhs = [&](double y, const std::array<double, 2>& w, std::array<double, 2>& dw) {
        const double cy = mdrift(y);
        dw[0] = 2.0 * (q - cy * w[0]) / (s0 * s0) - w[0] * w[0];
        dw[1] = w[0];
    };
    auto sol = detail::integrate_ode<2>(rhs, y_hi, 0.0, {v_hi, 0.0}, oo);
    const double l0 = sol.nodes.back().y[1];
    // Flip back to x = -y (already in increasing-x order since y decreases).
    // Keep one node beyond -x_lo so the curve's domain safely covers x_lo.
    std::vector<double> xs, lv, ld;
    for (const auto& n : sol.nodes) {
        if (n.x > -x_lo + 1.5 * oo.dx_out) continue;
        xs.push_back(-n.x);
        lv.push_back(n.y[1] - l0);
        ld.push_back(-n.y[0]);  // d/dx = -d/dy
    }
    Curve logc(std::move(xs), std::move(lv), std::move(ld));
    const double lo = logc.x_min();
    return FundamentalSolution::make_tabulated(FundamentalKind::phi_tilde, Curve{},
                                               std::move(logc),
                                               -std::numeric_limits<double>::infinity(), lo, 0.0,
                                               drift, sig, q);
}

/// Inflection point b_hat of psi: the unique root of q psi - mu psi' = 0,
/// located through the scaled form r(x) = q - mu(x) psi'(x)/psi(x) (safe in
/// the log regime). psi is concave below and convex above b_hat.
inline double inflection_point(const FundamentalSolution& psi, const ExtendedModel& m,
                               double xtol = 1e-10) {
    auto r = [&](double x) { return m.q() - m.eval_coeffs(x).mu * psi.ratio(x); };
    const double lo = 1e-4, hi = psi.domain_hi();
    auto brackets = detail::scan_sign_changes(r, lo, hi, 2000);
    if (brackets.empty())
        raise(Errc::numerical, "no sign change found for the inflection point of psi");
    return detail::bisect(r, brackets.front(), xtol);
}

// ---------------------------------------------------------------------------
// Closed-form construction
// ---------------------------------------------------------------------------

struct ClosedFormPair {
    FundamentalSolution psi;
    FundamentalSolution phi;
    double kappa = 0.0;  ///< normalisation in psi = kappa (p - phi0)
};

/// Build (psi, phi) from the closed-form kernel of the model's diffusion
/// family. Requires affine drift and bound. Throws Errc::unsupported for
/// families without a kernel (logistic drift, custom coefficients,
/// decreasing sigma, sqrt-affine sigma with slope-free drift).
inline ClosedFormPair closed_form_fundamentals(const ExtendedModel& m) {
    const ModelSpec& s = m.base().spec();
    const double q = m.q();

    auto affine_params = [](const CoefficientSpec& c, const char* what) -> std::pair<double, double> {
        if (c.kind == CoeffKind::affine) return {c.p0, c.p1};
        if (c.kind == CoeffKind::constant) return {c.p0, 0.0};
        raise(Errc::unsupported,
              std::string("closed forms need affine or constant ") + what);
    };
    const auto [m0, m1] = affine_params(s.mu, "drift");
    const auto [f0, f1] = affine_params(s.bound, "withdrawal bound");
    const double c0 = m0 - f0, c1 = m1 - f1;

    enum class Family { sigma_const, sigma_affine, sigma2_affine } family;
    double s0 = 0.0, s1 = 0.0;
    switch (s.sigma.kind) {
        case CoeffKind::constant:
            family = Family::sigma_const;
            s0 = s.sigma.p0;
            break;
        case CoeffKind::affine:
            s0 = s.sigma.p0;
            s1 = s.sigma.p1;
            family = s1 == 0.0 ? Family::sigma_const : Family::sigma_affine;
            break;
        case CoeffKind::sqrt_affine:
            s0 = s.sigma.p0;
            s1 = s.sigma.p1;
            family = s1 == 0.0 ? Family::sigma_const : Family::sigma2_affine;
            if (family == Family::sigma_const) s0 = std::sqrt(s0);
            break;
        default:
            raise(Errc::unsupported, "no closed-form kernel for this diffusion shape");
    }

    std::shared_ptr<const KernelBase> grow, decay0, decay;
    switch (family) {
        case Family::sigma_const:
            grow = std::make_shared<detail_fd::GrowthSigmaConst>(m0, m1, s0, q);
            decay0 = std::make_shared<detail_fd::DecaySigmaConst>(m0, m1, s0, q);
            decay = std::make_shared<detail_fd::DecaySigmaConst>(c0, c1, s0, q);
            break;
        case Family::sigma_affine:
            grow = std::make_shared<detail_fd::KernelSigmaAffine>(m0, m1, s0, s1, q, true);
            decay0 = std::make_shared<detail_fd::KernelSigmaAffine>(m0, m1, s0, s1, q, false);
            decay = std::make_shared<detail_fd::KernelSigmaAffine>(c0, c1, s0, s1, q, false);
            break;
        case Family::sigma2_affine:
            grow = std::make_shared<detail_fd::GrowthSigma2Affine>(m0, m1, s0, s1, q);
            decay0 = std::make_shared<detail_fd::DecaySigma2Affine>(m0, m1, s0, s1, q);
            decay = std::make_shared<detail_fd::DecaySigma2Affine>(c0, c1, s0, s1, q);
            break;
    }

    auto psi_kernel = std::make_shared<detail_fd::PsiAssembly>(grow, decay0);
    const double kappa = psi_kernel->kappa();

    auto mu_fn = [spec = s.mu](double x) { return spec.value(x); };
    auto cf_fn = [mu = s.mu, f = s.bound](double x) { return mu.value(x) - f.value(x); };
    auto sig_fn = [spec = s.sigma](double x) { return spec.value(x); };

    ClosedFormPair out{
        FundamentalSolution::make_closed_form(FundamentalKind::psi, psi_kernel, 0.0,
                                              psi_kernel->x_max(), mu_fn, sig_fn, q),
        FundamentalSolution::make_closed_form(FundamentalKind::phi, decay, 0.0, decay->x_max(),
                                              cf_fn, sig_fn, q),
        kappa};
    return out;
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

/// Honest plug-in residual of (G - q) u + rhs = 0, sampled at cell midpoints
/// where the interpolants are independent of the stored node data. `vals` is
/// the (u, u') curve, `ders` the (u', u'') curve; u'' between nodes comes
/// from the derivative of the (u', u'') interpolant, not from the identity,
/// so the residual genuinely measures whether the tabulated object solves
/// the equation. Returns the max of |residual| / scale(x).
template <typename Drift, typename Sigma, typename Rhs, typename Scale>
double residual_scan(const Curve& vals, const Curve& ders, Drift&& drift, Sigma&& sigma, double q,
                     Rhs&& rhs, Scale&& scale) {
    double worst = 0.0;
    const auto& grid = vals.grid();
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double x = 0.5 * (grid[i] + grid[i + 1]);
        const double u = vals.value(x);
        const double du = ders.value(x);
        const double ddu = ders.deriv(x);
        const double s = sigma(x);
        const double r = 0.5 * s * s * ddu + drift(x) * du - q * u + rhs(x);
        worst = std::max(worst, std::abs(r) / scale(x));
    }
    return worst;
}

/// Riccati-form companion of residual_scan for pieces that grow or decay
/// exponentially: for v = u'/u the equation reads
///   v' = 2 (q - c v) / sigma^2 - v^2,
/// which factors the exponential out entirely, so the check stays meaningful
/// where |u| spans hundreds of orders of magnitude (and where u'''' in the
/// value-form error bound would be astronomically large). `vcurve` holds
/// (v, v') nodes; midpoints compare d/dx of the interpolant to the RHS.
template <typename Drift, typename Sigma>
double riccati_residual_scan(const Curve& vcurve, Drift&& drift, Sigma&& sigma, double q) {
    double worst = 0.0;
    const auto& grid = vcurve.grid();
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double x = 0.5 * (grid[i] + grid[i + 1]);
        const double v = vcurve.value(x);
        const double dv = vcurve.deriv(x);
        const double s2 = sigma(x) * sigma(x);
        const double c = drift(x);
        const double rhs = 2.0 * (q - c * v) / s2 - v * v;
        const double scale = 1.0 + v * v + 2.0 * (q + std::abs(c * v)) / s2;
        worst = std::max(worst, std::abs(dv - rhs) / scale);
    }
    return worst;
}

}  // namespace refract
