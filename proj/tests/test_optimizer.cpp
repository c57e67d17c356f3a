// Optimal-barrier layer: regime decision, barrier location, performance
// curves, value assembly, diagnostics. Oracle chain:
//
//   1. for affine drift and bound the always-withdraw curve is the envelope
//      line minus its origin value times phi, so the regime slope has the
//      closed form J_0'(0+) = beta_0 - alpha_0 phi'(0+), with phi'(0+) taken
//      from the closed-form kernel rather than the ODE pipeline;
//   2. the barrier equation provably brackets: negative at 0 in the positive
//      regime, nonnegative at the inflection point b_hat;
//   3. smooth fit, curvature continuity, concavity, dominance over the whole
//      refraction family, and the variational residual are properties that
//      hold for every model; a constant small bound exercises the zero
//      regime, and a bisected bound pins the borderline branch.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "refract/fundamental.hpp"
#include "refract/model.hpp"
#include "refract/optimizer.hpp"
#include "refract/resolvent.hpp"

using namespace refract;

namespace {

ExtendedModel extended(const ModelSpec& s) { return extend_to_real_line(validate_model(s)); }

ModelSpec affine_model(const CoefficientSpec& sigma) {
    ModelSpec s;
    s.mu = CoefficientSpec::affine(0.09, 0.21);
    s.sigma = sigma;
    s.bound = CoefficientSpec::affine(0.3, 0.3);
    s.q = 0.33;
    return s;
}

ModelSpec logistic_flat_model() {
    ModelSpec s;
    s.mu = CoefficientSpec::logistic(0.15, 0.21, 10.0);
    s.sigma = CoefficientSpec::sqrt_affine(0.75, 0.5);
    s.bound = CoefficientSpec::affine(0.3, 0.3);
    s.q = 0.33;
    return s;
}

ModelSpec logistic_steep_model() {
    ModelSpec s;
    s.mu = CoefficientSpec::logistic(0.25, 0.3, 5.0);
    s.sigma = CoefficientSpec::sqrt_affine(0.75, 0.75);
    s.bound = CoefficientSpec::affine(0.15, 0.25);
    s.q = 0.33;
    return s;
}

// A bound too weak to make holding worthwhile anywhere: zero-barrier regime.
ModelSpec small_bound_model() {
    ModelSpec s;
    s.mu = CoefficientSpec::affine(0.09, 0.21);
    s.sigma = CoefficientSpec::constant(0.3);
    s.bound = CoefficientSpec::constant(0.05);
    s.q = 0.33;
    return s;
}

ModelSpec model_by_index(int i) {
    switch (i) {
        case 0: return affine_model(CoefficientSpec::constant(0.3));
        case 1: return affine_model(CoefficientSpec::affine(0.3, 0.5));
        case 2: return affine_model(CoefficientSpec::sqrt_affine(0.3, 0.5));
        case 3: return logistic_flat_model();
        default: return logistic_steep_model();
    }
}

struct Solved {
    ExtendedModel m;
    FundamentalSolution psi;
    FundamentalSolution phi;
    FundamentalSolution phi_tilde;
    ResolventBundle bundle;
};

Solved solve_all(const ModelSpec& spec) {
    ExtendedModel m = extended(spec);
    FundamentalSolution psi = solve_psi(m);
    FundamentalSolution phi = solve_phi(m);
    FundamentalSolution pt = solve_phi_tilde(m);
    ResolventBundle b = build_resolvent(m, phi, pt);
    return {std::move(m), std::move(psi), std::move(phi), std::move(pt), std::move(b)};
}

}  // namespace

TEST_CASE("regime slope matches the closed form of the affine family", "[optimizer]") {
    // Affine drift and bound: I_F is the envelope line, so
    // J_0'(0+) = beta_0 - alpha_0 phi'(0+), with phi'(0+) evaluated on the
    // closed-form kernel — a path fully independent of the tabulated solve.
    const CoefficientSpec sigmas[] = {CoefficientSpec::constant(0.3),
                                      CoefficientSpec::affine(0.3, 0.5),
                                      CoefficientSpec::sqrt_affine(0.3, 0.5)};
    for (const auto& sg : sigmas) {
        const Solved s = solve_all(affine_model(sg));
        const ClosedFormPair cf = closed_form_fundamentals(s.m);
        const double want = s.bundle.beta0 - s.bundle.alpha0 * cf.phi.deriv(0.0);
        CHECK(s.bundle.j0_prime0 == Catch::Approx(want).epsilon(5e-9));

        // The equivalent origin test of the regime split agrees to 1e-9.
        const double via_if =
            s.bundle.if_curve.deriv(0.0) - s.bundle.if0 * s.phi.deriv(0.0);
        CHECK(via_if == Catch::Approx(s.bundle.j0_prime0).epsilon(1e-9));
    }
}

TEST_CASE("regime decision across the model family", "[optimizer]") {
    for (int i = 0; i < 5; ++i) {
        std::vector<std::string> warnings;
        const Solved s = solve_all(model_by_index(i));
        CHECK(classify_regime(s.bundle, s.phi, &warnings) == Regime::barrier_positive);
        CHECK(warnings.empty());
    }
    const Solved weak = solve_all(small_bound_model());
    CHECK(weak.bundle.j0_prime0 < 1.0);
    CHECK(classify_regime(weak.bundle, weak.phi) == Regime::barrier_zero);
}

TEST_CASE("barrier equation: bracketing signs, single root, located root", "[optimizer]") {
    const int i = GENERATE(0, 1, 2, 3, 4);
    const Solved s = solve_all(model_by_index(i));
    const double b_hat = inflection_point(s.psi, s.m);
    CAPTURE(i, b_hat);

    auto gap = [&](double b) { return detail_op::barrier_gap(b, s.psi, s.phi, s.bundle.j0); };
    CHECK(gap(0.0) < 0.0);
    CHECK(gap(b_hat) > 0.0);
    CHECK(detail::scan_sign_changes(gap, 0.0, b_hat, 1000).size() == 1);

    std::vector<std::string> warnings;
    const double b_star = find_bstar(s.psi, s.phi, s.bundle, b_hat, 1e-10, &warnings);
    CHECK(warnings.empty());
    CHECK(b_star > 0.0);
    CHECK(b_star <= b_hat);
    CHECK(std::abs(gap(b_star)) < 1e-9);

    // Deterministic: the same inputs locate the same root.
    CHECK(find_bstar(s.psi, s.phi, s.bundle, b_hat) == b_star);
}

TEST_CASE("no root exists in the zero regime", "[optimizer]") {
    const Solved weak = solve_all(small_bound_model());
    const double b_hat = inflection_point(weak.psi, weak.m);
    CHECK_THROWS_WITH(find_bstar(weak.psi, weak.phi, weak.bundle, b_hat),
                      Catch::Matchers::ContainsSubstring("no root"));
}

TEST_CASE("performance curves: always-withdraw limit, proportionality, optimum",
          "[optimizer]") {
    const Solved s = solve_all(affine_model(CoefficientSpec::constant(0.3)));
    const double b_hat = inflection_point(s.psi, s.m);
    const double b_star = find_bstar(s.psi, s.phi, s.bundle, b_hat);

    SECTION("b = 0 reproduces the always-withdraw curve") {
        const Curve j0_via_jb = performance_jb(0.0, s.psi, s.phi, s.bundle.if_curve);
        REQUIRE(j0_via_jb.size() == s.bundle.j0.size());
        for (std::size_t k = 0; k < j0_via_jb.size(); k += 7) {
            const double want = s.bundle.j0.values()[k];
            CHECK_THAT(j0_via_jb.values()[k],
                       Catch::Matchers::WithinAbs(want, 1e-12 * (1.0 + std::abs(want))));
        }
    }

    SECTION("below the barrier the curve is proportional to psi") {
        const Curve jb = performance_jb(b_star, s.psi, s.phi, s.bundle.if_curve);
        const double ref = jb.value(0.75 * b_star) / s.psi.value(0.75 * b_star);
        for (double frac : {0.2, 0.4, 0.6, 0.9}) {
            const double x = frac * b_star;
            CHECK(jb.value(x) / s.psi.value(x) == Catch::Approx(ref).epsilon(1e-10));
        }
    }

    SECTION("the located barrier beats perturbed barriers at its own state") {
        const Curve best = performance_jb(b_star, s.psi, s.phi, s.bundle.if_curve);
        for (double b : {0.5 * b_star, 2.0 * b_star}) {
            const Curve jb = performance_jb(b, s.psi, s.phi, s.bundle.if_curve);
            CHECK(jb.value(b_star) < best.value(b_star));
        }
    }

    SECTION("barrier outside the state space is rejected") {
        CHECK_THROWS_AS(performance_jb(-0.1, s.psi, s.phi, s.bundle.if_curve), Error);
        CHECK_THROWS_AS(
            performance_jb(s.bundle.if_curve.x_max(), s.psi, s.phi, s.bundle.if_curve),
            Error);
    }
}

TEST_CASE("solution properties across the model family", "[optimizer]") {
    const int i = GENERATE(0, 1, 2, 3, 4);
    const Solved s = solve_all(model_by_index(i));
    const Solution sol = solve_control_problem(s.m, s.psi, s.phi, s.bundle);
    CAPTURE(i, sol.b_star, sol.b_hat);

    SECTION("regime, barrier window, and warnings") {
        CHECK(sol.regime == Regime::barrier_positive);
        CHECK(sol.b_star > 0.0);
        CHECK(sol.b_star <= sol.b_hat);
        CHECK(sol.warnings.empty());
    }

    SECTION("value shape: pinned origin, smooth fit, monotone, concave") {
        CHECK(sol.value.values().front() == 0.0);
        CHECK(sol.value.deriv(sol.b_star) == Catch::Approx(1.0).epsilon(1e-14));
        for (double d : sol.value.derivs()) CHECK(d >= -1e-9);
        CHECK(sol.diagnostics.concavity_defect <= 1e-7);
    }

    SECTION("diagnostics within the accuracy contract") {
        const Diagnostics& d = sol.diagnostics;
        CHECK(d.smooth_fit_gap <= 1e-8);
        const double curv = std::abs(value_second_deriv(s.m, sol, sol.b_star));
        CHECK(d.c2_gap <= 1e-6 * (1.0 + curv));
        CHECK(d.hjb_residual_max <= 1e-6);
        CHECK(d.dominance_margin >= -1e-9);
        CHECK(d.region_defect_cells == 0);
    }

    SECTION("resolvent-free form of the value above the barrier") {
        const double jd = detail_op::resolvent_deriv_refined(s.bundle.j0, sol.b_star,
                                                             s.psi, s.phi);
        const double coeff = (1.0 - jd) / detail_op::fund_deriv_refined(s.phi, sol.b_star);
        for (double x : {sol.b_star, sol.b_star + 0.5, sol.b_star + 2.0, 10.0}) {
            const double want = s.bundle.j0.value(x) + coeff * s.phi.value(x);
            const double got = sol.value.value(x);
            CHECK_THAT(got, Catch::Matchers::WithinAbs(want, 1e-9 * (1.0 + std::abs(want))));
        }
    }
}

TEST_CASE("zero regime: value is the always-withdraw performance", "[optimizer]") {
    const Solved weak = solve_all(small_bound_model());
    const Solution sol = solve_control_problem(weak.m, weak.psi, weak.phi, weak.bundle);

    CHECK(sol.regime == Regime::barrier_zero);
    CHECK(sol.b_star == 0.0);
    REQUIRE(sol.value.size() == weak.bundle.j0.size());
    CHECK(sol.value.values() == weak.bundle.j0.values());
    CHECK(sol.value.derivs() == weak.bundle.j0.derivs());

    const Diagnostics& d = sol.diagnostics;
    CHECK(d.smooth_fit_gap == 0.0);
    CHECK(d.c2_gap == 0.0);
    CHECK(d.hjb_residual_max <= 1e-6);
    CHECK(d.dominance_margin >= -1e-9);
    CHECK(d.region_defect_cells == 0);
    CHECK(d.concavity_defect <= 1e-7);
}

TEST_CASE("borderline origin slope resolves to the zero regime with a warning",
          "[optimizer]") {
    // Bisect the constant bound level until the origin slope of the
    // always-withdraw curve sits on the regime threshold.
    auto slope_at = [](double f) {
        ModelSpec s = small_bound_model();
        s.bound = CoefficientSpec::constant(f);
        const ExtendedModel m = extended(s);
        const FundamentalSolution phi = solve_phi(m);
        return solve_j0(m, phi).derivs().front() - 1.0;
    };
    double lo = 0.05, hi = 0.45;
    double s_lo = slope_at(lo);
    REQUIRE(s_lo < 0.0);
    REQUIRE(slope_at(hi) > 0.0);
    double mid = 0.0, s_mid = 1.0;
    for (int it = 0; it < 60 && std::abs(s_mid) > 2e-11; ++it) {
        mid = 0.5 * (lo + hi);
        s_mid = slope_at(mid);
        if ((s_mid < 0.0) == (s_lo < 0.0)) {
            lo = mid;
            s_lo = s_mid;
        } else {
            hi = mid;
        }
    }
    REQUIRE(std::abs(s_mid) < 1e-9);

    ModelSpec spec = small_bound_model();
    spec.bound = CoefficientSpec::constant(mid);
    const Solved s = solve_all(spec);
    const Solution sol = solve_control_problem(s.m, s.psi, s.phi, s.bundle);
    CHECK(sol.regime == Regime::barrier_zero);
    CHECK(sol.b_star == 0.0);
    REQUIRE(sol.warnings.size() == 1);
    CHECK_THAT(sol.warnings.front(), Catch::Matchers::ContainsSubstring("threshold"));

    // A bound shifted well clear of the threshold flips the regime cleanly.
    for (double off : {-1e-3, 1e-3}) {
        ModelSpec shifted = small_bound_model();
        shifted.bound = CoefficientSpec::constant(mid + off);
        const Solved sh = solve_all(shifted);
        std::vector<std::string> warnings;
        const Regime r = classify_regime(sh.bundle, sh.phi, &warnings);
        CHECK(r == (off > 0 ? Regime::barrier_positive : Regime::barrier_zero));
        CHECK(warnings.empty());
    }
}

TEST_CASE("frozen solution anchors across the model family", "[optimizer]") {
    // Regression anchors produced by this solver's first certified run and
    // frozen here.  They are not independent oracles: each row was accepted
    // because its full diagnostic block passed (smooth fit < 2e-10,
    // curvature gap < 1e-9, variational residual < 5e-16, non-negative
    // dominance margin, zero region defects).  Their job is to catch silent
    // drift in the solve pipeline, not to certify correctness.
    struct Anchor {
        int index;
        double b_star;
        double b_hat;
        double v_at_1;
    };
    const Anchor anchors[] = {
        {0, 0.383296777308, 0.497749859034, 1.027184416680},
        {1, 0.274589950603, 0.589115454004, 0.956477974631},
        {2, 0.172925654683, 0.667261964837, 0.927910771693},
        {3, 0.110872054422, 0.951593861087, 0.901810077488},
        {4, 0.184559464237, 1.510294978606, 0.876581038933},
    };
    for (const Anchor& a : anchors) {
        DYNAMIC_SECTION("model " << a.index) {
            const Solved s = solve_all(model_by_index(a.index));
            const Solution sol = solve_control_problem(s.m, s.psi, s.phi, s.bundle);
            CHECK_THAT(sol.b_star, Catch::Matchers::WithinAbs(a.b_star, 1e-8));
            CHECK_THAT(sol.b_hat, Catch::Matchers::WithinAbs(a.b_hat, 1e-8));
            CHECK_THAT(sol.value.value(1.0), Catch::Matchers::WithinAbs(a.v_at_1, 1e-8));
        }
    }
}

TEST_CASE("raising the withdrawal bound raises the barrier", "[optimizer]") {
    // A more generous bound drains the reserve faster for the same barrier,
    // so the optimal barrier moves up to compensate -- through the intercept
    // or the slope of the bound alike.
    auto bstar_for = [](const CoefficientSpec& bound) {
        ModelSpec spec = logistic_flat_model();
        spec.bound = bound;
        const Solved s = solve_all(spec);
        return solve_control_problem(s.m, s.psi, s.phi, s.bundle).b_star;
    };
    const double base = bstar_for(CoefficientSpec::affine(0.3, 0.3));
    const double up_intercept = bstar_for(CoefficientSpec::affine(0.36, 0.3));
    const double up_slope = bstar_for(CoefficientSpec::affine(0.3, 0.36));
    CHECK(base > 0.0);
    CHECK(up_intercept > base + 1e-3);
    CHECK(up_slope > base + 1e-3);
}

TEST_CASE("stronger diffusion lowers the value pointwise", "[optimizer]") {
    // Extra volatility only adds ruin risk here: the payoff stream stops at
    // zero, so spreading the reserve's law out cannot help.
    auto value_for = [](double sigma) {
        ModelSpec spec = affine_model(CoefficientSpec::constant(sigma));
        const Solved s = solve_all(spec);
        return solve_control_problem(s.m, s.psi, s.phi, s.bundle).value;
    };
    const Curve lo = value_for(0.3);
    const Curve hi = value_for(0.45);
    for (double x : {0.5, 1.0, 2.0, 5.0}) {
        INFO("x = " << x);
        CHECK(lo.value(x) > hi.value(x) + 1e-4);
    }
}
