// Resolvent layer: always-withdraw performance J_0, the resolvent functional
// I_F, and the affine envelope. The oracle chain:
//
//   1. a flat bound has the elementary solution J_0 = (F_0/q)(1 - phi) and
//      I_F = F_0/q, independent of all resolvent machinery;
//   2. affine drift and bound make I_F an exact line, so the whole pipeline
//      -- two-point solve, origin matching, negative-axis assembly -- must
//      reproduce a closed form across all three diffusion families;
//   3. the logistic models have no closed form; they are pinned by frozen
//      Monte Carlo references (means and standard errors generated offline,
//      tolerance = 3 SE + observed discretization drift) and by the property
//      suite: slope bounds, concavity, envelope domination, plug-in residual.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "refract/fundamental.hpp"
#include "refract/model.hpp"
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

// Logistic drift with slowly growing diffusion; moderate affine bound.
ModelSpec logistic_flat_model() {
    ModelSpec s;
    s.mu = CoefficientSpec::logistic(0.15, 0.21, 10.0);
    s.sigma = CoefficientSpec::sqrt_affine(0.75, 0.5);
    s.bound = CoefficientSpec::affine(0.3, 0.3);
    s.q = 0.33;
    return s;
}

// Steeper logistic drift, stronger diffusion growth, lighter bound.
ModelSpec logistic_steep_model() {
    ModelSpec s;
    s.mu = CoefficientSpec::logistic(0.25, 0.3, 5.0);
    s.sigma = CoefficientSpec::sqrt_affine(0.75, 0.75);
    s.bound = CoefficientSpec::affine(0.15, 0.25);
    s.q = 0.33;
    return s;
}

struct Solved {
    ExtendedModel m;
    FundamentalSolution phi;
    FundamentalSolution phi_tilde;
    ResolventBundle bundle;
};

Solved solve_all(const ModelSpec& spec) {
    ExtendedModel m = extended(spec);
    FundamentalSolution phi = solve_phi(m);
    FundamentalSolution pt = solve_phi_tilde(m);
    ResolventBundle b = build_resolvent(m, phi, pt);
    return {std::move(m), std::move(phi), std::move(pt), std::move(b)};
}

}  // namespace

TEST_CASE("envelope bounds: formulas, origin reuse, degenerate bound", "[resolvent]") {
    const ExtendedModel m = extended(affine_model(CoefficientSpec::constant(0.3)));
    const double q = 0.33;

    const EnvelopeBound at0 = envelope_bounds(m, 0.0);
    const double beta0 = 0.3 / (q - 0.21 + 0.3);
    const double alpha0 = 0.09 * beta0 / q + 0.3 * (1.0 - beta0) / q;
    CHECK(at0.beta == Catch::Approx(beta0).epsilon(1e-14));
    CHECK(at0.alpha == Catch::Approx(alpha0).epsilon(1e-14));

    // Below the origin the extension freezes the first-order data, so the
    // envelope is the origin envelope.
    const EnvelopeBound neg = envelope_bounds(m, -1.0);
    CHECK(neg.alpha == at0.alpha);
    CHECK(neg.beta == at0.beta);

    // Flat bound: slope degenerates, level bound F_0/q takes over.
    ModelSpec flat = affine_model(CoefficientSpec::constant(0.3));
    flat.bound = CoefficientSpec::constant(0.3);
    const EnvelopeBound deg = envelope_bounds(extended(flat), 1.0);
    CHECK(deg.beta == 0.0);
    CHECK(deg.alpha == Catch::Approx(0.3 / q).epsilon(1e-14));
}

TEST_CASE("envelope slope is constant for affine data, nonincreasing for logistic",
          "[resolvent]") {
    const ExtendedModel aff = extended(affine_model(CoefficientSpec::constant(0.3)));
    const ExtendedModel log_m = extended(logistic_flat_model());
    double prev = envelope_bounds(log_m, 0.0).beta;
    for (double xi : {0.5, 1.0, 2.0, 3.0, 5.0, 8.0}) {
        CHECK(envelope_bounds(aff, xi).beta == Catch::Approx(envelope_bounds(aff, 0.0).beta));
        const double b = envelope_bounds(log_m, xi).beta;
        CHECK(b <= prev + 1e-14);
        prev = b;
    }
}

TEST_CASE("flat bound: always-withdraw performance is (F0/q)(1 - phi)", "[resolvent]") {
    ModelSpec spec = affine_model(CoefficientSpec::constant(0.3));
    spec.bound = CoefficientSpec::constant(0.3);
    const ExtendedModel m = extended(spec);
    const FundamentalSolution phi = solve_phi(m);
    const Curve j0 = solve_j0(m, phi);
    const double level = 0.3 / 0.33;

    CHECK(j0.values().front() == 0.0);
    for (double x : {0.0, 0.05, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 35.0, 50.0}) {
        const double want = level * (1.0 - phi.value(x));
        const double want_d = -level * phi.deriv(x);
        CHECK(j0.value(x) == Catch::Approx(want).margin(1e-9 * (1.0 + std::abs(want))));
        CHECK(j0.deriv(x) == Catch::Approx(want_d).margin(1e-9 * (1.0 + std::abs(want_d))));
    }

    // And the resolvent functional collapses to the constant F0/q everywhere.
    const FundamentalSolution pt = solve_phi_tilde(m);
    const ResolventBundle b = build_resolvent(m, phi, pt);
    CHECK(b.if0 == Catch::Approx(level).epsilon(1e-10));
    for (std::size_t i = 0; i < b.if_curve.size(); ++i) {
        CHECK(b.if_curve.values()[i] == Catch::Approx(level).epsilon(1e-10));
        CHECK(std::abs(b.if_curve.derivs()[i]) < 5e-10);
    }
}

TEST_CASE("affine data: the resolvent is an exact line in every diffusion family",
          "[resolvent]") {
    const double q = 0.33, mu0 = 0.09, mu1 = 0.21, f0 = 0.3, f1 = 0.3;
    const double if0_exact = f0 / q + f1 * (mu0 - f0) / (q * (q - mu1 + f1));
    const double beta0 = f1 / (q - mu1 + f1);

    auto sigma = GENERATE(CoefficientSpec::constant(0.3), CoefficientSpec::affine(0.3, 0.5),
                          CoefficientSpec::sqrt_affine(0.3, 0.5));
    CAPTURE(to_string(sigma.kind));

    const Solved s = solve_all(affine_model(sigma));
    const ResolventBundle& b = s.bundle;

    // alpha_0 coincides with I_F(0) for affine data: the envelope is tight.
    CHECK(b.alpha0 == Catch::Approx(if0_exact).epsilon(1e-13));
    CHECK(b.if0 == Catch::Approx(if0_exact).epsilon(1e-9));

    // The assembled curve is the line alpha_0 + beta_0 x on both sides of 0.
    for (std::size_t i = 0; i < b.if_curve.size(); ++i) {
        const double x = b.if_curve.grid()[i];
        const double line = if0_exact + beta0 * x;
        CHECK(b.if_curve.values()[i] == Catch::Approx(line).margin(1e-9 * (1.0 + std::abs(line))));
        CHECK(b.if_curve.derivs()[i] == Catch::Approx(beta0).margin(1e-9));
    }

    // J_0 = I_F - I_F(0) phi, checked against the independently solved curve.
    for (double x : {0.01, 0.5, 1.0, 2.5, 5.0, 10.0, 20.0, 30.0, 45.0}) {
        const double want = (if0_exact + beta0 * x) - if0_exact * s.phi.value(x);
        CHECK(b.j0.value(x) == Catch::Approx(want).margin(1e-9 * (1.0 + std::abs(want))));
    }
}

TEST_CASE("resolvent properties hold across the model set", "[resolvent]") {
    auto spec = GENERATE(as<int>{}, 0, 1, 2, 3, 4);
    const ModelSpec model = [&] {
        switch (spec) {
            case 0: return affine_model(CoefficientSpec::constant(0.3));
            case 1: return affine_model(CoefficientSpec::affine(0.3, 0.5));
            case 2: return affine_model(CoefficientSpec::sqrt_affine(0.3, 0.5));
            case 3: return logistic_flat_model();
            default: return logistic_steep_model();
        }
    }();
    CAPTURE(spec);

    const Solved s = solve_all(model);
    const ResolventBundle& b = s.bundle;
    const Curve& ifc = b.if_curve;

    SECTION("origin values and the regime slope") {
        CHECK(b.j0.values().front() == 0.0);
        CHECK(ifc.value(0.0) == Catch::Approx(b.if0).margin(1e-14 * (1.0 + std::abs(b.if0))));
        CHECK(b.j0_prime0 == b.j0.derivs().front());
        CHECK(b.j0_prime0 > 0.0);
    }

    SECTION("J_0 is nondecreasing; I_F slope stays in the unit band") {
        for (std::size_t i = 0; i < b.j0.size(); ++i)
            CHECK(b.j0.derivs()[i] >= -1e-9);
        for (std::size_t i = 0; i < ifc.size(); ++i) {
            CHECK(ifc.derivs()[i] >= -1e-9);
            CHECK(ifc.derivs()[i] <= 1.0 + 1e-9);
        }
    }

    SECTION("concavity: second differences never point upward") {
        const auto& xs = ifc.grid();
        const auto& vs = ifc.values();
        for (std::size_t i = 1; i + 1 < xs.size(); ++i) {
            // Raw stencil on (near-)uniform triples: h^2 f'' + O(node noise),
            // one-sided, so concavity shows as d2 <= 0 up to tolerance.
            const double hl = xs[i] - xs[i - 1], hr = xs[i + 1] - xs[i];
            if (std::abs(hl - hr) > 1e-9 * (hl + hr)) continue;
            const double d2 = vs[i + 1] - 2.0 * vs[i] + vs[i - 1];
            CHECK(d2 <= 1e-7 * (1.0 + std::abs(vs[i])));
        }
    }

    SECTION("envelope lines dominate I_F") {
        for (double xi : {-1.0, 0.0, 0.5, 1.0, 2.0, 5.0}) {
            const EnvelopeBound env = envelope_bounds(s.m, xi);
            for (std::size_t i = 0; i < ifc.size(); ++i)
                CHECK(ifc.values()[i] <= env.value(ifc.grid()[i]) + 1e-9);
        }
    }

    SECTION("negative-axis sandwich between the secant and the envelope") {
        for (std::size_t i = 0; i < ifc.size(); ++i) {
            const double x = ifc.grid()[i];
            if (x > 0.0) break;
            CHECK(ifc.values()[i] >= b.if0 + b.beta0 * x - 1e-9);
            CHECK(ifc.values()[i] <= b.alpha0 + b.beta0 * x + 1e-9);
        }
    }

    SECTION("first and second derivatives match across the origin") {
        const double left_d = b.beta0 + (b.if0 - b.alpha0) * s.phi_tilde.deriv(0.0);
        const double right_d = b.j0_prime0 + b.if0 * s.phi.deriv(0.0);
        CHECK(left_d == Catch::Approx(right_d).margin(1e-7 * (1.0 + std::abs(right_d))));
        const double left_dd = if_second_deriv(s.m, ifc, -1e-9);
        const double right_dd = if_second_deriv(s.m, ifc, 1e-9);
        CHECK(left_dd == Catch::Approx(right_dd).margin(1e-6 * (1.0 + std::abs(right_dd))));
    }

    SECTION("honest plug-in residual of the assembled resolvent") {
        const auto& xs = ifc.grid();
        std::vector<double> dd(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) dd[i] = if_second_deriv(s.m, ifc, xs[i]);
        Curve ders(std::vector<double>(xs), std::vector<double>(ifc.derivs()), std::move(dd));
        const ExtendedModel& m = s.m;
        const double worst = residual_scan(
            ifc, ders,
            [&m](double x) {
                const Coeffs c = m.eval_coeffs(x);
                return c.mu - c.F;
            },
            [&m](double x) { return m.eval_coeffs(x).sigma; }, m.q(),
            [&m](double x) { return m.eval_coeffs(x).F; },
            [&m](double x) { return 1.0 + std::abs(m.eval_coeffs(x).F); });
        CHECK(worst <= 1e-7);
    }
}

TEST_CASE("logistic models match frozen Monte Carlo references", "[resolvent]") {
    // References generated offline (tests/oracles/gen_mc_resolvent.py):
    // Euler paths with Brownian-bridge absorption at the origin, 150k-200k
    // paths at dt = 1e-3 plus a half-step control run. Each margin is three
    // combined standard errors (main + control) plus the measured step bias,
    // so a failure means a real disagreement, not Monte Carlo noise.
    SECTION("steep-growth model: always-withdraw performance near the origin") {
        const Solved s = solve_all(logistic_steep_model());
        struct Ref {
            double x, mean, margin;
        };
        for (const Ref r :
             {Ref{0.5, 0.482408, 0.0230}, Ref{1.0, 0.877551, 0.0151}, Ref{2.0, 1.492639, 0.0194}})
            CHECK(s.bundle.j0.value(r.x) == Catch::Approx(r.mean).margin(r.margin));
    }
    SECTION("flat-growth model: resolvent values and the Dynkin identity") {
        const Solved s = solve_all(logistic_flat_model());
        CHECK(s.bundle.if0 == Catch::Approx(0.560998).margin(0.0120));
        CHECK(s.bundle.if_curve.value(1.0) == Catch::Approx(1.229930).margin(0.0171));
        // Dynkin form: I_F(x) - x equals the discounted integral of
        // mu(X) - qX along the unkilled full-withdrawal paths.
        CHECK(s.bundle.if_curve.value(0.0) == Catch::Approx(0.559634).margin(0.0057));
        CHECK(s.bundle.if_curve.value(1.0) - 1.0 == Catch::Approx(0.229801).margin(0.0097));
    }
}

TEST_CASE("a domain too short for the envelope to settle is refused", "[resolvent]") {
    const ExtendedModel m = extended(logistic_steep_model());
    SolveOptions opt;
    opt.x_hi = 3.0;
    const FundamentalSolution phi = solve_phi(m, opt);
    CHECK_THROWS_WITH(solve_j0(m, phi, 3.0),
                      Catch::Matchers::ContainsSubstring("too short"));
}
