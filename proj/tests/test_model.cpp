// Model construction, validation, and real-line extension.

#include <catch2/catch_amalgamated.hpp>

#include <limits>

#include "refract/model.hpp"

using namespace refract;

namespace {

ModelSpec base_model() {
    ModelSpec s;
    s.mu = CoefficientSpec::affine(0.09, 0.21);
    s.sigma = CoefficientSpec::constant(0.3);
    s.bound = CoefficientSpec::affine(0.3, 0.3);
    s.q = 0.33;
    return s;
}

bool has_code(const std::vector<Violation>& v, const std::string& code) {
    for (const auto& x : v)
        if (x.code == code) return true;
    return false;
}

}  // namespace

TEST_CASE("coefficient shapes evaluate their formulas", "[model]") {
    auto aff = CoefficientSpec::affine(0.09, 0.21);
    CHECK(aff.value(0.0) == Catch::Approx(0.09));
    CHECK(aff.value(2.0) == Catch::Approx(0.51));
    CHECK(aff.deriv(10.0) == Catch::Approx(0.21));

    auto log = CoefficientSpec::logistic(0.15, 0.21, 10.0);
    CHECK(log.value(0.0) == Catch::Approx(0.15));
    CHECK(log.value(10.0) == Catch::Approx(0.15));  // m1*x*(1-x/K) vanishes at K
    CHECK(log.deriv(0.0) == Catch::Approx(0.21));
    CHECK(log.deriv(5.0) == Catch::Approx(0.0).margin(1e-15));

    auto sq = CoefficientSpec::sqrt_affine(0.3, 0.5);
    CHECK(sq.value(0.0) == Catch::Approx(std::sqrt(0.3)));
    CHECK(sq.value(2.0) == Catch::Approx(std::sqrt(1.3)));
    CHECK(sq.deriv(2.0) == Catch::Approx(0.25 / std::sqrt(1.3)));

    auto cn = CoefficientSpec::constant(0.4);
    CHECK(cn.value(7.0) == 0.4);
    CHECK(cn.deriv(7.0) == 0.0);
}

TEST_CASE("custom tables interpolate and extend linearly", "[model]") {
    // Samples of f(x) = sqrt(1 + x) (concave, increasing), with exact slopes.
    std::vector<CoeffSample> t;
    for (double x : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 50.0})
        t.push_back({x, std::sqrt(1.0 + x), 0.5 / std::sqrt(1.0 + x)});
    auto c = CoefficientSpec::custom(t);
    CHECK(c.value(1.0) == Catch::Approx(std::sqrt(2.0)));
    CHECK(c.value(3.0) == Catch::Approx(2.0).epsilon(1e-3));
    // Beyond the last sample: linear continuation with the edge slope.
    const double edge = std::sqrt(51.0), slope = 0.5 / edge;
    CHECK(c.value(55.0) == Catch::Approx(edge + 5.0 * slope));
    CHECK(c.deriv(55.0) == Catch::Approx(slope));
}

TEST_CASE("validation accepts the reference models", "[model]") {
    CHECK(check_model(base_model()).empty());

    ModelSpec log_model;
    log_model.mu = CoefficientSpec::logistic(0.15, 0.21, 10.0);
    log_model.sigma = CoefficientSpec::sqrt_affine(0.75, 0.5);
    log_model.bound = CoefficientSpec::affine(0.3, 0.3);
    log_model.q = 0.33;
    CHECK(check_model(log_model).empty());
}

TEST_CASE("validation reports named violations", "[model]") {
    SECTION("drift nonpositive at zero") {
        auto s = base_model();
        s.mu = CoefficientSpec::affine(-0.1, 0.21);
        CHECK(has_code(check_model(s), "DriftAtZeroNonpositive"));
    }
    SECTION("discount below mu'(0+)") {
        auto s = base_model();
        s.q = 0.2;  // mu'(0+) = 0.21
        CHECK(has_code(check_model(s), "DiscountTooSmall"));
    }
    SECTION("degenerate diffusion") {
        auto s = base_model();
        s.sigma = CoefficientSpec::constant(0.0);
        CHECK(has_code(check_model(s), "DiffusionDegenerate"));
        s.sigma = CoefficientSpec::sqrt_affine(1.0, -0.05);  // hits zero inside [0, 50]
        CHECK(has_code(check_model(s), "DiffusionDegenerate"));
    }
    SECTION("decreasing bound") {
        auto s = base_model();
        s.bound = CoefficientSpec::affine(0.5, -0.1);
        CHECK(has_code(check_model(s), "BoundNotMonotone"));
    }
    SECTION("convex custom drift") {
        std::vector<CoeffSample> t;
        for (double x : {0.0, 10.0, 20.0, 30.0, 40.0, 50.0})
            t.push_back({x, 0.1 + 0.01 * x * x, 0.02 * x});  // convex
        auto s = base_model();
        s.mu = CoefficientSpec::custom(t);
        CHECK(has_code(check_model(s), "NotConcave"));
    }
    SECTION("validate_model throws with all violations listed") {
        auto s = base_model();
        s.mu = CoefficientSpec::affine(-0.1, 0.21);
        s.sigma = CoefficientSpec::constant(0.0);
        try {
            validate_model(s);
            FAIL("expected ValidationError");
        } catch (const ValidationError& e) {
            CHECK(e.violations().size() >= 2);
            CHECK(e.kind() == Errc::validation);
        }
    }
}

TEST_CASE("extension freezes first-order data at the origin", "[model]") {
    auto m = extend_to_real_line(validate_model(base_model()));
    CHECK(m.mu0() == Catch::Approx(0.09));
    CHECK(m.mu_prime0() == Catch::Approx(0.21));
    CHECK(m.f0() == Catch::Approx(0.3));
    CHECK(m.f_prime0() == Catch::Approx(0.3));
    CHECK(m.sigma0() == Catch::Approx(0.3));

    // Continuity of all coefficient fields across 0.
    auto below = m.eval_coeffs(-1e-9);
    auto above = m.eval_coeffs(1e-9);
    CHECK(below.mu == Catch::Approx(above.mu).margin(1e-8));
    CHECK(below.F == Catch::Approx(above.F).margin(1e-8));
    CHECK(below.sigma == Catch::Approx(above.sigma).margin(1e-8));
    CHECK(below.mu_prime == Catch::Approx(above.mu_prime).margin(1e-8));
    CHECK(below.F_prime == Catch::Approx(above.F_prime).margin(1e-8));

    // Affine continuation on the negative axis.
    auto c = m.eval_coeffs(-2.0);
    CHECK(c.mu == Catch::Approx(0.09 - 0.42));
    CHECK(c.F == Catch::Approx(0.3 - 0.6));
    CHECK(c.sigma == Catch::Approx(0.3));

    // Logistic drift: extension uses mu'(0+) = m1, not the local slope elsewhere.
    ModelSpec s2 = base_model();
    s2.mu = CoefficientSpec::logistic(0.15, 0.21, 10.0);
    auto m2 = extend_to_real_line(validate_model(s2));
    CHECK(m2.mu_prime0() == Catch::Approx(0.21));
    CHECK(m2.eval_coeffs(-1.0).mu == Catch::Approx(0.15 - 0.21));

    // Nonsense arguments are rejected; generous headroom remains for
    // far-right tail integration starts.
    CHECK_THROWS_AS(m.eval_coeffs(1e9), Error);
    CHECK_THROWS_AS(m.eval_coeffs(std::numeric_limits<double>::quiet_NaN()), Error);
    CHECK_NOTHROW(m.eval_coeffs(1e4));
}

TEST_CASE("working domain defaults", "[model]") {
    auto v = validate_model(base_model());
    CHECK(v.x_lo() == Catch::Approx(-10.0 * 0.3 / std::sqrt(0.33)));
    CHECK(v.x_hi() == Catch::Approx(50.0));  // the scale heuristic stays below 50 here
}
