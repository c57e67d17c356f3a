// Confluent special functions against frozen high-precision references.
//
// Reference values were produced once with mpmath at 50 significant digits
// (see tests/oracles/gen_reference.py) and are pinned here as constants so
// the suite needs no external dependencies at test time.

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "refract/specfun.hpp"

using namespace refract;

namespace {
struct Ref3 {
    double p0, p1, z, value;
};
}  // namespace

TEST_CASE("Kummer M matches mpmath references", "[specfun]") {
    static const Ref3 kRefs[] = {
        {0.7, 1.4, 2.3, 4.0960222892197548},
        {1.5, 2.5, -3.0, 0.22727824593178743},
        {2.0, 0.5, 5.0, 3823.3794077297579},
        {0.25, 1.75, 30.0, 17155003601.259122},
        {3.0, 4.0, -25.0, 0.0003839999981947895},
        {1.0, 3.0, 60.0, 6.3444854989760238e+22},
        {0.5, 0.9, 150.0, 1.1338887772377431e+64},
        {2.5, 2.0, 400.0, 7.870455047599065e+174},
        {0.7, 1.4, 35.0, 90553213310234.371},
        {1.2, 3.4, -22.0, 0.061986704579779416},
    };
    for (const auto& r : kRefs) {
        CAPTURE(r.p0, r.p1, r.z);
        auto m = kummer_m(r.p0, r.p1, r.z);
        CHECK(m.value == Catch::Approx(r.value).epsilon(1e-12));
        CHECK(m.sign == 1);
        CHECK(std::abs(m.log_abs - std::log(r.value)) < 1e-12 * std::abs(std::log(r.value)) + 1e-13);
        CHECK(m.abs_error_estimate <= 1e-9 * std::abs(r.value));
        CHECK(m.terms_or_nodes_used > 0);
    }
}

TEST_CASE("Kummer M log-scale path beyond double range", "[specfun]") {
    // Linear values overflow ~1e308; the log result must still be accurate.
    auto m1 = kummer_m(3.0, 1.2, 700.0);
    CHECK(m1.log_abs == Catch::Approx(711.01855593406973).epsilon(1e-13));
    CHECK(std::isinf(m1.value));
    auto m2 = kummer_m(0.8, 2.0, 650.0);
    CHECK(m2.log_abs == Catch::Approx(642.07594340101845).epsilon(1e-13));
}

TEST_CASE("Kummer M special values", "[specfun]") {
    // M(a, b; 0) = 1 for any valid parameters.
    CHECK(kummer_m(0.37, 2.1, 0.0).value == Catch::Approx(1.0));
    // M(1, 1; z) = e^z.
    for (double z : {-7.0, -1.0, 0.5, 3.0, 20.0})
        CHECK(kummer_m(1.0, 1.0, z).value == Catch::Approx(std::exp(z)).epsilon(1e-13));
    // Terminating polynomial: M(-2, 1.5; z) = 1 - (4/3)z + (4/15)z^2.
    const double z = 1.7;
    CHECK(kummer_m(-2.0, 1.5, z).value ==
          Catch::Approx(1.0 - 4.0 / 3.0 * z + 4.0 / 15.0 * z * z).epsilon(1e-13));
}

TEST_CASE("Kummer M rejects poles and out-of-range arguments", "[specfun]") {
    CHECK_THROWS_AS(kummer_m(1.0, 0.0, 1.0), Error);
    CHECK_THROWS_AS(kummer_m(1.0, -3.0, 1.0), Error);
    CHECK_THROWS_AS(kummer_m(1.0, 2.0, 800.0), Error);
    CHECK_NOTHROW(kummer_m(-3.0, 1.5, 2.0));  // negative a is fine (polynomial)
}

TEST_CASE("Kummer M series agrees with the Euler integral on a lattice", "[specfun]") {
    // Independent-path invariant: 50 points with b > a > 0, |z| <= 40.
    const double a_vals[] = {0.35, 0.9, 1.7, 2.6, 3.3};
    const double z_vals[] = {-40.0, -25.0, -12.0, -5.0, -1.0, 0.5, 3.0, 11.0, 26.0, 40.0};
    for (double a : a_vals) {
        const double b = a + 0.8 + 0.3 * a;
        for (double z : z_vals) {
            CAPTURE(a, b, z);
            const double series = kummer_m(a, b, z).value;
            const double integral = kummer_m_integral(a, b, z).value;
            CHECK(std::abs(series - integral) <= 1e-9 * std::abs(series));
        }
    }
}

TEST_CASE("Tricomi U matches mpmath references", "[specfun]") {
    static const Ref3 kRefs[] = {
        {1.0, 1.0, 1.0, 0.59634736232319407},
        {0.5, 0.3, 2.0, 0.57855669255513452},
        {2.3, 1.7, 0.8, 0.29928906551913333},
        {1.2, -0.4, 3.5, 0.12357412050362564},
        {3.0, 5.5, 12.0, 0.00081273137130238175},
        {0.75, 2.25, 40.0, 0.063454856202362178},
        {1.5727272727272728, -0.76, 0.492, 0.19538854098127978},
    };
    for (const auto& r : kRefs) {
        CAPTURE(r.p0, r.p1, r.z);
        auto u = tricomi_u(r.p0, r.p1, r.z);
        CHECK(u.value == Catch::Approx(r.value).epsilon(1e-11));
        CHECK(u.sign == 1);
    }
}

TEST_CASE("Tricomi U special values and domain checks", "[specfun]") {
    // U(1, 2; z) = 1/z.
    for (double z : {0.3, 1.0, 7.5, 120.0})
        CHECK(tricomi_u(1.0, 2.0, z).value == Catch::Approx(1.0 / z).epsilon(1e-12));
    CHECK_THROWS_AS(tricomi_u(-0.5, 1.0, 2.0), Error);  // needs a > 0
    CHECK_THROWS_AS(tricomi_u(1.0, 1.0, -2.0), Error);  // needs z > 0
}

TEST_CASE("parabolic cylinder D matches mpmath references", "[specfun]") {
    static const Ref3 kRefs[] = {
        // {lambda, z, D_{-lambda}(z)}
        {1.5, 0.0, 0.8, 0.48105066235833829},
        {1.0, 0.0, 0.0, 1.2533141373155003},
        {0.5, 0.0, -1.2, 1.9851673255288737},
        {2.0, 0.0, 3.0, 0.0090884806825297933},
        {1.25, 0.0, -4.0, 212.15615777896107},
        {0.8, 0.0, 10.0, 2.1856461037595174e-12},
        {2.0714285714285716, 0.0, 0.9128709291752769, 0.2879810253692409},
    };
    for (const auto& r : kRefs) {
        CAPTURE(r.p0, r.z);
        auto d = parabolic_cylinder_d(r.p0, r.z);
        CHECK(d.value == Catch::Approx(r.value).epsilon(1e-11));
    }
    // D_{-1}(0) = sqrt(pi/2).
    CHECK(parabolic_cylinder_d(1.0, 0.0).value ==
          Catch::Approx(std::sqrt(std::acos(-1.0) / 2.0)).epsilon(1e-13));
    CHECK_THROWS_AS(parabolic_cylinder_d(-0.2, 1.0), Error);
}

TEST_CASE("parabolic cylinder D log-scale path", "[specfun]") {
    auto big = parabolic_cylinder_d(1.3, -30.0);
    CHECK(big.log_abs == Catch::Approx(227.04735573448941).epsilon(1e-12));
    auto tiny = parabolic_cylinder_d(0.7, 35.0);
    CHECK(tiny.log_abs == Catch::Approx(-308.73922848817485).epsilon(1e-12));
}

TEST_CASE("derivatives match references and finite differences", "[specfun]") {
    CHECK(specfun_derivative(SpecFunKind::M, 0.7, 1.4, 2.3).value ==
          Catch::Approx(2.9244050721334314).epsilon(1e-12));
    CHECK(specfun_derivative(SpecFunKind::U, 2.3, 1.7, 0.8).value ==
          Catch::Approx(-0.52405979461290182).epsilon(1e-11));
    CHECK(specfun_derivative(SpecFunKind::D, 1.0, 0.0, 1.0).value ==
          Catch::Approx(-0.52347891253157453).epsilon(1e-11));
    CHECK(specfun_derivative(SpecFunKind::D, 1.5, 0.0, 0.8).value ==
          Catch::Approx(-0.56677853996142256).epsilon(1e-11));

    // Central finite differences as an in-process cross-check (1e-6 relative).
    struct Case {
        SpecFunKind kind;
        double p0, p1, z;
    };
    const Case cases[] = {
        {SpecFunKind::M, 0.9, 1.7, 4.2},   {SpecFunKind::M, 2.2, 3.6, -6.0},
        {SpecFunKind::U, 1.4, 0.6, 2.5},   {SpecFunKind::U, 0.6, 2.1, 9.0},
        {SpecFunKind::D, 1.8, 0.0, 1.1},   {SpecFunKind::D, 0.6, 0.0, -2.2},
    };
    auto eval = [](const Case& c, double z) {
        switch (c.kind) {
            case SpecFunKind::M: return kummer_m(c.p0, c.p1, z).value;
            case SpecFunKind::U: return tricomi_u(c.p0, c.p1, z).value;
            default: return parabolic_cylinder_d(c.p0, z).value;
        }
    };
    for (const auto& c : cases) {
        CAPTURE(static_cast<int>(c.kind), c.p0, c.p1, c.z);
        const double h = 1e-5 * std::max(1.0, std::abs(c.z));
        const double fd = (eval(c, c.z + h) - eval(c, c.z - h)) / (2.0 * h);
        const double an = specfun_derivative(c.kind, c.p0, c.p1, c.z).value;
        CHECK(std::abs(fd - an) <= 1e-6 * std::max(1.0, std::abs(an)));
    }
}

TEST_CASE("D satisfies the Weber ODE through the recurrence", "[specfun]") {
    // D_{-l}''(z) from applying the derivative recurrence twice must satisfy
    // u'' = (z^2/4 + l - 1/2) u within 1e-4 relative on a test grid.
    for (double lambda : {0.6, 1.0, 1.9, 3.2}) {
        for (double z : {-8.0, -3.0, -0.7, 0.0, 0.9, 2.5, 6.0, 12.0}) {
            CAPTURE(lambda, z);
            const double d0 = parabolic_cylinder_d(lambda, z).value;
            const double d1 = parabolic_cylinder_d(lambda + 1.0, z).value;
            const double d2 = parabolic_cylinder_d(lambda + 2.0, z).value;
            // u'  = -z/2 u - l D_{-l-1}
            // u'' = -u/2 - z/2 u' - l D_{-l-1}'
            //     = -u/2 - z/2 u' - l (-z/2 D_{-l-1} - (l+1) D_{-l-2})
            const double du = -0.5 * z * d0 - lambda * d1;
            const double ddu =
                -0.5 * d0 - 0.5 * z * du + lambda * (0.5 * z * d1 + (lambda + 1.0) * d2);
            const double rhs = (0.25 * z * z + lambda - 0.5) * d0;
            CHECK(std::abs(ddu - rhs) <= 1e-4 * std::max(std::abs(rhs), std::abs(d0)));
        }
    }
}
