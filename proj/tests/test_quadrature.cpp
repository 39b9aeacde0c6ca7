#include <cmath>
#include <numbers>
#include <stdexcept>

#include "doctest.h"
#include "lwvm/quadrature.hpp"

using namespace lwvm;

TEST_CASE("gauss-legendre integrates polynomials exactly") {
    for (int n : {1, 2, 5, 16, 33, 64}) {
        const auto& r = gauss_legendre(n);
        double wsum = 0.0;
        for (double w : r.weights) wsum += w;
        CHECK(wsum == doctest::Approx(2.0).epsilon(1e-14));
        // degree 2n-1 is exact
        const int deg = 2 * n - 2;
        double s = 0.0;
        for (int q = 0; q < n; ++q) s += r.weights[q] * std::pow(r.nodes[q], deg);
        CHECK(s == doctest::Approx(2.0 / (deg + 1)).epsilon(1e-13));
        for (int q = 1; q < n; ++q) CHECK(r.nodes[q] > r.nodes[q - 1]);
    }
    CHECK(integrate_gl([](double x) { return std::exp(x); }, 0.0, 1.0, 12) ==
          doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-15));
}

TEST_CASE("sphere rule area and moments") {
    const SphereRule s(32, 64);
    CHECK(s.integrate([](const Vec3&) { return 1.0; }) == doctest::Approx(4.0 * std::numbers::pi).epsilon(1e-14));
    CHECK(std::abs(s.integrate([](const Vec3& w) { return w[0] * w[1]; })) < 1e-14);
    CHECK(s.integrate([](const Vec3& w) { return w[2] * w[2]; }) ==
          doctest::Approx(4.0 * std::numbers::pi / 3.0).epsilon(1e-13));

    const auto r = SphereRule::rotated(Vec3{0.3, -0.5, 0.8}, 24, 48);
    CHECK(r.integrate([](const Vec3& w) { return w[0] * w[0]; }) ==
          doctest::Approx(4.0 * std::numbers::pi / 3.0).epsilon(1e-13));
}

TEST_CASE("cap rule measures spherical caps") {
    const Vec3 pole{1.0, 1.0, 0.0};
    const double mu = 0.3;
    const auto c = SphereRule::cap(pole, mu, 16, 32);
    CHECK(c.integrate([](const Vec3&) { return 1.0; }) == doctest::Approx(2.0 * std::numbers::pi * (1 - mu)));
    for (const auto& n : c.nodes()) CHECK(dot(n.omega, pole) / norm(pole) >= mu - 1e-14);
}

TEST_CASE("unit sphere rules in dimensions 2 to 4") {
    for (int dim : {2, 3, 4}) {
        const auto r = unit_sphere_rule(dim, 16);
        double s = 0.0;
        for (double w : r.weights) s += w;
        CHECK(s == doctest::Approx(unit_sphere_area(dim)).epsilon(1e-13));
    }
    CHECK(unit_sphere_area(4) == doctest::Approx(2.0 * std::numbers::pi * std::numbers::pi));
    CHECK_THROWS_AS(unit_sphere_rule(5, 8), std::invalid_argument);
}

TEST_CASE("cone quadrature mass and interior nodes") {
    for (double t : {0.1, 1.0, 5.0})
        for (int order : {8, 16, 32}) {
            const ConeQuadrature c(t, order, SphereRule(8, 16));
            CHECK(std::abs(c.total_weight() - 0.5 * t * t) <= 1e-12 * 0.5 * t * t);
            for (const auto& n : c.nodes()) {
                CHECK(n.s > 0.0);
                CHECK(n.s < t);
            }
        }
    CHECK_THROWS_AS(ConeQuadrature(0.0, 8, SphereRule(4, 8)), std::invalid_argument);
}

TEST_CASE("momentum quadrature enlargement keeps the central nodes") {
    const MomentumQuadrature base(1.0, 6);
    const MomentumQuadrature big(1.0, 6, 3);
    CHECK(big.nodes().size() == 27 * base.nodes().size());
    double vol = 0.0;
    for (const auto& n : big.nodes()) vol += n.weight;
    CHECK(vol == doctest::Approx(216.0));
    CHECK_THROWS_AS(MomentumQuadrature(1.0, 6, 2), std::invalid_argument);
}
