#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "lwvm/initial_data.hpp"
#include "lwvm/transport.hpp"

using namespace lwvm;

namespace {

std::shared_ptr<const PhaseProfile> bump() {
    return std::make_shared<BumpProfile>(1.0, Vec3{0.1, 0.0, -0.2}, 0.5, Vec3{0.25, 0.0, 0.0}, 0.5, 6);
}

double dist(const Vec3& a, const Vec3& b) { return norm(a - b); }

} // namespace

TEST_CASE("free streaming matches the closed form") {
    ZeroForce k;
    Rng rng(11);
    for (int n = 0; n < 20; ++n) {
        const PhasePoint p{rng.in_ball(1.0), rng.in_ball(3.0)};
        const double t = rng.uniform(-2.0, 2.0);
        const auto q = integrate_characteristic(p, 0.0, t, 0.05, k);
        const Vec3 exact = p.x + t * relativistic_velocity(p.xi).value();
        CHECK(dist(q.x, exact) <= 1e-12);
        CHECK(dist(q.xi, p.xi) == 0.0);
        CHECK(dist(q.x, p.x) < std::abs(t));
    }
}

TEST_CASE("characteristics are reversible") {
    ConstantForce c(Vec3{0.3, -0.1, 0.2});
    ElectromagneticForce em([](double t, const Vec3& x) { return Vec3{std::sin(x[1]), 0.2 * t, 0.1}; },
                            [](double, const Vec3& x) { return Vec3{0.0, 0.0, 0.5 + 0.1 * x[0]}; }, 2.0);
    Rng rng(12);
    for (const ForceField* k : {static_cast<const ForceField*>(&c), static_cast<const ForceField*>(&em)}) {
        for (int n = 0; n < 10; ++n) {
            const PhasePoint p{rng.in_ball(1.0), rng.in_ball(2.0)};
            const auto q = integrate_characteristic(p, 0.0, 1.0, 0.01, *k);
            const auto r = integrate_characteristic(q, 1.0, 0.0, 0.01, *k);
            // RK4 is not symmetric; the round trip error is O(h^4)
            CHECK(dist(r.x, p.x) <= 1e-9);
            CHECK(dist(r.xi, p.xi) <= 1e-9);
        }
    }
}

TEST_CASE("constant force moves momentum linearly") {
    const Vec3 c{0.4, 0.0, -0.3};
    ConstantForce k(c);
    const PhasePoint p{{0, 0, 0}, {1.0, 0.5, 0.0}};
    const auto q = integrate_characteristic(p, 0.0, 1.5, 0.01, k);
    CHECK(dist(q.xi, p.xi - 1.5 * c) <= 1e-12);
    CHECK(norm(q.xi) <= norm(p.xi) + 1.5 * norm(c));
    CHECK(dist(q.x, p.x) < 1.5);
}

TEST_CASE("pullback is bounded by the initial maximum") {
    auto fin = bump();
    auto k = std::make_shared<ConstantForce>(Vec3{0.2, 0.1, 0.0});
    PhaseDensity f(fin, k, 0.02);
    const auto am = fin->argmax();
    const double t = 0.8;
    const auto q = integrate_characteristic({am.x, am.xi}, 0.0, t, 0.02, *k);
    CHECK(f.evaluate(t, q.x, q.xi).value == doctest::Approx(fin->sup()).epsilon(1e-9));
    Rng rng(13);
    for (int n = 0; n < 200; ++n) {
        const double v = f.evaluate(t, rng.in_ball(1.5), rng.in_ball(1.5)).value;
        CHECK(v <= fin->sup() * (1 + 1e-12));
        CHECK(v >= 0.0);
    }
}

TEST_CASE("certainly_zero is consistent with evaluation") {
    auto fin = bump();
    auto k = std::make_shared<ConstantForce>(Vec3{0.3, 0.0, 0.0});
    PhaseDensity f(fin, k, 0.02);
    Rng rng(14);
    for (int n = 0; n < 300; ++n) {
        const Vec3 x = rng.in_ball(3.0), xi = rng.in_ball(3.0);
        if (f.certainly_zero(0.7, x, xi)) CHECK(f.evaluate(0.7, x, xi).value == 0.0);
    }
}

TEST_CASE("phase gradient matches the closed form at t = 0 and FD later") {
    auto fin = bump();
    PhaseDensity f(fin, std::make_shared<ZeroForce>(), 0.05);
    const Vec3 x{0.2, 0.1, -0.1}, xi{0.3, 0.1, 0.0};
    const auto g0 = f.gradient(0.0, x, xi);
    const auto gin = fin->gradient(x, xi);
    CHECK(dist(g0.dx, gin.dx) == 0.0);
    // free streaming: f(t, x, xi) = f^in(x - t v, xi)
    const double t = 0.4;
    const auto g = f.gradient(t, x, xi);
    const Vec3 y = x - t * relativistic_velocity(xi).value();
    CHECK(dist(g.dx, fin->gradient(y, xi).dx) <= 1e-6);
}

TEST_CASE("support tracker") {
    SUBCASE("single particle at rest") {
        SupportTracker tr({PhasePoint{{0, 0, 0}, {0, 0, 0}}});
        ZeroForce k;
        for (int n = 0; n < 5; ++n) tr.advance(0.1, k);
        CHECK(tr.radius() == 0.0);
        CHECK(tr.r_star() == 0.0);
        CHECK(tr.history().size() == 6);
    }
    SUBCASE("empty ensemble") { CHECK_THROWS_AS(SupportTracker({}), std::invalid_argument); }
    SUBCASE("constant force bound") {
        Rng rng(15);
        auto fin = bump();
        auto pts = seed_ensemble(*fin, 64, rng);
        CHECK(pts.front().xi == fin->argmax().xi);
        const double r0 = fin->xi_radius();
        SupportTracker tr(pts);
        ConstantForce k(Vec3{0.0, 0.5, 0.0});
        for (int n = 0; n < 10; ++n) tr.advance(0.1, k);
        CHECK(tr.radius() <= r0 + 1.0 * 0.5 + 1e-12);
        CHECK(tr.r_star() >= tr.radius());
    }
}

TEST_CASE("ensemble csv") {
    std::ostringstream os;
    std::vector<PhasePoint> pts{{{1, 2, 3}, {0.5, 0, 0}}};
    std::vector<double> vals{0.25};
    write_ensemble_csv(os, 0.5, pts, vals);
    const auto s = os.str();
    CHECK(s.find("t,x1,x2,x3,xi1,xi2,xi3,f") == 0);
    CHECK(s.find("0.5,1,2,3,0.5,0,0,0.25") != std::string::npos);
}
