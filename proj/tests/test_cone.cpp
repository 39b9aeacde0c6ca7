#include <cmath>
#include <numbers>
#include <stdexcept>

#include "doctest.h"
#include "lwvm/cone.hpp"
#include "lwvm/random.hpp"

using namespace lwvm;

namespace {

constexpr double kPi = std::numbers::pi;

// <Y, phi> for phi(s, x) = p(s): integral of s p(s), by composite Simpson.
template <class F>
double simpson(F&& f, double a, double b, int n = 4000) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int q = 1; q < n; ++q) s += (q % 2 ? 4.0 : 2.0) * f(a + q * h);
    return s * h / 3.0;
}

SubluminalVelocity random_velocity(Rng& rng, double vmax = 0.9) { return SubluminalVelocity(rng.in_ball(vmax)); }

// bump straddling the cone |x| = t, away from the origin
TestFunction off_origin_bump(Rng& rng) {
    const double t0 = rng.uniform(1.5, 2.5);
    const Vec3 x0 = (t0 + rng.uniform(-0.4, 0.2)) * rng.unit_vector();
    return TestFunction(make_point(t0, x0), rng.uniform(0.6, 1.0));
}

} // namespace

TEST_CASE("test function derivatives match finite differences") {
    const TestFunction phi(Point4{1.0, 0.2, -0.1, 0.3}, 0.9, 6, 2.0);
    const Point4 p{1.2, 0.1, 0.1, 0.0};
    const double h = 1e-5;
    const auto g = phi.gradient(p);
    const auto H = phi.hessian(p);
    for (int m = 0; m < 4; ++m) {
        Point4 e{};
        e[m] = h;
        CHECK(g[m] == doctest::Approx((phi.value(p + e) - phi.value(p - e)) / (2 * h)).epsilon(1e-8));
        const auto gd = (phi.gradient(p + e) - phi.gradient(p - e)) / (2 * h);
        for (int n = 0; n < 4; ++n) CHECK(H[m][n] == doctest::Approx(gd[n]).epsilon(1e-7).scale(1.0));
    }
    const Vec3 v{0.3, 0.1, -0.2};
    const Point4 w{1.0, v[0], v[1], v[2]};
    CHECK(phi.stream(p, v) == doctest::Approx(dot(w, g)));
    CHECK(phi.value(Point4{5, 5, 5, 5}) == 0.0);
    CHECK_THROWS_AS(TestFunction(Point4{}, 0.0), std::invalid_argument);
}

TEST_CASE("y_pair of a radial profile equals the one-dimensional integral") {
    // centre on the time axis: phi(s, s omega) depends on s only
    const double c0 = 1.5, rho = 1.2;
    const TestFunction phi(Point4{c0, 0, 0, 0}, rho);
    const double disc = c0 * c0 - 2 * (c0 * c0 - rho * rho);
    const double lo = 0.5 * (c0 - std::sqrt(disc)), hi = 0.5 * (c0 + std::sqrt(disc));
    const double expect = simpson([&](double s) { return s * phi.value(Point4{s, s, 0, 0}); }, lo, hi);
    const auto r = y_pair(5.0, phi);
    CHECK(r.value == doctest::Approx(expect).epsilon(1e-12));
    CHECK_FALSE(r.reduced_accuracy);

    // off-axis centre: compare against the plain cone rule at high order
    const TestFunction psi(Point4{1.6, 0.3, -0.4, 0.2}, 0.7);
    const double plain = y_pair(
        3.0, [&](double s, const Vec3& x) { return psi.value(make_point(s, x)); }, 400, SphereRule(200, 400));
    CHECK(y_pair(3.0, psi).value == doctest::Approx(plain).epsilon(1e-7));

    CHECK(y_pair(1.0, TestFunction(Point4{0.2, 0, 0, 0}, 0.5)).reduced_accuracy);
    CHECK(y_pair(0.5, TestFunction(Point4{0.9, 0, 0, 0}, 0.7)).reduced_accuracy);
    CHECK(y_pair(4.0, TestFunction(Point4{1.0, 5, 0, 0}, 0.5)).value == 0.0);
}

TEST_CASE("y_pair with s-only profiles and constants") {
    const SphereRule sphere(8, 16);
    const double t = 2.0;
    CHECK(y_pair(t, [](double, const Vec3&) { return 1.0; }, 16, sphere) == doctest::Approx(t * t / 2).epsilon(1e-13));
    CHECK(y_pair(t, [](double, const Vec3&) { return 0.0; }, 16, sphere) == 0.0);
    const auto prof = [](double s) { return s * s * (2.0 - s); };
    // int_0^2 s * s^2 (2 - s) ds = 2 * 16/4 - 32/5
    CHECK(y_pair(t, [&](double s, const Vec3&) { return prof(s); }, 16, sphere) ==
          doctest::Approx(8.0 - 32.0 / 5.0).epsilon(1e-13));
}

TEST_CASE("y_convolve oracles") {
    const SphereRule sphere(8, 16);
    const Vec3 x{0.1, 0.2, 0.3};
    for (double t : {0.5, 1.0, 3.0}) {
        CHECK(y_convolve([](double, const Vec3&) { return 1.0; }, t, x, 16, sphere) ==
              doctest::Approx(t * t / 2).epsilon(1e-13));
        CHECK(y_convolve([](double s, const Vec3&) { return s; }, t, x, 16, sphere) ==
              doctest::Approx(t * t * t / 6).epsilon(1e-13));
        CHECK(y_convolve([](double, const Vec3&) { return 0.0; }, t, x, 16, sphere) == 0.0);
    }
    CHECK(y_convolve([](double, const Vec3&) { return 1.0; }, 0.0, x, 16, sphere) == 0.0);
    CHECK(y_convolve([](double, const Vec3&) { return 1.0; }, -1.0, x, 16, sphere) == 0.0);
}

TEST_CASE("first division identity") {
    const TestFunction phi(Point4{1.8, 0.3, 0.1, -0.2}, 0.8);
    const auto r0 = division_identity_first(SubluminalVelocity(Vec3{}), 0, phi);
    CHECK(r0.residual <= 1e-10);

    Rng rng(11);
    for (int trial = 0; trial < 6; ++trial) {
        const auto v = random_velocity(rng);
        const auto f = off_origin_bump(rng);
        for (int i = 0; i < 4; ++i) {
            const auto r = division_identity_first(v, i, f);
            CHECK(r.residual == doctest::Approx(std::abs(r.lhs - r.rhs)));
            CHECK(r.relative() <= 1e-6);
        }
    }
    const auto far = division_identity_first(SubluminalVelocity(Vec3{0.5, 0, 0}), 2,
                                             TestFunction(Point4{1.0, 4.0, 0, 0}, 0.5));
    CHECK(far.lhs == 0.0);
    CHECK(far.rhs == 0.0);
}

TEST_CASE("first identity residual converges with quadrature order") {
    const SubluminalVelocity v(Vec3{0.5, -0.3, 0.4});
    const TestFunction phi(Point4{2.0, 0.4, 0.3, -0.5}, 0.9);
    double prev = 1.0;
    for (int n : {4, 8, 16}) {
        const auto r = division_identity_first(v, 1, phi, {n, n, 2 * n});
        const double res = std::max(r.relative(), 1e-15);
        if (n > 4 && prev > 1e-13) CHECK(res <= prev / 16.0);
        prev = res;
    }
}

TEST_CASE("adjoint consistency: <d_i Y, phi> by translation") {
    // <Y, phi(. + h e_i)> differentiated in h equals <Y, d_i phi>
    const TestFunction phi(Point4{1.9, 0.2, -0.3, 0.1}, 0.8);
    const double h = 1e-4;
    for (int i = 0; i < 4; ++i) {
        Point4 e{};
        e[i] = h;
        const double plus = y_pair(10.0, TestFunction(phi.center() - e, phi.radius())).value;
        const double minus = y_pair(10.0, TestFunction(phi.center() + e, phi.radius())).value;
        const auto r = division_identity_first(SubluminalVelocity(Vec3{0.2, 0.1, 0.0}), i, phi);
        CHECK(-r.lhs == doctest::Approx((plus - minus) / (2 * h)).epsilon(1e-6));
    }
}

TEST_CASE("second division identity away from the origin") {
    const TestFunction phi(Point4{1.8, 0.3, 0.1, -0.2}, 0.8);
    const auto r0 = division_identity_second(SubluminalVelocity(Vec3{}), 0, 0, phi);
    CHECK(r0.residual <= 1e-10);

    Rng rng(23);
    for (int trial = 0; trial < 3; ++trial) {
        const auto v = random_velocity(rng);
        const auto f = off_origin_bump(rng);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                const auto r = division_identity_second(v, i, j, f);
                CHECK(r.relative() <= 1e-5);
                const auto rt = division_identity_second(v, j, i, f);
                CHECK(r.lhs == doctest::Approx(rt.lhs).epsilon(1e-12));
                CHECK(std::abs(r.rhs - rt.rhs) <= 1e-5 * r.scale);
            }
    }
}

TEST_CASE("vp pairing is independent of theta") {
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const auto v = random_velocity(rng);
        const int i = static_cast<int>(rng.uniform() * 4), j = static_cast<int>(rng.uniform() * 4);
        // supports that contain the origin, so the near part matters
        const TestFunction psi(make_point(rng.uniform(0.0, 0.4), rng.in_ball(0.3)), rng.uniform(1.0, 1.5));
        const double a = vp_pair(v, i, j, psi, 0.1);
        const double b = vp_pair(v, i, j, psi, 0.5);
        const double c = vp_pair(v, i, j, psi, 1.0);
        const double scale = std::max({std::abs(a), std::abs(b), std::abs(c), 1.0});
        CHECK(std::abs(a - b) <= 1e-8 * scale);
        CHECK(std::abs(a - c) <= 1e-8 * scale);
        CHECK(std::abs(b - c) <= 1e-8 * scale);
    }
    CHECK_THROWS_AS(vp_pair(SubluminalVelocity(Vec3{}), 0, 0, TestFunction(Point4{}, 1.0), 0.0),
                    std::invalid_argument);
}

TEST_CASE("vp pairing special cases") {
    const SubluminalVelocity v(Vec3{0.4, 0.2, -0.3});
    // x-independent psi: near part vanishes and the far part is zero by the mean-zero property
    const auto flat = [](double s, const Vec3&) { return s < 2.0 ? std::pow(1 - s * s / 4, 4) : 0.0; };
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(std::abs(vp_pair(v, i, j, flat, 0.3, 2.0)) <= 1e-10);

    // support in s > theta: plain cone quadrature of b2 psi
    const TestFunction psi(Point4{2.0, 0.2, 0.3, 0.0}, 0.6);
    const double direct = y_pair(
        3.0,
        [&](double s, const Vec3& x) {
            return cone_values(v, x / s).b2[1][2] / (s * s) * psi.value(make_point(s, x));
        },
        300, SphereRule(150, 300));
    CHECK(vp_pair(v, 1, 2, psi, 0.5) == doctest::Approx(direct).epsilon(1e-7));

    // generic overload agrees with the adapted one on a bump containing the origin
    const TestFunction bump(Point4{0.2, 0.1, 0, 0}, 1.2);
    const double g = vp_pair(
        v, 0, 3, [&](double s, const Vec3& x) { return bump.value(make_point(s, x)); }, 0.4, 1.4, {64, 48, 96});
    CHECK(g == doctest::Approx(vp_pair(v, 0, 3, bump, 0.4)).epsilon(1e-6));
}

TEST_CASE("delta coefficients at zero velocity") {
    const auto d = extract_delta_coefficients(SubluminalVelocity(Vec3{}));
    CHECK(std::abs(d.c[0][0]) <= 1e-8);
    for (int k = 1; k < 4; ++k) CHECK(d.c[k][k] == doctest::Approx(-1.0 / 3.0).epsilon(1e-8));
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            if (i != j) CHECK(std::abs(d.c[i][j]) <= 1e-8);
            CHECK(d.spread[i][j] <= 1e-5);
        }
    CHECK(extract_delta_coefficient(SubluminalVelocity(Vec3{}), 0, 0) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("delta coefficients: test function independence, continuity, rotation") {
    const SubluminalVelocity v(Vec3{0.3, -0.4, 0.5});
    const auto d = extract_delta_coefficients(v);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(d.spread[i][j] <= 1e-5);

    // trace identity from box Y = delta: c_00 - sum_k c_kk = 1
    CHECK(d.c[0][0] - d.c[1][1] - d.c[2][2] - d.c[3][3] == doctest::Approx(1.0).epsilon(1e-7));

    double prev = 1.0;
    for (double delta : {1e-2, 1e-3, 1e-4}) {
        const auto e = extract_delta_coefficients(SubluminalVelocity(v.value() + Vec3{delta, 0, 0}));
        double diff = 0.0;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) diff = std::max(diff, std::abs(e.c[i][j] - d.c[i][j]));
        CHECK(diff <= prev);
        prev = diff;
    }
    CHECK(prev <= 1e-3);

    DeltaCoefficientCache cache;
    const Mat4 r = cache.get(v.value());
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(r[i][j] == doctest::Approx(d.c[i][j]).epsilon(1e-6).scale(1.0));
    cache.get(Vec3{-0.5, 0.3, 0.4});  // same speed
    CHECK(cache.size() == 1);
}

TEST_CASE("second identity with the delta term") {
    const SubluminalVelocity v(Vec3{0.2, 0.5, -0.1});
    const auto d = extract_delta_coefficients(v);
    const TestFunction phi(Point4{0.1, -0.2, 0.1, 0.3}, 1.3, 6);
    for (int i = 0; i < 4; ++i)
        for (int j = i; j < 4; ++j) CHECK(division_identity_second(v, i, j, phi, 0.25, {}, &d).relative() <= 1e-5);
}

TEST_CASE("residues") {
    const auto inv4 = [](const Vec<4>& y) { return 1.0 / std::pow(dot(y, y), 2); };
    CHECK(residue(inv4, 4) == doctest::Approx(2 * kPi * kPi).epsilon(1e-12));
    const auto odd = [](const Vec<4>& y) { return y[0] / std::pow(dot(y, y), 2.5); };
    CHECK(std::abs(residue(odd, 4)) <= 1e-12);
    CHECK(residue([](const Vec<4>& y) { return 1.0 / dot(y, y); }, 2) == doctest::Approx(2 * kPi));
    CHECK(residue([](const Vec<4>& y) { return std::pow(dot(y, y), -1.5); }, 3) == doctest::Approx(4 * kPi));
    CHECK_THROWS_AS(residue([](const Vec<4>& y) { return 1.0 / dot(y, y); }, 4), std::invalid_argument);
    CHECK_THROWS_AS(residue(inv4, 5), std::invalid_argument);
}

TEST_CASE("mean-zero condition with m = a_j^1") {
    Rng rng(3);
    const SphereRule rule(32, 64);
    for (int trial = 0; trial < 4; ++trial) {
        const KernelSet3 k(random_velocity(rng));
        for (int j = 0; j < 4; ++j) {
            HomogeneousFunction m;
            m.degree = -1;
            m.value = [&k, j](const Point4& p) { return k.a(p).a1[j]; };
            m.gradient = [&k, j](const Point4& p) {
                const auto g = k.a(p).grad_a1[j];
                return Point4{g[0], g[1], g[2], g[3]};
            };
            double sup = 0.0;
            for (const auto& n : rule.nodes()) sup = std::max(sup, std::abs(m.value(make_point(1.0, n.omega))));
            for (int i = 0; i < 4; ++i) CHECK(std::abs(avm0_residual(k, i, m, rule)) <= 1e-8 * std::max(sup, 1.0));
        }
    }
}
