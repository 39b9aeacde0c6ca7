#include <cmath>
#include <numbers>
#include <stdexcept>

#include "doctest.h"
#include "lwvm/kernels.hpp"
#include "lwvm/random.hpp"
#include "support/dual.hpp"

using namespace lwvm;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

Vec3 random_velocity(Rng& rng, double vmax) { return rng.uniform(0.05, vmax) * rng.unit_vector(); }

} // namespace

TEST_CASE("relativistic velocity") {
    CHECK(relativistic_velocity({0, 0, 0}).speed() == 0.0);
    const auto v = relativistic_velocity({1, 0, 0});
    CHECK(v[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
    CHECK(relativistic_velocity({100, 0, 0}).speed() == doctest::Approx(100.0 / std::sqrt(10001.0)).epsilon(1e-15));
    CHECK(relativistic_velocity({1e200, 0, 0}).speed() < 1.0);
    CHECK_THROWS_AS(relativistic_velocity({NAN, 0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(SubluminalVelocity(Vec3{1.0, 0, 0}), std::invalid_argument);
}

TEST_CASE("velocity jacobian and hessian match differences") {
    const Vec3 xi{0.4, -1.2, 0.7};
    const auto J = velocity_jacobian(xi);
    const auto H = velocity_hessian(xi);
    const double h = 1e-5;
    for (int a = 0; a < 3; ++a) {
        Vec3 p = xi, m = xi;
        p[a] += h;
        m[a] -= h;
        const auto vp = relativistic_velocity(p).value(), vm = relativistic_velocity(m).value();
        const auto Jp = velocity_jacobian(p), Jm = velocity_jacobian(m);
        for (int k = 0; k < 3; ++k) {
            CHECK(J[k][a] == doctest::Approx((vp[k] - vm[k]) / (2 * h)).epsilon(1e-8));
            for (int b = 0; b < 3; ++b) CHECK(H[k][a][b] == doctest::Approx((Jp[k][b] - Jm[k][b]) / (2 * h)).epsilon(1e-7));
        }
    }
}

TEST_CASE("alpha coefficients") {
    const KernelSet3 k0(Vec3{0, 0, 0});
    auto a = k0.alpha(make_point(1.0, {0.3, 0, 0}));
    CHECK(a[0] == doctest::Approx(1.0));
    CHECK(a[1] == doctest::Approx(-0.3));
    const KernelSet3 k(Vec3{0.5, 0, 0});
    a = k.alpha(make_point(1.0, {1.0, 0, 0}));
    CHECK(a[0] == doctest::Approx(2.0));
    CHECK(a[1] == doctest::Approx(-2.0));
    const auto a2 = k.alpha(make_point(2.0, {2.0, 0, 0}));
    for (int i = 0; i < 4; ++i) CHECK(a2[i] == doctest::Approx(a[i]).epsilon(1e-15));
    CHECK_THROWS_AS(k.alpha(make_point(1.0, {2.0, 0.3, 0})), std::domain_error);
}

TEST_CASE("cutoff profile") {
    const CutoffProfile c(0.5);
    CHECK(c.c1() == doctest::Approx(1.5));
    CHECK(c.c2() < 2.0);
    CHECK(c.value(1.0) == 1.0);
    CHECK(c.value(c.c2()) == 0.0);
    double prev = 1.0;
    for (int i = 0; i <= 100; ++i) {
        const double r = c.c1() + (c.c2() - c.c1()) * i / 100.0;
        CHECK(c.value(r) <= prev + 1e-15);
        prev = c.value(r);
    }
    // C2 joins
    const auto dl = c.derivatives(c.c1() + 1e-12), dr = c.derivatives(c.c2() - 1e-12);
    CHECK(std::abs(dl[1]) < 1e-12);
    CHECK(std::abs(dl[2]) < 1e-8);
    CHECK(std::abs(dr[2]) < 1e-8);
    CHECK(CutoffProfile(0.0).trivial());
    // speed derivative against a difference
    const double r = 0.5 * (c.c1() + c.c2()), h = 1e-6;
    CHECK(c.speed_derivative(r) ==
          doctest::Approx((CutoffProfile(0.5 + h).value(r) - CutoffProfile(0.5 - h).value(r)) / (2 * h)).epsilon(1e-6));
}

TEST_CASE("a kernels on the cone") {
    const KernelSet3 k0(Vec3{0, 0, 0});
    const Vec3 om{0.0, 0.6, 0.8};
    const auto a = k0.a(make_point(1.0, om));
    CHECK(a.a0[0] == doctest::Approx(1.0));
    CHECK(std::abs(a.a1[0]) < 1e-15);
    CHECK_THROWS_AS(k0.a(make_point(0.0, om)), std::domain_error);
    Rng rng(3);
    for (int s = 0; s < 10; ++s) {
        const KernelSet3 k(random_velocity(rng, 0.9));
        const Vec3 w = rng.unit_vector();
        CHECK(k.chi().value(1.0) == 1.0);
        const auto g = k.a(make_point(2.0, 2.0 * w));
        const auto c = cone_values(k.velocity(), w);
        for (int j = 0; j < 4; ++j) {
            CHECK(g.a0[j] == doctest::Approx(c.a0[j]).epsilon(1e-14));
            CHECK(g.a1[j] == doctest::Approx(0.5 * c.a1[j]).epsilon(1e-13));
        }
    }
}

TEST_CASE("b kernels: values at v = 0 and homogeneity") {
    const KernelSet3 k0(Vec3{0, 0, 0});
    const auto b = k0.b(make_point(1.0, {0.6, 0.0, 0.8}));
    CHECK(b.b0[0][0] == doctest::Approx(1.0));
    CHECK(std::abs(b.b1[0][0]) < 1e-14);
    CHECK(std::abs(b.b2[0][0]) < 1e-14);
    CHECK(b.b2[1][1] == doctest::Approx(-1.0 + 3 * 0.36));

    const KernelSet3 k(Vec3{0.3, -0.4, 0.5});
    const Point4 p{1.3, 0.4, 0.9, -0.6};
    const auto base = k.b(p);
    for (double lam : {0.5, 2.0, 7.0}) {
        const auto s = k.b(lam * p);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                CHECK(rel(s.b0[i][j], base.b0[i][j]) < 1e-12);
                CHECK(rel(s.b1[i][j], base.b1[i][j] / lam) < 1e-12);
                CHECK(rel(s.b2[i][j], base.b2[i][j] / (lam * lam)) < 1e-12);
            }
    }
}

TEST_CASE("b kernels agree with the dual-number oracle") {
    Rng rng(11);
    for (int s = 0; s < 20; ++s) {
        const Vec3 v = random_velocity(rng, 0.9);
        const KernelSet3 k(v);
        // points spread over plateau, transition and cone
        const double q = norm(v);
        const double c1 = 0.5 + 0.5 / q, c2 = 0.5 * (c1 + 1 / q);
        for (double r : {0.3, 1.0, 0.5 * (c1 + c2), c1 + 0.2 * (c2 - c1)}) {
            const double t = rng.uniform(0.5, 2.0);
            const Point4 p = make_point(t, r * t * rng.unit_vector());
            const auto b = k.b(p);
            const auto o = oracle::b_kernels(p, v);
            double scale = 1.0;
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) scale = std::max({scale, std::abs(o.b1[i][j]), std::abs(o.b2[i][j])});
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) {
                    CHECK(std::abs(b.b0[i][j] - o.b0[i][j]) <= 1e-12 * scale);
                    CHECK(std::abs(b.b1[i][j] - o.b1[i][j]) <= 1e-10 * scale);
                    CHECK(std::abs(b.b2[i][j] - o.b2[i][j]) <= 1e-10 * scale);
                    double gs = 1.0;
                    for (int m = 0; m < 4; ++m) gs = std::max(gs, std::abs(o.grad_b2[i][j][m]));
                    for (int m = 0; m < 4; ++m) CHECK(std::abs(b.grad_b2[i][j][m] - o.grad_b2[i][j][m]) <= 1e-9 * gs);
                }
        }
    }
}

TEST_CASE("homogeneity check detects wrong tags") {
    const KernelSet3 k(Vec3{0.2, 0.1, -0.3});
    std::vector<Point4> pts{{1.0, 0.2, 0.3, 0.1}, {2.0, -0.5, 0.4, 1.1}, {1.5, 1.5, 0.0, 0.0}};
    const std::array<double, 3> lam{0.5, 2.0, 7.0};
    HomogeneousFunction a0{0, [&](const Point4& p) { return k.alpha(p)[0]; }, {}};
    CHECK(homogeneity_check(a0, pts, lam) <= 1e-12);
    HomogeneousFunction b2{-2, [&](const Point4& p) { return k.b(p).b2[1][2]; }, {}};
    CHECK(homogeneity_check(b2, pts, lam) <= 1e-12);
    a0.degree = -1;
    CHECK(homogeneity_check(a0, pts, lam) > 0.4);
}

TEST_CASE("euler residual") {
    HomogeneousFunction t{1, [](const Point4& p) { return p[0]; }, [](const Point4&) { return Point4{1, 0, 0, 0}; }};
    CHECK(euler_residual(t, {1.3, 0.2, 0.1, 0.0}) == 0.0);
    const Vec3 v{0.5, 0.2, -0.1};
    const KernelSet3 k(v);
    const Point4 p{1.2, 0.5, -0.3, 0.7};
    HomogeneousFunction a{0, [&](const Point4& q) { return k.alpha(q)[0]; },
                          [&](const Point4& q) {
                              const auto g = k.a(q).grad_a0[0];
                              return Point4{g[0], g[1], g[2], g[3]};
                          }};
    CHECK(euler_residual(a, p) <= 1e-10);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            HomogeneousFunction b{-2, [&](const Point4& q) { return oracle::b_kernels(q, v).b2[i][j]; },
                                  [&](const Point4& q) { return oracle::b_kernels(q, v).grad_b2[i][j]; }};
            CHECK(euler_residual(b, p) <= 1e-8);
        }
}

TEST_CASE("sphere mean zero") {
    const SphereRule rule(32, 64);
    CHECK(rule.integrate([](const Vec3&) { return 1.0; }) == doctest::Approx(4 * std::numbers::pi).epsilon(1e-14));
    CHECK(sphere_mean_zero(KernelSet3(Vec3{0, 0, 0}), 0, 0, rule) == 0.0);
    Rng rng(5);
    for (int s = 0; s < 5; ++s) {
        const KernelSet3 k(random_velocity(rng, 0.9));
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                double sup = 0.0;
                for (const auto& n : rule.nodes()) sup = std::max(sup, std::abs(cone_values(k.velocity(), n.omega).b2[i][j]));
                CHECK(std::abs(sphere_mean_zero(k, i, j, rule)) <= 1e-8 * sup);
            }
    }
}

TEST_CASE("2D disk mean zero") {
    CHECK(disk_weighted_integral([](const Vec2&) { return 1.0; }, 16, 32) ==
          doctest::Approx(2 * std::numbers::pi).epsilon(1e-14));
    CHECK(disk_mean_zero_2d(KernelSet2(Vec2{0, 0}), 0, 0) == 0.0);
    Rng rng(9);
    for (int s = 0; s < 5; ++s) {
        const Vec3 v3 = random_velocity(rng, 0.9);
        const KernelSet2 k(Vec2{v3[0], v3[1]});
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                const double scale = std::max(1.0, std::abs(k.b(SpacePoint<2>{1.0, 0.0, 0.0}).b2[i][j]));
                CHECK(std::abs(disk_mean_zero_2d(k, i, j)) <= 1e-6 * scale);
            }
    }
}

TEST_CASE("cone jet velocity derivatives") {
    const Vec3 v{0.3, -0.2, 0.5};
    const Vec3 om = Vec3{0.2, 0.9, -0.3} / norm(Vec3{0.2, 0.9, -0.3});
    const auto jet = cone_jet(SubluminalVelocity(v), om);
    const double h = 1e-6;
    for (int k = 0; k < 3; ++k) {
        Vec3 vp = v, vm = v;
        vp[k] += h;
        vm[k] -= h;
        const auto cp = cone_jet(SubluminalVelocity(vp), om), cm = cone_jet(SubluminalVelocity(vm), om);
        for (int i = 0; i < 4; ++i) {
            CHECK(jet.dv_a0[i][k] == doctest::Approx((cp.a0[i] - cm.a0[i]) / (2 * h)).epsilon(1e-7));
            for (int j = 0; j < 4; ++j) {
                CHECK(jet.dv_b0[i][j][k] == doctest::Approx((cp.b0[i][j] - cm.b0[i][j]) / (2 * h)).epsilon(1e-7));
                CHECK(jet.dv_b1[i][j][k] == doctest::Approx((cp.b1[i][j] - cm.b1[i][j]) / (2 * h)).epsilon(1e-7));
                for (int l = 0; l < 3; ++l)
                    CHECK(jet.dvv_b0[i][j][k][l] ==
                          doctest::Approx((cp.dv_b0[i][j][l] - cm.dv_b0[i][j][l]) / (2 * h)).epsilon(1e-7));
            }
        }
    }
    // grad_a0 against the generic path
    const auto a = KernelSet3(v).a(make_point(1.0, om));
    for (int j = 0; j < 4; ++j)
        for (int m = 0; m < 4; ++m) CHECK(jet.grad_a0[j][m] == doctest::Approx(a.grad_a0[j][m]).epsilon(1e-13));
}

TEST_CASE("generic velocity gradient of a0 in the cutoff region") {
    const Vec3 v{0.6, 0.1, -0.2};
    const KernelSet3 k(v);
    const double c1 = k.chi().c1(), c2 = k.chi().c2();
    const Point4 p = make_point(1.0, (0.5 * (c1 + c2)) * Vec3{0.0, 0.6, 0.8});
    const auto g = k.a0_velocity_gradient(p);
    const double h = 1e-6;
    for (int kk = 0; kk < 3; ++kk) {
        Vec3 vp = v, vm = v;
        vp[kk] += h;
        vm[kk] -= h;
        const auto ap = KernelSet3(vp).a(p).a0, am = KernelSet3(vm).a(p).a0;
        for (int j = 0; j < 4; ++j) CHECK(g[j][kk] == doctest::Approx((ap[j] - am[j]) / (2 * h)).epsilon(1e-6));
    }
}

TEST_CASE("kernel self test passes") {
    Rng rng(1);
    for (int s = 0; s < 3; ++s) {
        const auto recs = kernel_self_test(random_velocity(rng, 0.9), 100 + s);
        for (const auto& r : recs) {
            INFO(r.kernel << " " << r.check << " " << r.residual);
            CHECK(r.passed());
        }
    }
}
