#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "lwvm/initial_data.hpp"
#include "lwvm/monitor.hpp"
#include "lwvm/random.hpp"

using namespace lwvm;

namespace {

struct Samples {
    std::vector<double> t, n;
};

template <class F>
Samples sample(F n_of_t, double t0, double t1, int count) {
    Samples s;
    for (int k = 0; k < count; ++k) {
        const double t = t0 + (t1 - t0) * k / (count - 1);
        s.t.push_back(t);
        s.n.push_back(n_of_t(t));
    }
    return s;
}

// (N(t) - N0) / int_0^t (1 + ln N) N ds for N = N0 e^{lambda s}, N0 >= 1, in closed form
double exponential_ratio(double n0, double lambda, double t) {
    const double a = 1.0 + std::log(n0);
    const double e = std::exp(lambda * t);
    // int_0^t (a + lambda s) n0 e^{lambda s} ds
    const double integral = n0 * (a * (e - 1.0) / lambda + (t * e - (e - 1.0) / lambda));
    return (n0 * e - n0) / integral;
}

} // namespace

TEST_CASE("ln_plus") {
    CHECK(ln_plus(0.0) == 0.0);
    CHECK(ln_plus(0.5) == 0.0);
    CHECK(ln_plus(1.0) == 0.0);
    CHECK(ln_plus(std::exp(2.0)) == doctest::Approx(2.0));
}

TEST_CASE("log gronwall check") {
    SUBCASE("constant N") {
        const auto s = sample([](double) { return 3.0; }, 0.0, 1.0, 11);
        const auto r = log_gronwall_check(s.t, s.n, 1.0);
        CHECK(r.log_gronwall.c == 0.0);
        CHECK(r.log_gronwall.pass);
        CHECK_FALSE(r.diverging);
        CHECK(r.bound_at_horizon == 3.0);
    }
    SUBCASE("exponential N against the closed-form substitution") {
        const double n0 = 2.0, lambda = 1.5;
        const auto s = sample([&](double t) { return n0 * std::exp(lambda * t); }, 0.0, 1.0, 21);
        const auto r = log_gronwall_check(s.t, s.n, 1.0);
        double closed = 0.0;
        for (std::size_t k = 1; k < s.t.size(); ++k) closed = std::max(closed, exponential_ratio(n0, lambda, s.t[k]));
        CHECK(r.log_gronwall.finite);
        CHECK(r.log_gronwall.c == doctest::Approx(closed).epsilon(0.05));
        // at small t the substitution tends to lambda / (1 + ln N0)
        CHECK(exponential_ratio(n0, lambda, 1e-6) == doctest::Approx(lambda / (1.0 + std::log(n0))).epsilon(1e-5));
        CHECK_FALSE(r.diverging);
        for (std::size_t k = 0; k < s.t.size(); ++k)
            CHECK(s.n[k] <= log_gronwall_bound(n0, r.log_gronwall.c, s.t[k]) * (1 + 1e-2));

        const auto fine = sample([&](double t) { return n0 * std::exp(lambda * t); }, 0.0, 1.0, 81);
        const auto rf = log_gronwall_check(fine.t, fine.n, 1.0);
        CHECK(rf.log_gronwall.c == doctest::Approx(r.log_gronwall.c).epsilon(0.05));
    }
    SUBCASE("N below one grows exponentially first") {
        const double n0 = 0.1, lambda = 0.8;
        const auto s = sample([&](double t) { return n0 * std::exp(lambda * t); }, 0.0, 1.0, 41);
        const auto r = log_gronwall_check(s.t, s.n, 1.0);
        CHECK(r.log_gronwall.c == doctest::Approx(lambda).epsilon(0.02));
        CHECK_FALSE(r.diverging);
    }
    SUBCASE("blow-up is flagged") {
        const double tau = 1.0;
        const auto s = sample([&](double t) { return 1.0 / (tau - t); }, 0.0, 0.98, 50);
        const auto r = log_gronwall_check(s.t, s.n, tau);
        CHECK(r.diverging);
        CHECK(r.log_gronwall.margin < -0.5);
        // the prefix fits keep growing towards tau
        double prev = 0.0;
        for (std::size_t m : {10u, 20u, 30u, 40u, 50u}) {
            const auto c = log_gronwall_check(std::span(s.t).first(m), std::span(s.n).first(m), tau).log_gronwall.c;
            CHECK(c > prev);
            prev = c;
        }
    }
    SUBCASE("rejections") {
        const std::vector<double> one{0.0}, t3{0.0, 0.1, 0.3}, n3{1, 1, 1}, t2{0.0, 0.1}, neg{1.0, -1.0};
        CHECK_THROWS_AS(log_gronwall_check(one, one, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(log_gronwall_check(t3, n3, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(log_gronwall_check(t2, neg, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(log_gronwall_check(t2, n3, 1.0), std::invalid_argument);
    }
}

TEST_CASE("log gronwall bound") {
    CHECK(log_gronwall_bound(0.0, 5.0, 1.0) == 0.0);
    CHECK(log_gronwall_bound(2.0, 0.0, 1.0) == 2.0);
    // N' = C (1 + ln N) N solved in closed form
    const double n0 = 3.0, c = 0.7, t = 0.9;
    CHECK(std::log(log_gronwall_bound(n0, c, t)) == doctest::Approx((1 + std::log(n0)) * std::exp(c * t) - 1));
    // below one: exponential until N = 1
    CHECK(log_gronwall_bound(0.5, 1.0, 0.2) == doctest::Approx(0.5 * std::exp(0.2)));
    CHECK(log_gronwall_bound(0.5, 1.0, std::log(2.0)) == doctest::Approx(1.0));
}

TEST_CASE("sup norm estimates") {
    SUBCASE("zero data") {
        const auto d = make_initial_data("zero");
        const PhaseDensity f(d.f, std::make_shared<ZeroForce>(), 0.05);
        const auto s = sup_norm_estimates(f, nullptr, 0.3, {});
        CHECK(s.f_sup == 0.0);
        CHECK(s.gradf_sup == 0.0);
        CHECK(s.eb_sup == 0.0);
    }
    SUBCASE("free streaming keeps the maximum") {
        const auto d = make_initial_data("gaussian-bump");
        const PhaseDensity f(d.f, std::make_shared<ZeroForce>(), 0.05);
        const double sup = d.f->sup();
        SupNormLattice lat;
        lat.x_points = 3;
        lat.xi_points = 3;
        for (double t : {0.0, 0.2, 0.45}) CHECK(sup_norm_estimates(f, nullptr, t, lat).f_sup == doctest::Approx(sup).epsilon(1e-12));
    }
    SUBCASE("refining the lattice never lowers the estimate") {
        const auto d = make_initial_data("gaussian-bump", {{"x0_1", 0.07}, {"xi0_2", 0.1}});
        const PhaseDensity f(d.f, std::make_shared<ConstantForce>(Vec3{0.2, -0.1, 0.0}), 0.05);
        SupNormLattice coarse, fine;
        coarse.x_points = coarse.xi_points = 3;
        fine.x_points = fine.xi_points = 5;
        const auto a = sup_norm_estimates(f, nullptr, 0.3, coarse);
        const auto b = sup_norm_estimates(f, nullptr, 0.3, fine);
        CHECK(b.f_sup >= a.f_sup);
        CHECK(b.gradf_sup >= a.gradf_sup);
        CHECK(a.gradf_sup > 0.0);
    }
    SUBCASE("fields from a history") {
        Grid3 g(9, 1.0);
        FieldHistory h(g);
        FieldSlice s;
        s.eb.resize(g.size());
        for (std::size_t q = 0; q < g.size(); ++q) {
            const Vec3 x = g.point(q);
            s.eb[q] = {x[0], 0, 0, 0, 0, 0.5};  // E = (x1, 0, 0), B = (0, 0, 1/2)
        }
        h.push(s);
        const auto d = make_initial_data("gaussian-bump");
        const PhaseDensity f(d.f, std::make_shared<ZeroForce>(), 0.05);
        SupNormLattice lat;
        lat.x_points = 3;
        lat.xi_points = 1;
        const auto r = sup_norm_estimates(f, &h, 0.0, lat);
        CHECK(r.eb_sup == doctest::Approx(1.25));  // at x1 = +-0.75
        CHECK(r.grad_eb_sup == doctest::Approx(1.0));
    }
}

TEST_CASE("derivative norms") {
    DerivativeMonitor opt;
    opt.orders = {4, 4, 8};
    opt.momentum_order = 4;
    opt.x_points = 2;
    SUBCASE("zero data") {
        const auto d = make_initial_data("zero");
        const PhaseDensity f(d.f, std::make_shared<ZeroForce>(), 0.05);
        const auto r = derivative_norms(f, 0.2, 1.0, opt);
        CHECK(r.i1 == 0.0);
        CHECK(r.j1 == 0.0);
        CHECK(r.jv == 0.0);
    }
    SUBCASE("initial time") {
        const auto d = make_initial_data("gaussian-bump");
        const PhaseDensity f(d.f, std::make_shared<ZeroForce>(), 0.05);
        const auto r = derivative_norms(f, 0.0, 1.0, opt);
        CHECK(r.i1 == 0.0);
        CHECK(r.iv == 0.0);
        CHECK(r.j1 > 0.0);
        CHECK(r.jv > 0.0);
        CHECK(r.jv < r.j1);  // |v| < 1
    }
    SUBCASE("free streaming, positive time") {
        const auto d = make_initial_data("gaussian-bump");
        const PhaseDensity f(d.f, std::make_shared<ZeroForce>(), 0.05);
        opt.x_points = 1;
        const auto r = derivative_norms(f, 0.3, 2.0, opt);
        CHECK(r.i1 > 0.0);
        CHECK(r.j1 > 0.0);
        CHECK(r.fd_gap < 0.05);
        CHECK_THROWS_AS(derivative_norms(f, -0.1, 1.0, opt), std::domain_error);
    }
}

TEST_CASE("norm series") {
    NormSeries s;
    NormEntry e;
    e.t = 0.0;
    e.gradf_sup = 2.0;
    s.append(e);
    e.t = 0.1;
    e.gradf_sup = 1.0;
    s.append(e);
    e.t = 0.2;
    e.gradf_sup = 3.0;
    s.append(e);
    CHECK(s.entries()[1].n == 2.0);
    CHECK(s.entries()[2].n == 3.0);
    CHECK(s.entries()[2].fitted_c > 0.0);
    e.t = 0.2;
    CHECK_THROWS_AS(s.append(e), std::invalid_argument);
    e.t = 0.3;
    e.i1 = -1.0;
    CHECK_THROWS_AS(s.append(e), std::invalid_argument);

    std::ostringstream os;
    write_norm_csv(os, s);
    std::istringstream is(os.str());
    const auto back = read_norm_csv(is);
    REQUIRE(back.size() == s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
        CHECK(back.entries()[k].t == s.entries()[k].t);
        CHECK(back.entries()[k].fitted_c == s.entries()[k].fitted_c);
    }
    std::istringstream bad("t,Rf,f_sup,gradf_sup,EB_sup,gradEB_sup,I_1,I_v,J_1,J_v,N,fitted_C\n0,0,0,0,0,0,0,0,0,0,0,0\n0.1,x,0,0,0,0,0,0,0,0,0,0\n");
    try {
        read_norm_csv(bad);
        FAIL("expected a parse error");
    } catch (const std::runtime_error& ex) {
        CHECK(std::string(ex.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("continuation report") {
    SUBCASE("zero data") {
        NormSeries s;
        for (int k = 0; k < 5; ++k) {
            NormEntry e;
            e.t = 0.1 * k;
            s.append(e);
        }
        const auto c = continuation_report(s, 0.4);
        CHECK(c.status == "zero data");
        CHECK(c.all_zero);
        CHECK_FALSE(c.support_growing);
    }
    SUBCASE("constant force grows the support") {
        const auto d = make_initial_data("gaussian-bump");
        const auto k = std::make_shared<ConstantForce>(Vec3{-0.5, 0.0, 0.0});
        const PhaseDensity f(d.f, k, 0.05);
        Rng rng(3);
        SupportTracker tracker(seed_ensemble(*d.f, 64, rng));
        SupNormLattice lat;
        lat.x_points = lat.xi_points = 3;
        NormSeries s;
        for (int step = 0; step <= 4; ++step) {
            if (step > 0) tracker.advance(0.1, *k);
            const double t = tracker.time();
            const auto n = sup_norm_estimates(f, nullptr, t, lat);
            NormEntry e;
            e.t = t;
            e.rf = tracker.radius();
            e.f_sup = n.f_sup;
            e.gradf_sup = n.gradf_sup;
            s.append(e);
        }
        // R_f grows by at most |K| t
        const double growth = s.entries().back().rf - s.entries().front().rf;
        CHECK(growth > 0.1);
        CHECK(growth < 0.2 + 1e-9);
        const auto c = continuation_report(s, 0.4);
        CHECK(c.support_growing);
        CHECK(c.status == "support growing");
        CHECK(continuation_json(c) == continuation_json(continuation_report(s, 0.4)));
    }
    SUBCASE("free streaming is bounded") {
        const auto d = make_initial_data("gaussian-bump");
        const PhaseDensity f(d.f, std::make_shared<ZeroForce>(), 0.05);
        Rng rng(3);
        SupportTracker tracker(seed_ensemble(*d.f, 64, rng));
        SupNormLattice lat;
        lat.x_points = lat.xi_points = 3;
        NormSeries s;
        ZeroForce zero;
        for (int step = 0; step <= 4; ++step) {
            if (step > 0) tracker.advance(0.1, zero);
            const auto n = sup_norm_estimates(f, nullptr, tracker.time(), lat);
            NormEntry e;
            e.t = tracker.time();
            e.rf = tracker.radius();
            e.f_sup = n.f_sup;
            e.gradf_sup = n.gradf_sup;
            s.append(e);
        }
        const auto c = continuation_report(s, 0.4);
        CHECK(c.rf_sup == doctest::Approx(c.rf_initial).epsilon(1e-12));
        CHECK(c.status == "R_f bounded & norms bounded");
        const auto json = continuation_json(c);
        CHECK(json.find("\"status\": \"R_f bounded & norms bounded\"") != std::string::npos);
    }
}
