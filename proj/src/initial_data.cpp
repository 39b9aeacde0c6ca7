#include "lwvm/initial_data.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include "lwvm/quadrature.hpp"

namespace lwvm {

namespace {

constexpr double kPi = std::numbers::pi;

double binom(int k, int n) {
    double r = 1.0;
    for (int q = 1; q <= n; ++q) r = r * (k - n + q) / q;
    return r;
}

double ipow(double x, int k) {
    double r = 1.0;
    for (int q = 0; q < k; ++q) r *= x;
    return r;
}

} // namespace

RadialBump::RadialBump(double radius, int exponent) : r_(radius), k_(exponent) {
    if (!(radius > 0.0)) throw std::invalid_argument("RadialBump: radius must be positive");
    if (exponent < 2) throw std::invalid_argument("RadialBump: exponent must be at least 2");
}

double RadialBump::value(const Vec3& y) const {
    const double u = 1.0 - dot(y, y) / (r_ * r_);
    return u > 0.0 ? ipow(u, k_) : 0.0;
}

Vec3 RadialBump::gradient(const Vec3& y) const {
    const double u = 1.0 - dot(y, y) / (r_ * r_);
    if (u <= 0.0) return {};
    return (-2.0 * k_ * ipow(u, k_ - 1) / (r_ * r_)) * y;
}

double RadialBump::partial_moment(double u) const {
    double s = 0.0;
    for (int n = 0; n <= k_; ++n) s += binom(k_, n) * (n % 2 ? -1.0 : 1.0) * std::pow(u, 2 * n + 3) / (2 * n + 3);
    return s;
}

double RadialBump::mass() const { return 4.0 * kPi * r_ * r_ * r_ * partial_moment(1.0); }

BumpProfile::BumpProfile(double amplitude, const Vec3& x0, double rx, const Vec3& xi0, double rxi, int exponent)
    : amp_(amplitude), x0_(x0), xi0_(xi0), bx_(rx, exponent), bxi_(rxi, exponent) {
    if (amplitude < 0.0) throw std::invalid_argument("BumpProfile: negative amplitude");
}

double BumpProfile::value(const Vec3& x, const Vec3& xi) const {
    const double a = bx_.value(x - x0_);
    return a == 0.0 ? 0.0 : amp_ * a * bxi_.value(xi - xi0_);
}

PhaseGradient BumpProfile::gradient(const Vec3& x, const Vec3& xi) const {
    const double a = bx_.value(x - x0_), b = bxi_.value(xi - xi0_);
    return {amp_ * b * bx_.gradient(x - x0_), amp_ * a * bxi_.gradient(xi - xi0_)};
}

RingProfile::RingProfile(double amplitude, const Vec3& x0, double rx, double r0, double width, int exponent)
    : amp_(amplitude), x0_(x0), bx_(rx, exponent), r0_(r0), w_(width), k_(exponent) {
    if (!(width > 0.0) || !(r0 > width)) throw std::invalid_argument("RingProfile: need ring_radius > ring_width > 0");
    if (amplitude < 0.0) throw std::invalid_argument("RingProfile: negative amplitude");
    // polynomial of degree 2k + 2 in p: exact with k + 2 nodes
    mass_ = amp_ * 4.0 * kPi * integrate_gl([&](double p) { return shell(p) * p * p; }, r0 - width, r0 + width, k_ + 2);
}

double RingProfile::shell(double p) const {
    const double z = (p - r0_) / w_;
    return std::abs(z) < 1.0 ? ipow(1.0 - z * z, k_) : 0.0;
}

double RingProfile::value(const Vec3& x, const Vec3& xi) const {
    const double a = bx_.value(x - x0_);
    return a == 0.0 ? 0.0 : amp_ * a * shell(norm(xi));
}

PhaseGradient RingProfile::gradient(const Vec3& x, const Vec3& xi) const {
    const double p = norm(xi);
    const double a = bx_.value(x - x0_);
    PhaseGradient g;
    g.dx = amp_ * shell(p) * bx_.gradient(x - x0_);
    const double z = (p - r0_) / w_;
    if (std::abs(z) < 1.0 && p > 0.0) {
        const double ds = k_ * ipow(1.0 - z * z, k_ - 1) * (-2.0 * z / w_);
        g.dxi = (amp_ * a * ds / p) * xi;
    }
    return g;
}

CoulombField::CoulombField(double q, const Vec3& x0, const RadialBump& profile) : q_(q), x0_(x0), b_(profile) {}

double CoulombField::total_charge() const { return q_ * b_.mass(); }

Vec3 CoulombField::value(const Vec3& x) const {
    const Vec3 y = x - x0_;
    const double u = norm(y) / b_.radius();
    const int k = b_.exponent();
    double s = 0.0;  // enclosed charge over 4 pi r^3, divided by q
    if (u < 1.0) {
        for (int n = 0; n <= k; ++n) s += binom(k, n) * (n % 2 ? -1.0 : 1.0) * std::pow(u, 2 * n) / (2 * n + 3);
    } else {
        s = b_.partial_moment(1.0) / (u * u * u);
    }
    return (q_ * s) * y;
}

Mat3 CoulombField::gradient(const Vec3& x) const {
    const Vec3 y = x - x0_;
    const double R = b_.radius();
    const double u = norm(y) / R;
    const int k = b_.exponent();
    double s = 0.0, ds = 0.0;  // ds = S'(u) / (u R^2)
    if (u < 1.0) {
        for (int n = 0; n <= k; ++n) {
            const double c = binom(k, n) * (n % 2 ? -1.0 : 1.0) / (2 * n + 3);
            s += c * std::pow(u, 2 * n);
            if (n > 0) ds += c * 2 * n * std::pow(u, 2 * n - 2);
        }
        ds /= R * R;
    } else {
        const double p1 = b_.partial_moment(1.0);
        s = p1 / (u * u * u);
        ds = -3.0 * p1 / std::pow(u, 5) / (R * R);
    }
    Mat3 g{};
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) g[a][b] = q_ * ((a == b ? s : 0.0) + ds * y[a] * y[b]);
    return g;
}

InitialData make_initial_data(const std::string& name, const std::map<std::string, double>& params) {
    auto take = [&](const std::set<std::string>& allowed) {
        for (const auto& [key, value] : params)
            if (!allowed.count(key)) throw std::invalid_argument("initial data '" + name + "': unknown parameter '" + key + "'");
    };
    auto get = [&](const std::string& key, double def) {
        auto it = params.find(key);
        return it == params.end() ? def : it->second;
    };
    auto exponent = [&] {
        const double e = get("exponent", 4);
        if (e != std::floor(e) || e < 2) throw std::invalid_argument("initial data: exponent must be an integer >= 2");
        return static_cast<int>(e);
    };
    InitialData d;
    d.name = name;
    if (name == "zero") {
        take({});
        d.f = std::make_shared<BumpProfile>(0.0, Vec3{}, 0.5, Vec3{}, 0.5, 6);
        d.e = [](const Vec3&) { return Vec3{}; };
        d.grad_e = [](const Vec3&) { return Mat3{}; };
        d.charge = [](const Vec3&) { return 0.0; };
        return d;
    }
    const Vec3 x0{get("x0_1", 0.0), get("x0_2", 0.0), get("x0_3", 0.0)};
    std::shared_ptr<const PhaseProfile> f;
    double qscale = 0.0;
    RadialBump bx;
    if (name == "gaussian-bump") {
        take({"amplitude", "x_radius", "xi_radius", "xi0_1", "xi0_2", "xi0_3", "x0_1", "x0_2", "x0_3", "exponent"});
        const Vec3 xi0{get("xi0_1", 0.25), get("xi0_2", 0.0), get("xi0_3", 0.0)};
        auto p = std::make_shared<BumpProfile>(get("amplitude", 1.0), x0, get("x_radius", 0.75), xi0,
                                               get("xi_radius", 0.5), exponent());
        qscale = p->momentum_mass();
        bx = p->x_bump();
        f = p;
    } else if (name == "ring") {
        take({"amplitude", "x_radius", "ring_radius", "ring_width", "x0_1", "x0_2", "x0_3", "exponent"});
        auto p = std::make_shared<RingProfile>(get("amplitude", 1.0), x0, get("x_radius", 0.5), get("ring_radius", 0.5),
                                               get("ring_width", 0.25), exponent());
        qscale = p->momentum_mass();
        bx = p->x_bump();
        f = p;
    } else {
        throw std::invalid_argument("unknown initial data profile '" + name + "'");
    }
    const CoulombField coulomb(qscale, x0, bx);
    d.f = f;
    d.e = [coulomb](const Vec3& x) { return coulomb.value(x); };
    d.grad_e = [coulomb](const Vec3& x) { return coulomb.gradient(x); };
    d.charge = [qscale, bx, x0](const Vec3& x) { return qscale * bx.value(x - x0); };
    return d;
}

double compatibility_residual(const InitialData& d, double half_width, int n) {
    if (n < 2) throw std::invalid_argument("compatibility_residual: need at least 2 points per axis");
    const double h = 2.0 * half_width / (n - 1);
    const double step = 1e-3 * std::max(half_width, 1.0);
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const Vec3 x{-half_width + i * h, -half_width + j * h, -half_width + k * h};
                double div = 0.0;
                for (int a = 0; a < 3; ++a) {
                    Vec3 e{};
                    e[a] = step;
                    div += (-d.e(x + 2.0 * e)[a] + 8.0 * d.e(x + e)[a] - 8.0 * d.e(x - e)[a] + d.e(x - 2.0 * e)[a]) /
                           (12.0 * step);
                }
                worst = std::max(worst, std::abs(div - d.charge(x)));
            }
    return worst;
}

} // namespace lwvm
