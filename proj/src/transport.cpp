#include "lwvm/transport.hpp"

#include <cmath>
#include <stdexcept>

#include "lwvm/io.hpp"

namespace lwvm {

Vec3 lorentz_k(const Vec3& e, const Vec3& b, const Vec3& xi) {
    const Vec3 v = relativistic_velocity(xi).value();
    return -(e + cross(v, b));
}

Mat3 ForceField::xi_jacobian(double t, const Vec3& x, const Vec3& xi) const {
    const double h = 1e-5 * std::max(1.0, norm(xi));
    Mat3 d{};
    for (int b = 0; b < 3; ++b) {
        Vec3 e{};
        e[b] = h;
        const Vec3 g = ((*this)(t, x, xi + e) - (*this)(t, x, xi - e)) / (2.0 * h);
        for (int a = 0; a < 3; ++a) d[a][b] = g[a];
    }
    return d;
}

Vec3 ElectromagneticForce::operator()(double t, const Vec3& x, const Vec3& xi, bool*) const {
    return lorentz_k(e_(t, x), b_(t, x), xi);
}

PhasePoint characteristics_step(const PhasePoint& p, double t, double dt, const ForceField& k, bool* outside) {
    bool out = false;
    auto rhs = [&](double s, const PhasePoint& q) {
        bool o = false;
        PhasePoint d{relativistic_velocity(q.xi).value(), -k(s, q.x, q.xi, &o)};
        out = out || o;
        return d;
    };
    auto shift = [](const PhasePoint& q, const PhasePoint& d, double h) { return PhasePoint{q.x + h * d.x, q.xi + h * d.xi}; };
    const PhasePoint k1 = rhs(t, p);
    const PhasePoint k2 = rhs(t + 0.5 * dt, shift(p, k1, 0.5 * dt));
    const PhasePoint k3 = rhs(t + 0.5 * dt, shift(p, k2, 0.5 * dt));
    const PhasePoint k4 = rhs(t + dt, shift(p, k3, dt));
    PhasePoint r;
    r.x = p.x + (dt / 6.0) * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
    r.xi = p.xi + (dt / 6.0) * (k1.xi + 2.0 * k2.xi + 2.0 * k3.xi + k4.xi);
    if (outside && out) *outside = true;
    return r;
}

PhasePoint integrate_characteristic(PhasePoint p, double t0, double t1, double max_step, const ForceField& k,
                                    bool* outside) {
    if (!(max_step > 0.0)) throw std::invalid_argument("integrate_characteristic: max_step must be positive");
    const double span = t1 - t0;
    if (span == 0.0) return p;
    // tolerate rounding when span is a multiple of max_step
    const int n = std::max(1, static_cast<int>(std::ceil(std::abs(span) / max_step - 1e-9)));
    const double h = span / n;
    for (int q = 0; q < n; ++q) p = characteristics_step(p, t0 + q * h, h, k, outside);
    return p;
}

PhaseDensity::PhaseDensity(std::shared_ptr<const PhaseProfile> fin, std::shared_ptr<const ForceField> k,
                           double max_step)
    : fin_(std::move(fin)), k_(std::move(k)), max_step_(max_step) {
    if (!fin_) throw std::invalid_argument("PhaseDensity: missing initial profile");
    if (!k_) k_ = std::make_shared<ZeroForce>();
    if (!(max_step > 0.0)) throw std::invalid_argument("PhaseDensity: max_step must be positive");
}

PhasePoint PhaseDensity::foot(double t, const Vec3& x, const Vec3& xi, bool* outside) const {
    if (t < 0.0) throw std::domain_error("PhaseDensity: negative time");
    // K = 0 on [0, t]: straight lines, same as the integrator up to rounding
    if (k_->bound(t) == 0.0) return {x - t * relativistic_velocity(xi).value(), xi};
    return integrate_characteristic({x, xi}, t, 0.0, max_step_, *k_, outside);
}

bool PhaseDensity::certainly_zero(double t, const Vec3& x, const Vec3& xi) const {
    const double reach = t * k_->bound(t);
    if (norm(xi) >= fin_->xi_radius() + reach) return true;
    // |xi| stays below p along the backward trajectory, so the speed stays below p / sqrt(1 + p^2)
    const double p = norm(xi) + reach;
    return norm(x - fin_->x_center()) >= fin_->x_radius() + t * p / std::sqrt(1.0 + p * p);
}

FValue PhaseDensity::evaluate(double t, const Vec3& x, const Vec3& xi) const {
    FValue r;
    if (certainly_zero(t, x, xi)) return r;
    const auto p = foot(t, x, xi, &r.outside);
    r.value = fin_->value(p.x, p.xi);
    return r;
}

PhaseGradient PhaseDensity::gradient(double t, const Vec3& x, const Vec3& xi, double h) const {
    PhaseGradient g;
    if (t == 0.0) return fin_->gradient(x, xi);
    const auto f0 = foot(t, x, xi);
    const auto gin = fin_->gradient(f0.x, f0.xi);
    for (int d = 0; d < 6; ++d) {
        Vec3 ex{}, exi{};
        (d < 3 ? ex[d] : exi[d - 3]) = h;
        const auto a = foot(t, x + ex, xi + exi);
        const auto b = foot(t, x - ex, xi - exi);
        const double col = (dot(gin.dx, a.x - b.x) + dot(gin.dxi, a.xi - b.xi)) / (2.0 * h);
        (d < 3 ? g.dx[d] : g.dxi[d - 3]) = col;
    }
    return g;
}

SupportTracker::SupportTracker(std::vector<PhasePoint> ensemble, double t0) : pts_(std::move(ensemble)), t_(t0) {
    if (pts_.empty()) throw std::invalid_argument("SupportTracker: empty ensemble");
    double r = 0.0;
    for (const auto& p : pts_) r = std::max(r, norm(p.xi));
    history_.push_back({t_, r, r});
}

const SupportSample& SupportTracker::advance(double dt, const ForceField& k) {
    double r = 0.0;
    for (auto& p : pts_) {
        p = characteristics_step(p, t_, dt, k);
        r = std::max(r, norm(p.xi));
    }
    t_ += dt;
    history_.push_back({t_, r, std::max(r, history_.back().r_star)});
    return history_.back();
}

std::vector<PhasePoint> seed_ensemble(const PhaseProfile& fin, std::size_t n, Rng& rng) {
    if (n == 0) throw std::invalid_argument("seed_ensemble: empty ensemble requested");
    // empty support: a single particle at rest keeps R_f = 0
    if (fin.sup() == 0.0) return {PhasePoint{fin.x_center(), Vec3{}}};
    std::vector<PhasePoint> out{fin.argmax()};
    std::size_t tries = 0;
    while (out.size() < n) {
        if (++tries > 1000 * n) throw std::runtime_error("seed_ensemble: support too thin for rejection sampling");
        const PhasePoint p{fin.x_center() + rng.in_ball(fin.x_radius()), rng.in_ball(fin.xi_radius())};
        if (fin.value(p.x, p.xi) > 0.0) out.push_back(p);
    }
    return out;
}

void write_ensemble_csv(std::ostream& os, double t, std::span<const PhasePoint> pts, std::span<const double> values,
                        bool header) {
    if (values.size() != pts.size()) throw std::invalid_argument("write_ensemble_csv: size mismatch");
    if (header) os << "t,x1,x2,x3,xi1,xi2,xi3,f_value\n";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        os << fmt17(t);
        for (int a = 0; a < 3; ++a) os << ',' << fmt17(pts[i].x[a]);
        for (int a = 0; a < 3; ++a) os << ',' << fmt17(pts[i].xi[a]);
        os << ',' << fmt17(values[i]) << '\n';
    }
}

} // namespace lwvm
