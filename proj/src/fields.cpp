#include "lwvm/fields.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "lwvm/parallel.hpp"

namespace lwvm {

namespace {
constexpr double kPi = std::numbers::pi;
}

HomogeneousField homogeneous_field(const InitialData& data, double t, const Vec3& x, const SphereRule& sphere) {
    if (data.b) throw std::invalid_argument("homogeneous_field: nonzero B^in is not supported");
    HomogeneousField r;
    if (t == 0.0) {
        r.dt_a0 = -(1.0 / (4.0 * kPi)) * sphere.integrate([&](const Vec3&) { return 1.0; }) * data.e(x);
        return r;
    }
    Vec3 mean{}, dmean{};
    for (const auto& n : sphere.nodes()) {
        const Vec3 y = x - t * n.omega;
        mean += n.weight * data.e(y);
        const Mat3 g = data.grad_e(y);
        for (int a = 0; a < 3; ++a) dmean[a] += n.weight * dot(g[a], n.omega);
    }
    r.a0 = (-t / (4.0 * kPi)) * mean;
    r.dt_a0 = (-1.0 / (4.0 * kPi)) * mean + (t / (4.0 * kPi)) * dmean;
    return r;
}

// ---- moments ----

MomentSpec::MomentSpec(Kind kind, double r_star) : kind_(kind), r_star_(r_star) {
    if (kind == Kind::custom) throw std::invalid_argument("MomentSpec: custom weights need evaluators");
    if (!(r_star > 0.0)) throw std::invalid_argument("MomentSpec: r_star must be positive");
}

MomentSpec::MomentSpec(Custom custom, double r_star) : kind_(Kind::custom), custom_(std::move(custom)), r_star_(r_star) {
    if (!custom_.value || !custom_.gradient || !custom_.hessian)
        throw std::invalid_argument("MomentSpec: custom weight needs value, gradient and hessian");
    if (!(r_star > 0.0)) throw std::invalid_argument("MomentSpec: r_star must be positive");
}

MomentSpec MomentSpec::parse(const std::string& name, double r_star) {
    if (name == "1") return {Kind::one, r_star};
    if (name == "v1") return {Kind::v1, r_star};
    if (name == "v2") return {Kind::v2, r_star};
    if (name == "v3") return {Kind::v3, r_star};
    throw std::invalid_argument("unknown moment weight '" + name + "'");
}

std::string MomentSpec::name() const {
    switch (kind_) {
        case Kind::one: return "1";
        case Kind::v1: return "v1";
        case Kind::v2: return "v2";
        case Kind::v3: return "v3";
        default: return "custom";
    }
}

std::array<double, 3> MomentSpec::cutoff_radial(double rho) const {
    const double z = (rho - r_star_) / r_star_;
    if (z <= 0.0) return {1.0, 0.0, 0.0};
    if (z >= 1.0) return {0.0, 0.0, 0.0};
    const double s = z * z * z * (10.0 - 15.0 * z + 6.0 * z * z);
    const double s1 = 30.0 * z * z * (1.0 - z) * (1.0 - z);
    const double s2 = 60.0 * z * (1.0 - z) * (1.0 - 2.0 * z);
    return {1.0 - s, -s1 / r_star_, -s2 / (r_star_ * r_star_)};
}

double MomentSpec::cutoff(const Vec3& xi) const { return cutoff_radial(norm(xi))[0]; }

void MomentSpec::raw(const Vec3& xi, double& m, Vec3& g, Mat3& h, int order) const {
    g = {};
    h = {};
    if (kind_ == Kind::one) {
        m = 1.0;
        return;
    }
    if (kind_ == Kind::custom) {
        m = custom_.value(xi);
        if (order > 0) g = custom_.gradient(xi);
        if (order > 1) h = custom_.hessian(xi);
        return;
    }
    const int k = static_cast<int>(kind_) - 1;
    m = relativistic_velocity(xi)[k];
    if (order > 0) g = velocity_jacobian(xi)[k];
    if (order > 1) h = velocity_hessian(xi)[k];
}

double MomentSpec::value(const Vec3& xi) const {
    double m;
    Vec3 g;
    Mat3 h;
    raw(xi, m, g, h, 0);
    return m * cutoff(xi);
}

Vec3 MomentSpec::gradient(const Vec3& xi) const {
    double m;
    Vec3 g;
    Mat3 h;
    raw(xi, m, g, h, 1);
    const double rho = norm(xi);
    const auto c = cutoff_radial(rho);
    Vec3 out = c[0] * g;
    if (c[1] != 0.0) out += (m * c[1] / rho) * xi;
    return out;
}

Mat3 MomentSpec::hessian(const Vec3& xi) const {
    double m;
    Vec3 g;
    Mat3 h;
    raw(xi, m, g, h, 2);
    const double rho = norm(xi);
    const auto c = cutoff_radial(rho);
    Mat3 out{};
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) out[a][b] = c[0] * h[a][b];
    if (c[1] != 0.0 || c[2] != 0.0) {
        const Vec3 e = xi / rho;
        const Vec3 gc = c[1] * e;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                const double hc = c[2] * e[a] * e[b] + c[1] / rho * ((a == b ? 1.0 : 0.0) - e[a] * e[b]);
                out[a][b] += g[a] * gc[b] + gc[a] * g[b] + m * hc;
            }
    }
    return out;
}

MomentDensities moment_densities(const PhaseDensity& f, double t, const Vec3& x, const MomentumQuadrature& xi_rule) {
    MomentDensities r;
    for (const auto& n : xi_rule.nodes()) {
        const auto fv = f.evaluate(t, x, n.xi);
        if (fv.value == 0.0) continue;
        r.outside = r.outside || fv.outside;
        r.rho += n.weight * fv.value;
        r.j += (n.weight * fv.value) * relativistic_velocity(n.xi).value();
    }
    return r;
}

PotentialValue potentials(const PhaseDensity& f, const InitialData& data, double t, const Vec3& x, int time_order,
                          const SphereRule& sphere, const MomentumQuadrature& xi_rule) {
    PotentialValue r;
    if (!(t > 0.0)) return r;
    const ConeQuadrature cq(t, time_order, sphere);
    for (const auto& c : cq.nodes()) {
        const auto m = moment_densities(f, t - c.s, x - c.s * c.omega, xi_rule);
        r.phi += c.y_weight * m.rho;
        r.a += c.y_weight * m.j;
    }
    r.a0 = homogeneous_field(data, t, x, sphere).a0;
    r.a += r.a0;
    return r;
}

// ---- grid ----

Grid3::Grid3(int n, double half_width) : n_(n), l_(half_width), h_(2.0 * half_width / (n - 1)) {
    if (n < 4) throw std::invalid_argument("Grid3: need at least 4 points per axis");
    if (!(half_width > 0.0)) throw std::invalid_argument("Grid3: half width must be positive");
}

Vec3 Grid3::point(std::size_t idx) const {
    const int k = static_cast<int>(idx % n_);
    const int j = static_cast<int>((idx / n_) % n_);
    const int i = static_cast<int>(idx / (static_cast<std::size_t>(n_) * n_));
    return point(i, j, k);
}

bool Grid3::contains(const Vec3& x) const {
    for (int a = 0; a < 3; ++a)
        if (!(std::abs(x[a]) <= l_)) return false;
    return true;
}

// ---- field history ----

void FieldHistory::push(FieldSlice s) {
    if (s.eb.size() != grid_.size()) throw std::invalid_argument("FieldHistory: slice size does not match the grid");
    if (!slices_.empty() && !(s.t > slices_.back().t)) throw std::invalid_argument("FieldHistory: slices must advance in time");
    double sup = 0.0;
    for (const auto& v : s.eb)
        sup = std::max(sup, norm(Vec3{v[0], v[1], v[2]}) + norm(Vec3{v[3], v[4], v[5]}));
    sup_.push_back(sup);
    slices_.push_back(std::move(s));
}

void FieldHistory::replace_last(FieldSlice s) {
    if (slices_.empty()) throw std::logic_error("FieldHistory: nothing to replace");
    slices_.pop_back();
    sup_.pop_back();
    push(std::move(s));
}

bool FieldHistory::fields(double t, const Vec3& x, Vec3& e, Vec3& b) const {
    e = {};
    b = {};
    if (slices_.empty() || !grid_.contains(x)) return false;
    const std::size_t ns = slices_.size();
    // cubic through up to 4 slices around t; linear extrapolation past the newest
    std::size_t first, count;
    if (t > slices_.back().t) {
        count = std::min<std::size_t>(2, ns);
        first = ns - count;
    } else {
        std::size_t lo = 0;
        while (lo + 1 < ns && slices_[lo + 1].t <= t) ++lo;
        first = lo >= 1 ? lo - 1 : 0;
        count = std::min<std::size_t>(4, ns);
        if (first + count > ns) first = ns - count;
    }
    for (std::size_t q = first; q < first + count; ++q) {
        double w = 1.0;
        for (std::size_t r = first; r < first + count; ++r)
            if (r != q) w *= (t - slices_[r].t) / (slices_[q].t - slices_[r].t);
        if (w == 0.0) continue;
        std::array<double, 6> v{};
        grid_.interpolate(slices_[q].eb, x, v);
        for (int a = 0; a < 3; ++a) {
            e[a] += w * v[a];
            b[a] += w * v[a + 3];
        }
    }
    return true;
}

Vec3 FieldHistory::operator()(double t, const Vec3& x, const Vec3& xi, bool* outside) const {
    Vec3 e, b;
    if (!fields(t, x, e, b)) {
        if (outside) *outside = true;
        return {};
    }
    return lorentz_force(e, b, xi);
}

Mat3 FieldHistory::xi_jacobian(double t, const Vec3& x, const Vec3& xi) const {
    Vec3 e, b;
    Mat3 d{};
    if (!fields(t, x, e, b)) return d;
    const Mat3 j = velocity_jacobian(xi);
    for (int c = 0; c < 3; ++c) {
        const Vec3 g = -cross(Vec3{j[0][c], j[1][c], j[2][c]}, b);
        for (int a = 0; a < 3; ++a) d[a][c] = g[a];
    }
    return d;
}

double FieldHistory::bound(double t) const {
    double m = 0.0;
    for (std::size_t k = 0; k < slices_.size(); ++k) {
        m = std::max(m, sup_[k]);
        if (slices_[k].t > t) break;
    }
    // interpolation weights sum in absolute value to at most 3 within one step of the data
    return 3.0 * m;
}

Vec3 lorentz_force(const Vec3& e, const Vec3& b, const Vec3& xi) { return lorentz_k(e, b, xi); }

Vec3 lorentz_force(const PotentialDerivatives& d, const Vec3& xi) {
    auto curl = [](const Mat3& g) { return Vec3{g[2][1] - g[1][2], g[0][2] - g[2][0], g[1][0] - g[0][1]}; };
    const Vec3 v = relativistic_velocity(xi).value();
    return d.dt_a0 - cross(v, curl(d.grad_a0)) + d.dt_mv + d.grad_m1 - cross(v, curl(d.grad_mv));
}

double divergence_xi(const ForceField& k, double t, const Vec3& x, const Vec3& xi, double h) {
    double div = 0.0;
    for (int b = 0; b < 3; ++b) {
        Vec3 e{};
        e[b] = h;
        div += (k(t, x, xi + e)[b] - k(t, x, xi - e)[b]) / (2.0 * h);
    }
    return div;
}

} // namespace lwvm
