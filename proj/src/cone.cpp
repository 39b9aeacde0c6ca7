#include "lwvm/cone.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "lwvm/random.hpp"

namespace lwvm {

namespace {

constexpr double kPi = std::numbers::pi;

Vec3 axis_or_z(const Vec3& v) {
    const double n = norm(v);
    return n > 0.0 ? v / n : Vec3{0, 0, 1};
}

double ipow(double x, int k) {
    double r = 1.0;
    for (int q = 0; q < k; ++q) r *= x;
    return r;
}

// Sums over cone samples of the three pairings entering the second identity,
// for all 16 index pairs at once.
struct SecondPairings {
    Mat4 lhs{};  // <Y, d_ij phi>
    Mat4 p0{};   // <b0 Y, T^2 phi>
    Mat4 p1{};   // <b1 Y, T phi>
};

SecondPairings second_pairings(const SubluminalVelocity& v, const TestFunction& phi, const PairingOrders& orders) {
    SecondPairings out;
    const auto cs = cone_samples(phi, orders, axis_or_z(v.value()));
    for (const auto& n : cs.samples) {
        const Point4 p = make_point(n.s, n.s * n.omega);
        const Mat4 h = phi.hessian(p);
        const double t1 = phi.stream(p, v.value());
        const double t2 = phi.stream2(p, v.value());
        const auto cv = cone_values(v, n.omega);
        const double inv_s = 1.0 / n.s;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                out.lhs[i][j] += n.weight * h[i][j];
                out.p0[i][j] += n.weight * cv.b0[i][j] * t2;
                out.p1[i][j] += n.weight * cv.b1[i][j] * inv_s * t1;
            }
    }
    return out;
}

// vp(b2 Y) against psi for all index pairs, the near part regularized on the
// same nodes.
Mat4 vp_all(const SubluminalVelocity& v, const TestFunction& psi, double theta, const PairingOrders& orders) {
    if (!(theta > 0.0)) throw std::invalid_argument("vp_pair: theta must be positive");
    const Vec3 pole = axis_or_z(v.value());
    Mat4 out{};

    const auto far = cone_samples(psi, orders, pole, theta);
    for (const auto& n : far.samples) {
        const double w = n.weight * psi.value(make_point(n.s, n.s * n.omega)) / (n.s * n.s);
        if (w == 0.0) continue;
        const auto cv = cone_values(v, n.omega);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) out[i][j] += w * cv.b2[i][j];
    }

    const auto near = cone_samples(psi, orders, pole, 0.0, theta);
    // sphere integral of b2(1, .) with the rule used on full slices; ~0
    Mat4 sphere_b2{};
    bool have_sphere_b2 = false;
    for (const auto& sl : near.slices) {
        const double psi0 = psi.value(make_point(sl.s, Vec3{}));
        const double inv_s2 = 1.0 / (sl.s * sl.s);
        for (std::size_t q = sl.begin; q < sl.end; ++q) {
            const auto& n = near.samples[q];
            double d = psi.value(make_point(n.s, n.s * n.omega));
            if (sl.full) d -= psi0;
            const double w = n.weight * d * inv_s2;
            if (w == 0.0) continue;
            const auto cv = cone_values(v, n.omega);
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) out[i][j] += w * cv.b2[i][j];
        }
        if (!sl.full && psi0 != 0.0) {
            if (!have_sphere_b2) {
                const auto rule = SphereRule::rotated(pole, orders.polar, orders.azimuth);
                for (const auto& n : rule.nodes()) {
                    const auto cv = cone_values(v, n.omega);
                    for (int i = 0; i < 4; ++i)
                        for (int j = 0; j < 4; ++j) sphere_b2[i][j] += n.weight * cv.b2[i][j];
                }
                have_sphere_b2 = true;
            }
            const double w = sl.weight * psi0 * inv_s2;
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) out[i][j] -= w * sphere_b2[i][j];
        }
    }
    return out;
}

void check_index(int i) {
    if (i < 0 || i > 3) throw std::out_of_range("index must be in 0..3");
}

} // namespace

// ---- TestFunction ----

TestFunction::TestFunction(const Point4& center, double radius, int exponent, double amplitude)
    : c_(center), rho_(radius), k_(exponent), amp_(amplitude) {
    if (!(radius > 0.0) || !std::isfinite(radius)) throw std::invalid_argument("TestFunction: radius must be positive");
    if (exponent < 3) throw std::invalid_argument("TestFunction: exponent must be at least 3");
    if (!all_finite(center)) throw std::invalid_argument("TestFunction: non-finite center");
}

double TestFunction::value(const Point4& p) const {
    const Point4 d = p - c_;
    const double u = 1.0 - dot(d, d) / (rho_ * rho_);
    return u > 0.0 ? amp_ * ipow(u, k_) : 0.0;
}

Point4 TestFunction::gradient(const Point4& p) const {
    const Point4 d = p - c_;
    const double r2 = rho_ * rho_;
    const double u = 1.0 - dot(d, d) / r2;
    if (u <= 0.0) return {};
    return (-2.0 * amp_ * k_ * ipow(u, k_ - 1) / r2) * d;
}

Mat4 TestFunction::hessian(const Point4& p) const {
    const Point4 d = p - c_;
    const double r2 = rho_ * rho_;
    const double u = 1.0 - dot(d, d) / r2;
    Mat4 h{};
    if (u <= 0.0) return h;
    const double a = 4.0 * amp_ * k_ * (k_ - 1) * ipow(u, k_ - 2) / (r2 * r2);
    const double b = -2.0 * amp_ * k_ * ipow(u, k_ - 1) / r2;
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) h[i][j] = a * d[i] * d[j];
        h[i][i] += b;
    }
    return h;
}

double TestFunction::stream(const Point4& p, const Vec3& v) const {
    const Point4 w{1.0, v[0], v[1], v[2]};
    return dot(w, gradient(p));
}

double TestFunction::stream2(const Point4& p, const Vec3& v) const {
    const Point4 w{1.0, v[0], v[1], v[2]};
    const Mat4 h = hessian(p);
    double s = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) s += w[i] * h[i][j] * w[j];
    return s;
}

// ---- cone samples ----

ConeSampling cone_samples(const TestFunction& phi, const PairingOrders& orders, const Vec3& pole, double s_min,
                          double s_max) {
    if (orders.time < 1 || orders.polar < 1 || orders.azimuth < 1)
        throw std::invalid_argument("cone_samples: orders must be positive");
    ConeSampling out;
    const double c0 = phi.center()[0];
    const Vec3 cx = spatial(phi.center());
    const double C = norm(cx);
    const double rho = phi.radius();
    const double k0 = c0 * c0 + C * C - rho * rho;

    // (s, s omega) meets the ball iff 2 s^2 - 2 s (c0 + C) + k0 < 0 for the best omega
    const double disc = (c0 + C) * (c0 + C) - 2.0 * k0;
    if (disc <= 0.0) return out;
    const double lo = std::max({0.0, s_min, 0.5 * (c0 + C - std::sqrt(disc))});
    const double hi = std::min(s_max, 0.5 * (c0 + C + std::sqrt(disc)));
    if (!(hi > lo)) return out;

    std::vector<double> breaks{lo, hi};
    // the whole sphere lies inside iff 2 s^2 - 2 s (c0 - C) + k0 < 0
    const double disc2 = (c0 - C) * (c0 - C) - 2.0 * k0;
    if (disc2 > 0.0 && C > 0.0) {
        for (double r : {0.5 * (c0 - C - std::sqrt(disc2)), 0.5 * (c0 - C + std::sqrt(disc2))})
            if (r > lo && r < hi) breaks.push_back(r);
    }
    std::sort(breaks.begin(), breaks.end());

    const auto full = SphereRule::rotated(pole, orders.polar, orders.azimuth);
    const Vec3 cap_pole = C > 0.0 ? cx / C : Vec3{0, 0, 1};
    const auto& gl = gauss_legendre(orders.time);

    for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
        const double a = breaks[b], e = breaks[b + 1];
        if (!(e > a)) continue;
        const double half = 0.5 * (e - a), mid = 0.5 * (e + a);
        for (int q = 0; q < orders.time; ++q) {
            const double s = mid + half * gl.nodes[q];
            const double ws = half * gl.weights[q] * s / (4.0 * kPi);
            ConeSlice sl{s, ws, false, out.samples.size(), out.samples.size()};
            double mu_lo = -2.0;
            if (C > 0.0) mu_lo = ((s - c0) * (s - c0) + s * s + C * C - rho * rho) / (2.0 * s * C);
            if (mu_lo <= -1.0) {
                sl.full = true;
                for (const auto& n : full.nodes()) out.samples.push_back({s, n.omega, ws * n.weight});
            } else if (mu_lo < 1.0) {
                const auto cap = SphereRule::cap(cap_pole, mu_lo, orders.polar, orders.azimuth);
                for (const auto& n : cap.nodes()) out.samples.push_back({s, n.omega, ws * n.weight});
            }
            sl.end = out.samples.size();
            if (sl.end > sl.begin) out.slices.push_back(sl);
        }
    }
    return out;
}

// ---- pairings ----

YPairResult y_pair(double horizon, const TestFunction& phi, const PairingOrders& orders) {
    if (!(horizon > 0.0)) throw std::invalid_argument("y_pair: horizon must be positive");
    YPairResult r;
    const auto cs = cone_samples(phi, orders, {0, 0, 1}, 0.0, horizon);
    for (const auto& n : cs.samples) r.value += n.weight * phi.value(make_point(n.s, n.s * n.omega));
    const double c0 = phi.center()[0];
    const double C = norm(spatial(phi.center()));
    const double reach = 0.5 * (c0 + C + std::sqrt(std::max(0.0, (c0 + C) * (c0 + C) -
                                                               2.0 * (c0 * c0 + C * C - phi.radius() * phi.radius()))));
    r.reduced_accuracy = phi.contains_origin() || (!cs.samples.empty() && reach > horizon);
    return r;
}

double y_pair(double horizon, const std::function<double(double, const Vec3&)>& phi, int time_order,
              const SphereRule& sphere) {
    const ConeQuadrature cq(horizon, time_order, sphere);
    double sum = 0.0;
    for (const auto& n : cq.nodes()) sum += n.y_weight * phi(n.s, n.s * n.omega);
    return sum;
}

double y_convolve(const std::function<double(double, const Vec3&)>& g, double t, const Vec3& x, int time_order,
                  const SphereRule& sphere) {
    if (!(t > 0.0)) return 0.0;
    const ConeQuadrature cq(t, time_order, sphere);
    double sum = 0.0;
    for (const auto& n : cq.nodes()) sum += n.y_weight * g(t - n.s, x - n.s * n.omega);
    return sum;
}

PairingReport division_identity_first(const SubluminalVelocity& v, int i, const TestFunction& phi,
                                      const PairingOrders& orders) {
    check_index(i);
    PairingReport r;
    r.check = "division_identity_first";
    r.v = v.value();
    r.indices = {i};
    r.orders = orders;
    const auto cs = cone_samples(phi, orders, axis_or_z(v.value()));
    for (const auto& n : cs.samples) {
        const Point4 p = make_point(n.s, n.s * n.omega);
        const auto cv = cone_values(v, n.omega);
        r.lhs -= n.weight * phi.gradient(p)[i];
        r.rhs += n.weight * (-cv.a0[i] * phi.stream(p, v.value()) + cv.a1[i] / n.s * phi.value(p));
    }
    r.residual = std::abs(r.lhs - r.rhs);
    r.scale = std::max({std::abs(r.lhs), std::abs(r.rhs), 1.0});
    return r;
}

double vp_pair(const SubluminalVelocity& v, int i, int j, const TestFunction& psi, double theta,
               const PairingOrders& orders) {
    check_index(i);
    check_index(j);
    return vp_all(v, psi, theta, orders)[i][j];
}

double vp_pair(const SubluminalVelocity& v, int i, int j, const std::function<double(double, const Vec3&)>& psi,
               double theta, double s_max, const PairingOrders& orders) {
    check_index(i);
    check_index(j);
    if (!(theta > 0.0)) throw std::invalid_argument("vp_pair: theta must be positive");
    if (!(s_max > 0.0)) return 0.0;
    const auto rule = SphereRule::rotated(axis_or_z(v.value()), orders.polar, orders.azimuth);
    std::vector<double> b2(rule.size());
    for (std::size_t q = 0; q < rule.size(); ++q) b2[q] = cone_values(v, rule.nodes()[q].omega).b2[i][j];

    auto panel = [&](double a, double e, bool near) {
        if (!(e > a)) return 0.0;
        return integrate_gl(
            [&](double s) {
                const double psi0 = near ? psi(s, Vec3{}) : 0.0;
                double acc = 0.0;
                for (std::size_t q = 0; q < rule.size(); ++q) {
                    const auto& n = rule.nodes()[q];
                    acc += n.weight * b2[q] * (psi(s, s * n.omega) - psi0);
                }
                return acc / (4.0 * kPi * s);
            },
            a, e, orders.time);
    };
    return panel(0.0, std::min(theta, s_max), true) + panel(theta, s_max, false);
}

// ---- delta coefficients ----

DeltaCoefficients extract_delta_coefficients(const SubluminalVelocity& v, const DeltaOptions& opt) {
    const Vec3 axis = axis_or_z(v.value());
    const TestFunction phi_a(Point4{}, opt.radius, opt.exponent);
    const TestFunction phi_b(make_point(0.0, opt.shift * axis), opt.radius, opt.exponent);

    auto one = [&](const TestFunction& phi) {
        const double at0 = phi.value(Point4{});
        if (at0 == 0.0) throw std::invalid_argument("extract_delta_coefficients: test function vanishes at 0");
        const auto sp = second_pairings(v, phi, opt.orders);
        const Mat4 vp = vp_all(v, phi, opt.theta, opt.orders);
        Mat4 c{};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) c[i][j] = (sp.lhs[i][j] - sp.p0[i][j] + sp.p1[i][j] - vp[i][j]) / at0;
        return c;
    };

    DeltaCoefficients d;
    d.c_a = one(phi_a);
    d.c_b = one(phi_b);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            d.c[i][j] = 0.5 * (d.c_a[i][j] + d.c_b[i][j]);
            d.spread[i][j] = std::abs(d.c_a[i][j] - d.c_b[i][j]) / std::max(std::abs(d.c[i][j]), 1.0);
        }
    return d;
}

double extract_delta_coefficient(const SubluminalVelocity& v, int i, int j, const DeltaOptions& opt) {
    check_index(i);
    check_index(j);
    const auto d = extract_delta_coefficients(v, opt);
    if (d.spread[i][j] > opt.tolerance)
        throw std::runtime_error("extract_delta_coefficient: test functions disagree (spread " +
                                 std::to_string(d.spread[i][j]) + ")");
    return d.c[i][j];
}

Mat4 rotate_delta(const Mat4& c_axis, const Vec3& v) {
    if (norm(v) == 0.0) return c_axis;
    const auto f = frame_from_pole(v / norm(v));
    Mat4 r{};  // diag(1, R), columns of R = e1, e2, pole
    r[0][0] = 1.0;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) r[a + 1][b + 1] = f[b][a];
    Mat4 out{};
    for (int m = 0; m < 4; ++m)
        for (int n = 0; n < 4; ++n) {
            double s = 0.0;
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) s += r[m][a] * c_axis[a][b] * r[n][b];
            out[m][n] = s;
        }
    return out;
}

Mat4 DeltaCoefficientCache::get(const Vec3& v) {
    const double q = norm(v);
    {
        std::lock_guard lock(mutex_);
        auto it = table_.find(q);
        if (it != table_.end()) return rotate_delta(it->second, v);
    }
    const Mat4 c = extract_delta_coefficients(SubluminalVelocity(Vec3{0, 0, q}), opt_).c;
    {
        std::lock_guard lock(mutex_);
        table_.emplace(q, c);
    }
    return rotate_delta(c, v);
}

std::size_t DeltaCoefficientCache::size() const {
    std::lock_guard lock(mutex_);
    return table_.size();
}

DeltaCoefficientTable::DeltaCoefficientTable(double v_max, int nodes, DeltaOptions opt) : v_max_(v_max) {
    if (!(v_max > 0.0 && v_max < 1.0)) throw std::invalid_argument("DeltaCoefficientTable: v_max must be in (0, 1)");
    if (nodes < 2) throw std::invalid_argument("DeltaCoefficientTable: need at least 2 nodes");
    q_.resize(nodes);
    c_.resize(nodes);
    for (int n = 0; n < nodes; ++n) {
        // Chebyshev points of the second kind
        q_[n] = 0.5 * v_max * (1.0 - std::cos(kPi * n / (nodes - 1)));
        const auto d = extract_delta_coefficients(SubluminalVelocity(Vec3{0, 0, q_[n]}), opt);
        c_[n] = d.c;
        for (const auto& row : d.spread)
            for (double x : row) max_spread_ = std::max(max_spread_, x);
    }
}

Mat4 DeltaCoefficientTable::get(const Vec3& v) const {
    const double q = norm(v);
    if (q > v_max_) throw std::domain_error("DeltaCoefficientTable: |v| beyond the tabulated range");
    // barycentric interpolation
    const int n = static_cast<int>(q_.size());
    Mat4 num{};
    double den = 0.0;
    for (int k = 0; k < n; ++k) {
        const double diff = q - q_[k];
        if (diff == 0.0) return rotate_delta(c_[k], v);
        double w = (k % 2 ? -1.0 : 1.0) / diff;
        if (k == 0 || k == n - 1) w *= 0.5;
        den += w;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) num[i][j] += w * c_[k][i][j];
    }
    for (auto& row : num)
        for (double& x : row) x /= den;
    return rotate_delta(num, v);
}

const DeltaCoefficientTable& default_delta_table() {
    static const DeltaCoefficientTable table;
    return table;
}

PairingReport division_identity_second(const SubluminalVelocity& v, int i, int j, const TestFunction& phi,
                                       double theta, const PairingOrders& orders, const DeltaCoefficients* delta) {
    check_index(i);
    check_index(j);
    PairingReport r;
    r.check = "division_identity_second";
    r.v = v.value();
    r.indices = {i, j};
    r.orders = orders;
    const auto sp = second_pairings(v, phi, orders);
    const Mat4 vp = vp_all(v, phi, theta, orders);
    r.lhs = sp.lhs[i][j];
    r.rhs = sp.p0[i][j] - sp.p1[i][j] + vp[i][j];
    const double at0 = phi.value(Point4{});
    if (at0 != 0.0) {
        if (delta) {
            r.rhs += delta->c[i][j] * at0;
        } else {
            DeltaOptions opt;
            opt.orders = orders;
            opt.theta = theta;
            r.rhs += extract_delta_coefficients(v, opt).c[i][j] * at0;
        }
    }
    r.residual = std::abs(r.lhs - r.rhs);
    r.scale = std::max({std::abs(r.lhs), std::abs(r.rhs), 1.0});
    return r;
}

// ---- residues ----

double residue(const std::function<double(const Vec<4>&)>& g, int dim, int order) {
    if (dim < 2 || dim > 4) throw std::invalid_argument("residue: dimension must be 2, 3 or 4");
    Rng rng(0x5eed);
    std::vector<Vec<4>> pts;
    for (int s = 0; s < 8; ++s) {
        Vec<4> y{};
        double n2 = 0.0;
        for (int a = 0; a < dim; ++a) {
            y[a] = rng.uniform(-1.0, 1.0);
            n2 += y[a] * y[a];
        }
        pts.push_back(y / std::sqrt(n2));
    }
    double gmax = 0.0;
    std::vector<double> base;
    for (const auto& y : pts) {
        base.push_back(g(y));
        gmax = std::max(gmax, std::abs(base.back()));
    }
    for (std::size_t s = 0; s < pts.size(); ++s) {
        if (std::abs(base[s]) <= 1e-8 * gmax) continue;
        for (double lam : {0.5, 2.0, 3.0}) {
            const double dev = std::abs(g(lam * pts[s]) - std::pow(lam, -dim) * base[s]) / std::abs(base[s]);
            if (dev > 1e-8)
                throw std::invalid_argument("residue: evaluator is not homogeneous of degree -" + std::to_string(dim));
        }
    }
    const auto rule = unit_sphere_rule(dim, order);
    double sum = 0.0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) sum += rule.weights[q] * g(rule.nodes[q]);
    return sum;
}

double avm0_residual(const KernelSet3& k, int i, const HomogeneousFunction& m, const SphereRule& rule) {
    check_index(i);
    if (!m.value || !m.gradient) throw std::invalid_argument("avm0_residual: evaluator needs value and gradient");
    const Vec3& v = k.velocity().value();
    const Point4 w{1.0, v[0], v[1], v[2]};
    double sum = 0.0;
    for (const auto& n : rule.nodes()) {
        const Point4 p = make_point(1.0, n.omega);
        const auto a = k.a(p);
        const Point4 gm = m.gradient(p);
        const double mv = m.value(p);
        // d_i m - T(m a_i^0) with T a^0 = -a^1
        sum += n.weight * (gm[i] - dot(w, gm) * a.a0[i] + mv * a.a1[i]);
    }
    return sum;
}

} // namespace lwvm
