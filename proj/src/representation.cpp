#include "lwvm/representation.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "lwvm/parallel.hpp"

namespace lwvm {

namespace {

constexpr double kPi = std::numbers::pi;

// (J^T d)_b = sum_k J[k][b] d_k
Vec3 jt(const Mat3& j, const Vec3& d) {
    Vec3 r{};
    for (int b = 0; b < 3; ++b)
        for (int k = 0; k < 3; ++k) r[b] += j[k][b] * d[k];
    return r;
}

struct TimeNode {
    double s;
    double w;
    bool near;
};

std::vector<TimeNode> panel(double a, double b, int order, bool near) {
    std::vector<TimeNode> out;
    if (!(b > a)) return out;
    const auto& gl = gauss_legendre(order);
    const double half = 0.5 * (b - a), mid = 0.5 * (b + a);
    for (int q = 0; q < order; ++q) out.push_back({mid + half * gl.nodes[q], half * gl.weights[q], near});
    return out;
}

struct XiLocal {
    Vec3 xi;
    SubluminalVelocity v;
    double m;
    Vec3 gm;
    Mat3 hm;
    Mat3 j;
    std::array<Mat3, 3> h;
};

XiLocal local(const MomentSpec& spec, const Vec3& xi, bool second) {
    XiLocal l{xi, relativistic_velocity(xi), spec.value(xi), spec.gradient(xi), {}, velocity_jacobian(xi), {}};
    if (second) {
        l.hm = spec.hessian(xi);
        l.h = velocity_hessian(xi);
    }
    return l;
}

// T K = (d_t + v . grad_x) K at fixed xi
Vec3 stream_k(const ForceField& k, double t, const Vec3& y, const Vec3& xi, const Vec3& v) {
    const double d = 1e-4;
    if (t >= d) return (k(t + d, y + d * v, xi) - k(t - d, y - d * v, xi)) / (2.0 * d);
    return (k(t + d, y + d * v, xi) - k(t, y, xi)) / d;
}

void add(Mat4& a, const Mat4& b) {
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) a[i][j] += b[i][j];
}

} // namespace

FieldRepresentation::FieldRepresentation(const PhaseDensity& f, MomentumQuadrature xi_rule,
                                         RepresentationOrders orders, const DeltaCoefficientTable* delta)
    : f_(f), xi_rule_(std::move(xi_rule)), orders_(orders), sphere_(orders.polar, orders.azimuth), delta_(delta) {
    if (orders.time < 1 || orders.polar < 1 || orders.azimuth < 1)
        throw std::invalid_argument("FieldRepresentation: orders must be positive");
}

bool FieldRepresentation::xi_inactive(const Vec3& xi, double t) const {
    return norm(xi) >= f_.initial().xi_radius() + t * f_.force().bound(t);
}

double FieldRepresentation::moment_potential(const MomentSpec& m, double t, const Vec3& x) const {
    if (!(t > 0.0)) return 0.0;
    const ConeQuadrature cq(t, orders_.time, sphere_);
    const auto nodes = xi_rule_.nodes();
    std::vector<double> part(nodes.size(), 0.0);
    parallel_for(nodes.size(), [&](std::size_t q) {
        const Vec3& xi = nodes[q].xi;
        if (xi_inactive(xi, t)) return;
        const double mv = m.value(xi);
        if (mv == 0.0) return;
        double acc = 0.0;
        for (const auto& c : cq.nodes()) acc += c.y_weight * f_.evaluate(t - c.s, x - c.s * c.omega, xi).value;
        part[q] = nodes[q].weight * mv * acc;
    });
    double sum = 0.0;
    for (double p : part) sum += p;
    return sum;
}

FirstDerivative FieldRepresentation::first(const MomentSpec& m, double t, const Vec3& x) const {
    if (!(t > 0.0)) throw std::domain_error("field_derivative_first: t must be positive");
    const auto nodes = xi_rule_.nodes();
    const auto tn = panel(0.0, t, orders_.time, false);
    const bool active = f_.force().bound(t) > 0.0;
    std::vector<FirstDerivative> part(nodes.size());

    parallel_for(nodes.size(), [&](std::size_t q) {
        const Vec3& xi = nodes[q].xi;
        if (xi_inactive(xi, t)) return;
        const auto l = local(m, xi, false);
        if (l.m == 0.0 && l.gm[0] == 0.0 && l.gm[1] == 0.0 && l.gm[2] == 0.0) return;
        FirstDerivative& d = part[q];
        for (const auto& sn : sphere_.nodes()) {
            const auto jet = cone_jet(l.v, sn.omega);
            std::array<Vec3, 4> g;
            for (int j = 0; j < 4; ++j) g[j] = jet.a0[j] * l.gm + l.m * jt(l.j, jet.dv_a0[j]);
            for (const auto& tnode : tn) {
                const double s = tnode.s;
                const Vec3 y = x - s * sn.omega;
                const auto fv = f_.evaluate(t - s, y, xi);
                if (fv.value == 0.0) continue;
                const double yw = s / (4.0 * kPi) * tnode.w * sn.weight * fv.value;
                for (int j = 0; j < 4; ++j) d.streaming[j] += yw * l.m * jet.a1[j] / s;
                if (active) {
                    const Vec3 k = f_.force()(t - s, y, xi);
                    for (int j = 0; j < 4; ++j) d.force[j] -= yw * dot(g[j], k);
                }
            }
            const double fin = f_.initial().value(x - t * sn.omega, xi);
            if (fin != 0.0)
                for (int j = 0; j < 4; ++j) d.initial[j] += sn.weight * t / (4.0 * kPi) * l.m * jet.a0[j] * fin;
        }
        for (int j = 0; j < 4; ++j) {
            d.force[j] *= nodes[q].weight;
            d.streaming[j] *= nodes[q].weight;
            d.initial[j] *= nodes[q].weight;
        }
    });

    FirstDerivative out;
    for (const auto& d : part)
        for (int j = 0; j < 4; ++j) {
            out.force[j] += d.force[j];
            out.streaming[j] += d.streaming[j];
            out.initial[j] += d.initial[j];
        }
    for (int j = 0; j < 4; ++j) out.total[j] = out.force[j] + out.streaming[j] + out.initial[j];
    return out;
}

SecondDerivative FieldRepresentation::second(const MomentSpec& m, double t, const Vec3& x, double grad_f_norm,
                                             bool direct_s14) const {
    if (!(t > 0.0)) throw std::domain_error("field_derivative_second: t must be positive");
    if (!(grad_f_norm > 0.0)) throw std::invalid_argument("field_derivative_second: gradient norm must be positive");
    const double theta = std::min(1.0 / grad_f_norm, t);
    auto tn = panel(0.0, theta, orders_.time, true);
    const auto far = panel(theta, t, orders_.time, false);
    tn.insert(tn.end(), far.begin(), far.end());

    const auto nodes = xi_rule_.nodes();
    const ForceField& force = f_.force();
    const bool active = force.bound(t) > 0.0;
    const DeltaCoefficientTable& table = delta_ ? *delta_ : default_delta_table();
    std::vector<SecondDerivative> part(nodes.size());

    parallel_for(nodes.size(), [&](std::size_t q) {
        const Vec3& xi = nodes[q].xi;
        if (xi_inactive(xi, t)) return;
        const auto l = local(m, xi, true);
        const Vec3& v = l.v.value();
        SecondDerivative& d = part[q];

        const double f_here = f_.evaluate(t, x, xi).value;
        if (f_here != 0.0) {
            const Mat4 c = table.get(v);
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) d.s3[i][j] += l.m * c[i][j] * f_here;
        }
        std::vector<double> f0(tn.size(), 0.0);
        for (std::size_t n = 0; n < tn.size(); ++n)
            if (tn[n].near) f0[n] = f_.evaluate(t - tn[n].s, x, xi).value;

        for (const auto& sn : sphere_.nodes()) {
            const Vec3& w = sn.omega;
            const auto jet = cone_jet(l.v, w);
            // kernel combinations for all (i, j)
            std::array<std::array<Vec3, 4>, 4> g0, g1;
            std::array<std::array<Mat3, 4>, 4> h0{};
            std::array<std::array<Vec3, 4>, 4> p{}, qk{};
            std::array<std::array<Mat3, 4>, 4> dp{};
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) {
                    const Vec3 d0 = jt(l.j, jet.dv_b0[i][j]);
                    g0[i][j] = jet.b0[i][j] * l.gm + l.m * d0;
                    g1[i][j] = jet.b1[i][j] * l.gm + l.m * jt(l.j, jet.dv_b1[i][j]);
                    if (!active) continue;
                    Mat3& hh = h0[i][j];
                    for (int a = 0; a < 3; ++a)
                        for (int b = 0; b < 3; ++b) {
                            double s = jet.b0[i][j] * l.hm[a][b] + l.gm[a] * d0[b] + d0[a] * l.gm[b];
                            double inner = 0.0;
                            for (int k = 0; k < 3; ++k) {
                                inner += jet.dv_b0[i][j][k] * l.h[k][a][b];
                                for (int kk = 0; kk < 3; ++kk)
                                    inner += l.j[k][a] * jet.dvv_b0[i][j][k][kk] * l.j[kk][b];
                            }
                            hh[a][b] = s + l.m * inner;
                        }
                    // e_k = b0 a0_k, h_k = d_k b0 + a1 terms, k spatial
                    Vec3 e{}, hk{};
                    std::array<Vec3, 3> de{};  // de[k][l] = d e_k / d v_l
                    for (int k = 0; k < 3; ++k) {
                        const int mu = k + 1;
                        e[k] = jet.b0[i][j] * jet.a0[mu];
                        const double dkb0 = jet.grad_a0[i][mu] * jet.a0[j] + jet.a0[i] * jet.grad_a0[j][mu];
                        hk[k] = dkb0 + (jet.a1[i] * jet.a0[j] + jet.a0[i] * jet.a1[j]) * jet.a0[mu] +
                                jet.b0[i][j] * jet.a1[mu];
                        for (int ll = 0; ll < 3; ++ll)
                            de[k][ll] = jet.dv_b0[i][j][ll] * jet.a0[mu] + jet.b0[i][j] * jet.dv_a0[mu][ll];
                    }
                    for (int a = 0; a < 3; ++a) {
                        double pa = 0.0, qa = 0.0;
                        for (int k = 0; k < 3; ++k) {
                            pa += l.j[k][a] * e[k];
                            qa += l.j[k][a] * hk[k];
                        }
                        p[i][j][a] = l.m * pa;
                        qk[i][j][a] = l.m * qa;
                        for (int b = 0; b < 3; ++b) {
                            double s = l.gm[b] * pa;
                            for (int k = 0; k < 3; ++k) {
                                s += l.m * l.h[k][a][b] * e[k];
                                double c = 0.0;
                                for (int ll = 0; ll < 3; ++ll) c += de[k][ll] * l.j[ll][b];
                                s += l.m * l.j[k][a] * c;
                            }
                            dp[i][j][a][b] = s;
                        }
                    }
                }

            for (std::size_t n = 0; n < tn.size(); ++n) {
                const double s = tn[n].s;
                const double tp = t - s;
                const Vec3 y = x - s * w;
                const double fv = f_.evaluate(tp, y, xi).value;
                const double yw = s / (4.0 * kPi) * tn[n].w * sn.weight;
                const double dv = tn[n].near ? fv - f0[n] : fv;
                if (dv != 0.0) {
                    const double c = yw * l.m * dv / (s * s);
                    for (int i = 0; i < 4; ++i)
                        for (int j = 0; j < 4; ++j) d.s3[i][j] += c * jet.b2[i][j];
                }
                if (fv == 0.0 || !active) continue;
                const Vec3 k = force(tp, y, xi);
                const Vec3 tk = stream_k(force, tp, y, xi, v);
                const Mat3 dk = force.xi_jacobian(tp, y, xi);
                Vec3 kgk{};  // (K . grad_xi) K
                for (int a = 0; a < 3; ++a)
                    for (int b = 0; b < 3; ++b) kgk[a] += dk[a][b] * k[b];
                const Vec3 s13v = tk - kgk;
                const double c = yw * fv;
                PhaseGradient gf;
                Mat3 dxk{};  // d K_a / d x_k
                if (direct_s14) {
                    gf = f_.gradient(tp, y, xi);
                    const double hx = 1e-4;
                    for (int kk = 0; kk < 3; ++kk) {
                        Vec3 e{};
                        e[kk] = hx;
                        const Vec3 g = (force(tp, y + e, xi) - force(tp, y - e, xi)) / (2.0 * hx);
                        for (int a = 0; a < 3; ++a) dxk[a][kk] = g[a];
                    }
                }
                for (int i = 0; i < 4; ++i)
                    for (int j = 0; j < 4; ++j) {
                        double kk2 = 0.0;
                        for (int a = 0; a < 3; ++a)
                            for (int b = 0; b < 3; ++b) kk2 += h0[i][j][a][b] * k[a] * k[b];
                        d.s12[i][j] += c * kk2;
                        d.s13[i][j] -= c * dot(g0[i][j], s13v);
                        d.s2[i][j] -= c * dot(g1[i][j], k) / s;
                        double div = 0.0;  // grad_xi(P_a K_a) . K
                        for (int b = 0; b < 3; ++b) {
                            double gb = 0.0;
                            for (int a = 0; a < 3; ++a) gb += dp[i][j][a][b] * k[a] + p[i][j][a] * dk[a][b];
                            div += gb * k[b];
                        }
                        d.s14[i][j] -= c * (dot(p[i][j], tk) + dot(qk[i][j], k) / s - div);
                        if (direct_s14) {
                            double acc = 0.0;
                            for (int kk = 0; kk < 3; ++kk)
                                for (int a = 0; a < 3; ++a)
                                    acc += l.j[kk][a] * (dxk[a][kk] * fv + k[a] * gf.dx[kk]);
                            d.s14_direct[i][j] -= yw * l.m * jet.b0[i][j] * acc;
                        }
                    }
            }

            // layer terms at s = t
            const Vec3 y0 = x - t * w;
            const double fin = f_.initial().value(y0, xi);
            if (fin != 0.0) {
                const PhaseGradient gin = f_.initial().gradient(y0, xi);
                const Vec3 kin = active ? force(0.0, y0, xi) : Vec3{};
                const double sw = sn.weight / (4.0 * kPi);
                const double stream = dot(v - w, gin.dx);
                for (int i = 0; i < 4; ++i)
                    for (int j = 0; j < 4; ++j) {
                        d.s11[i][j] += sw * (l.m * jet.b0[i][j] * (fin + t * stream) - t * dot(g0[i][j], kin) * fin);
                        d.s2[i][j] += sw * l.m * jet.b1[i][j] * fin;
                        if (active) d.s14[i][j] -= sw * t * dot(p[i][j], kin) * fin;
                        if (active && direct_s14) d.s14_direct[i][j] -= sw * t * dot(p[i][j], kin) * fin;
                    }
            }
        }
        const double wq = nodes[q].weight;
        for (Mat4* mat : {&d.s11, &d.s12, &d.s13, &d.s14, &d.s14_direct, &d.s2, &d.s3})
            for (auto& row : *mat)
                for (double& z : row) z *= wq;
    });

    SecondDerivative out;
    out.theta = theta;
    out.has_direct = direct_s14;
    for (const auto& d : part) {
        add(out.s11, d.s11);
        add(out.s12, d.s12);
        add(out.s13, d.s13);
        add(out.s14, d.s14);
        add(out.s14_direct, d.s14_direct);
        add(out.s2, d.s2);
        add(out.s3, d.s3);
    }
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            out.s1[i][j] = out.s11[i][j] + out.s12[i][j] + out.s13[i][j] + out.s14[i][j];
            out.total[i][j] = out.s1[i][j] + out.s2[i][j] + out.s3[i][j];
        }
    return out;
}

} // namespace lwvm
