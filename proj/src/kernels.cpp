#include "lwvm/kernels.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "lwvm/detail/jet.hpp"
#include "lwvm/random.hpp"

namespace lwvm {

using detail::Jet3;

template <int Dim>
BasicVelocity<Dim>::BasicVelocity(const Vec<Dim>& v) : v_(v), speed_(norm(v)) {
    if (!all_finite(v)) throw std::invalid_argument("velocity: non-finite component");
    if (!(speed_ < 1.0)) throw std::invalid_argument("velocity: |v| must be < 1");
}

SubluminalVelocity relativistic_velocity(const Vec3& xi) {
    if (!all_finite(xi)) throw std::invalid_argument("relativistic_velocity: non-finite momentum");
    const double gamma = std::sqrt(1.0 + dot(xi, xi));
    Vec3 v = xi / gamma;
    // for |xi| beyond ~1e8 the quotient rounds to 1; keep it strictly subluminal
    const double s = norm(v);
    if (s >= 1.0) v *= std::nextafter(1.0, 0.0) / s;
    return SubluminalVelocity(v);
}

Mat3 velocity_jacobian(const Vec3& xi) {
    const double gamma = std::sqrt(1.0 + dot(xi, xi));
    const Vec3 v = xi / gamma;
    Mat3 J{};
    for (int k = 0; k < 3; ++k)
        for (int a = 0; a < 3; ++a) J[k][a] = ((k == a ? 1.0 : 0.0) - v[k] * v[a]) / gamma;
    return J;
}

std::array<Mat3, 3> velocity_hessian(const Vec3& xi) {
    const double g2 = 1.0 + dot(xi, xi);
    const Vec3 v = xi / std::sqrt(g2);
    std::array<Mat3, 3> H{};
    for (int k = 0; k < 3; ++k)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                const double s = (k == a ? v[b] : 0.0) + (k == b ? v[a] : 0.0) + (a == b ? v[k] : 0.0);
                H[k][a][b] = -(s - 3.0 * v[k] * v[a] * v[b]) / g2;
            }
    return H;
}

CutoffProfile::CutoffProfile(double speed) : speed_(speed) {
    if (!(speed >= 0.0 && speed < 1.0)) throw std::invalid_argument("CutoffProfile: speed must lie in [0, 1)");
    trivial_ = speed == 0.0;
    if (!trivial_) {
        c1_ = 0.5 + 0.5 / speed;
        c2_ = 0.5 * (c1_ + 1.0 / speed);
    } else {
        c1_ = c2_ = std::numeric_limits<double>::infinity();
    }
}

double CutoffProfile::value(double r) const {
    if (trivial_ || r <= c1_) return 1.0;
    if (r >= c2_) return 0.0;
    const double s = (r - c1_) / (c2_ - c1_);
    return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

std::array<double, 4> CutoffProfile::derivatives(double r) const {
    if (trivial_ || r <= c1_) return {1.0, 0.0, 0.0, 0.0};
    if (r >= c2_) return {0.0, 0.0, 0.0, 0.0};
    const double L = 1.0 / (c2_ - c1_);
    const double s = (r - c1_) * L;
    const double v = 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
    const double d1 = -30.0 * s * s * (1.0 - s) * (1.0 - s);
    const double d2 = -(60.0 * s - 180.0 * s * s + 120.0 * s * s * s);
    const double d3 = -(60.0 - 360.0 * s + 360.0 * s * s);
    return {v, d1 * L, d2 * L * L, d3 * L * L * L};
}

double CutoffProfile::speed_derivative(double r) const {
    if (trivial_ || r <= c1_ || r >= c2_) return 0.0;
    const double q = speed_;
    const double s = (r - c1_) / (c2_ - c1_);
    const double ds_dq = 4.0 * (r - 1.0) / ((1.0 - q) * (1.0 - q));
    return -30.0 * s * s * (1.0 - s) * (1.0 - s) * ds_dq;
}

template <int Dim>
KernelSet<Dim>::KernelSet(const Vec<Dim>& v) : KernelSet(BasicVelocity<Dim>(v)) {}

template <int Dim>
KernelSet<Dim>::KernelSet(const BasicVelocity<Dim>& v) : v_(v), chi_(v.speed()) {}

template <int Dim>
void KernelSet<Dim>::check_point(const Point& p, bool need_positive_time) const {
    if (!all_finite(p)) throw std::domain_error("kernel: non-finite point");
    if (need_positive_time && !(p[0] > 0.0)) throw std::domain_error("kernel: t must be > 0");
    double xv = 0.0, xx = 0.0;
    for (int i = 0; i < Dim; ++i) {
        xv += p[i + 1] * v_[i];
        xx += p[i + 1] * p[i + 1];
    }
    if (std::abs(p[0] - xv) <= 1e-9 * (std::abs(p[0]) + std::sqrt(xx)))
        throw std::domain_error("kernel: point on the singular plane x.v = t");
}

template <int Dim>
std::array<double, KernelSet<Dim>::N> KernelSet<Dim>::alpha(const Point& p) const {
    check_point(p, false);
    double xv = 0.0;
    for (int i = 0; i < Dim; ++i) xv += p[i + 1] * v_[i];
    const double g = 1.0 / (p[0] - xv);
    std::array<double, N> out{};
    out[0] = p[0] * g;
    for (int i = 1; i < N; ++i) out[i] = -p[i] * g;
    return out;
}

namespace {

// a_j^0 as third-order jets in (t, x).
template <int Dim>
std::array<Jet3<Dim + 1>, Dim + 1> a0_jets(const SpacePoint<Dim>& p, const Vec<Dim>& v, const CutoffProfile& chi) {
    constexpr int N = Dim + 1;
    using J = Jet3<N>;
    std::array<double, N> d{};
    d[0] = 1.0;
    double D = p[0];
    for (int i = 0; i < Dim; ++i) {
        d[i + 1] = -v[i];
        D -= p[i + 1] * v[i];
    }
    const J g = detail::reciprocal(J::affine(D, d));

    double xx = 0.0;
    for (int i = 1; i < N; ++i) xx += p[i] * p[i];
    const double r = std::sqrt(xx) / p[0];
    J c = J::constant(1.0);
    if (!chi.trivial() && r > chi.c1()) {
        if (r >= chi.c2()) {
            c = J::constant(0.0);
        } else {
            J rho2;
            rho2.v = xx;
            for (int i = 1; i < N; ++i) {
                rho2.g[i] = 2.0 * p[i];
                rho2.h[J::idx(i, i)] = 2.0;
            }
            std::array<double, N> e0{};
            e0[0] = 1.0;
            const J rr = detail::sqrt(rho2) * detail::reciprocal(J::affine(p[0], e0));
            const auto cd = chi.derivatives(rr.v);
            c = detail::compose(rr, cd[0], cd[1], cd[2], cd[3]);
        }
    }

    std::array<J, N> out;
    for (int j = 0; j < N; ++j) {
        const double s = j == 0 ? 1.0 : -1.0;
        std::array<double, N> lin{};
        lin[j] = s;
        out[j] = J::affine(s * p[j], lin) * g * c;
    }
    return out;
}

} // namespace

template <int Dim>
AKernels<Dim> KernelSet<Dim>::a(const Point& p) const {
    check_point(p, true);
    using J = Jet3<N>;
    const auto a0 = a0_jets<Dim>(p, v_.value(), chi_);
    std::array<double, N> w{};
    w[0] = 1.0;
    for (int i = 0; i < Dim; ++i) w[i + 1] = v_[i];

    AKernels<Dim> out;
    for (int j = 0; j < N; ++j) {
        out.a0[j] = a0[j].v;
        double a1 = 0.0;
        for (int mu = 0; mu < N; ++mu) {
            out.grad_a0[j][mu] = a0[j].g[mu];
            a1 -= w[mu] * a0[j].g[mu];
        }
        out.a1[j] = a1;
        for (int nu = 0; nu < N; ++nu) {
            double s = 0.0;
            for (int mu = 0; mu < N; ++mu) s -= w[mu] * a0[j].h[J::idx(mu, nu)];
            out.grad_a1[j][nu] = s;
        }
    }
    return out;
}

template <int Dim>
BKernels<Dim> KernelSet<Dim>::b(const Point& p) const {
    check_point(p, true);
    using J = Jet3<N>;
    const auto a0 = a0_jets<Dim>(p, v_.value(), chi_);
    std::array<double, N> w{};
    w[0] = 1.0;
    for (int i = 0; i < Dim; ++i) w[i + 1] = v_[i];

    // a1 = -w.grad a0 with its first and second derivatives; T a1 with its gradient.
    std::array<double, N> A1{}, TA1{};
    std::array<std::array<double, N>, N> dA1{}, dTA1{};
    std::array<SqMat<N>, N> ddA1{};
    for (int j = 0; j < N; ++j) {
        for (int mu = 0; mu < N; ++mu) A1[j] -= w[mu] * a0[j].g[mu];
        for (int nu = 0; nu < N; ++nu)
            for (int mu = 0; mu < N; ++mu) dA1[j][nu] -= w[mu] * a0[j].h[J::idx(mu, nu)];
        for (int nu = 0; nu < N; ++nu)
            for (int la = 0; la < N; ++la)
                for (int mu = 0; mu < N; ++mu) ddA1[j][nu][la] -= w[mu] * a0[j].k[J::idx(mu, nu, la)];
        for (int nu = 0; nu < N; ++nu) TA1[j] += w[nu] * dA1[j][nu];
        for (int la = 0; la < N; ++la)
            for (int nu = 0; nu < N; ++nu) dTA1[j][la] += w[nu] * ddA1[j][nu][la];
    }

    BKernels<Dim> out;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            const auto& ai = a0[i];
            const auto& aj = a0[j];
            out.b0[i][j] = ai.v * aj.v;
            out.b1[i][j] = aj.g[i] + A1[i] * aj.v + 2.0 * ai.v * A1[j];
            out.b2[i][j] = dA1[j][i] + A1[i] * A1[j] - ai.v * TA1[j];
            for (int mu = 0; mu < N; ++mu) {
                out.grad_b0[i][j][mu] = ai.g[mu] * aj.v + ai.v * aj.g[mu];
                out.grad_b1[i][j][mu] = aj.h[J::idx(i, mu)] + dA1[i][mu] * aj.v + A1[i] * aj.g[mu] +
                                        2.0 * (ai.g[mu] * A1[j] + ai.v * dA1[j][mu]);
                out.grad_b2[i][j][mu] = ddA1[j][i][mu] + dA1[i][mu] * A1[j] + A1[i] * dA1[j][mu] -
                                        ai.g[mu] * TA1[j] - ai.v * dTA1[j][mu];
            }
        }
    return out;
}

template <int Dim>
std::array<Vec<Dim>, KernelSet<Dim>::N> KernelSet<Dim>::a0_velocity_gradient(const Point& p) const {
    check_point(p, true);
    double xv = 0.0, xx = 0.0;
    for (int i = 0; i < Dim; ++i) {
        xv += p[i + 1] * v_[i];
        xx += p[i + 1] * p[i + 1];
    }
    const double g = 1.0 / (p[0] - xv);
    const double r = std::sqrt(xx) / p[0];
    const double chi = chi_.value(r);
    const double chi_q = chi_.speed_derivative(r);
    std::array<Vec<Dim>, N> out{};
    for (int j = 0; j < N; ++j) {
        const double Nj = j == 0 ? p[0] : -p[j];
        const double alpha = Nj * g;
        for (int k = 0; k < Dim; ++k) {
            double d = Nj * p[k + 1] * g * g * chi;
            if (chi_q != 0.0) d += alpha * chi_q * v_[k] / v_.speed();
            out[j][k] = d;
        }
    }
    return out;
}

template class BasicVelocity<2>;
template class BasicVelocity<3>;
template class KernelSet<2>;
template class KernelSet<3>;

namespace {

struct ConeBasics {
    double g, eps;
    std::array<double, 4> N, d, s;
};

ConeBasics cone_basics(const SubluminalVelocity& v, const Vec3& omega) {
    ConeBasics c;
    c.g = 1.0 / (1.0 - dot(omega, v.value()));
    c.eps = 1.0 - dot(v.value(), v.value());
    c.N = {1.0, -omega[0], -omega[1], -omega[2]};
    c.d = {1.0, -v[0], -v[1], -v[2]};
    c.s = {1.0, -1.0, -1.0, -1.0};
    return c;
}

void fill_values(const ConeBasics& c, ConeValues& out) {
    const double g = c.g, g2 = g * g, g3 = g2 * g, g4 = g2 * g2, e = c.eps;
    for (int j = 0; j < 4; ++j) {
        out.a0[j] = c.N[j] * g;
        out.a1[j] = -c.d[j] * g + e * c.N[j] * g2;
    }
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const double NN = c.N[i] * c.N[j];
            const double Nd = c.N[j] * c.d[i] + c.N[i] * c.d[j];
            const double diag = i == j ? c.s[j] : 0.0;
            out.b0[i][j] = NN * g2;
            out.b1[i][j] = diag * g - 2.0 * Nd * g2 + 3.0 * e * NN * g3;
            out.b2[i][j] = 2.0 * c.d[i] * c.d[j] * g2 + e * diag * g2 - 3.0 * e * Nd * g3 + 3.0 * e * e * NN * g4;
        }
}

} // namespace

ConeValues cone_values(const SubluminalVelocity& v, const Vec3& omega) {
    ConeValues out;
    fill_values(cone_basics(v, omega), out);
    return out;
}

ConeJet cone_jet(const SubluminalVelocity& v, const Vec3& omega) {
    const auto c = cone_basics(v, omega);
    ConeValues vals;
    fill_values(c, vals);
    ConeJet out;
    out.a0 = vals.a0;
    out.a1 = vals.a1;
    out.b0 = vals.b0;
    out.b1 = vals.b1;
    out.b2 = vals.b2;
    const double g = c.g, g2 = g * g, g3 = g2 * g, g4 = g2 * g2, e = c.eps;
    for (int j = 0; j < 4; ++j) {
        for (int mu = 0; mu < 4; ++mu) out.grad_a0[j][mu] = (j == mu ? c.s[j] : 0.0) * g - c.N[j] * c.d[mu] * g2;
        for (int k = 0; k < 3; ++k) out.dv_a0[j][k] = c.N[j] * omega[k] * g2;
    }
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const double NN = c.N[i] * c.N[j];
            const double Nd = c.N[j] * c.d[i] + c.N[i] * c.d[j];
            const double diag = i == j ? c.s[j] : 0.0;
            for (int k = 0; k < 3; ++k) {
                // d d_i / d v_k = -delta_{i, k+1}
                const double dd_i = i == k + 1 ? -1.0 : 0.0;
                const double dd_j = j == k + 1 ? -1.0 : 0.0;
                out.dv_b0[i][j][k] = 2.0 * NN * omega[k] * g3;
                out.dv_b1[i][j][k] = diag * omega[k] * g2 - 2.0 * (c.N[j] * dd_i + c.N[i] * dd_j) * g2 -
                                     4.0 * Nd * omega[k] * g3 - 6.0 * v[k] * NN * g3 + 9.0 * e * NN * omega[k] * g4;
                for (int l = 0; l < 3; ++l) out.dvv_b0[i][j][k][l] = 6.0 * NN * omega[k] * omega[l] * g4;
            }
        }
    return out;
}

double homogeneity_check(const HomogeneousFunction& g, std::span<const Point4> samples,
                         std::span<const double> lambdas) {
    std::vector<double> base(samples.size());
    double gmax = 0.0;
    for (std::size_t s = 0; s < samples.size(); ++s) {
        base[s] = g.value(samples[s]);
        gmax = std::max(gmax, std::abs(base[s]));
    }
    double dev = 0.0;
    for (std::size_t s = 0; s < samples.size(); ++s) {
        if (std::abs(base[s]) < 1e-8 * gmax || base[s] == 0.0) continue;
        for (double lam : lambdas) {
            const double scaled = g.value(lam * samples[s]);
            dev = std::max(dev, std::abs(scaled - std::pow(lam, g.degree) * base[s]) / std::abs(base[s]));
        }
    }
    return dev;
}

double euler_residual(const HomogeneousFunction& g, const Point4& p) {
    if (!g.gradient) throw std::invalid_argument("euler_residual: evaluator has no gradient");
    // div(p g) = 4 g + p . grad g
    return std::abs(dot(p, g.gradient(p)) - g.degree * g.value(p));
}

double sphere_mean_zero(const KernelSet3& k, int i, int j, const SphereRule& rule) {
    if (i < 0 || i > 3 || j < 0 || j > 3) throw std::out_of_range("sphere_mean_zero: index out of range");
    double sum = 0.0;
    for (const auto& n : rule.nodes()) sum += n.weight * cone_values(k.velocity(), n.omega).b2[i][j];
    return sum;
}

double sphere_mean_zero(const KernelSet3& k, int i, int j, int n_theta, int n_phi) {
    return sphere_mean_zero(k, i, j, SphereRule(n_theta, n_phi));
}

double disk_weighted_integral(const std::function<double(const Vec2&)>& f, int n_radial, int n_phi) {
    // |y| = sin(theta), mu = cos(theta): dy / sqrt(1 - |y|^2) = dmu dphi
    const auto& gl = gauss_legendre(n_radial);
    const double dphi = 2.0 * std::numbers::pi / n_phi;
    double sum = 0.0;
    for (int a = 0; a < n_radial; ++a) {
        const double mu = 0.5 + 0.5 * gl.nodes[a];
        const double rho = std::sqrt(std::max(0.0, 1.0 - mu * mu));
        double ring = 0.0;
        for (int b = 0; b < n_phi; ++b) {
            const double phi = (b + 0.5) * dphi;
            ring += f(Vec2{rho * std::cos(phi), rho * std::sin(phi)});
        }
        sum += 0.5 * gl.weights[a] * ring * dphi;
    }
    return sum;
}

double disk_mean_zero_2d(const KernelSet2& k, int i, int j, int n_radial, int n_phi) {
    if (i < 0 || i > 2 || j < 0 || j > 2) throw std::out_of_range("disk_mean_zero_2d: index out of range");
    return disk_weighted_integral([&](const Vec2& y) { return k.b(SpacePoint<2>{1.0, y[0], y[1]}).b2[i][j]; },
                                  n_radial, n_phi);
}

namespace {

// Sample points in the region where the kernels are nonzero, away from the
// cutoff joins so that central differences see a smooth function.
std::vector<Point4> kernel_samples(const KernelSet3& k, Rng& rng, int count) {
    const double q = k.velocity().speed();
    const double r_max = k.chi().trivial() ? 3.0 : k.chi().c2() + 0.25 * (1.0 / q - k.chi().c2());
    std::vector<Point4> out;
    while (static_cast<int>(out.size()) < count) {
        const double t = rng.uniform(0.5, 2.0);
        const double r = rng.uniform(0.05, r_max);
        if (!k.chi().trivial() && (std::abs(r - k.chi().c1()) < 2e-3 || std::abs(r - k.chi().c2()) < 2e-3)) continue;
        const Vec3 dir = rng.unit_vector();
        out.push_back(make_point(t, (r * t) * dir));
    }
    // always include cone points
    for (int s = 0; s < 2; ++s) out.push_back(make_point(1.0 + s, (1.0 + s) * rng.unit_vector()));
    return out;
}

// Five-point central difference of f along dir with step h. The kernels have large
// higher derivatives inside the cutoff transition, where the three-point
// stencil's truncation error alone exceeds 1e-6 relative.
template <class F>
double central_difference(F&& f, const Point4& p, const Point4& dir, double h) {
    const Point4 e = h * dir;
    return (-f(p + 2.0 * e) + 8.0 * f(p + e) - 8.0 * f(p - e) + f(p - 2.0 * e)) / (12.0 * h);
}

double rel_vec_error(const Point4& fd, const Point4& an) {
    const double scale = max_abs(an);
    if (scale == 0.0) return max_abs(fd) < 1e-9 ? 0.0 : 1.0;
    return max_abs(fd - an) / scale;
}

} // namespace

std::vector<KernelCheckRecord> kernel_self_test(const Vec3& v, unsigned seed, const KernelSelfTestOptions& opt) {
    const KernelSet3 k(v);
    Rng rng(seed);
    const auto samples = kernel_samples(k, rng, opt.samples_per_velocity);
    const std::array<double, 3> lambdas{0.5, 2.0, 7.0};

    struct Family {
        std::string name;
        int degree;
        std::function<double(const Point4&, int, int)> value;
        std::function<Point4(const Point4&, int, int)> grad;
        bool matrix;
    };
    auto pgrad = [](const auto& arr) { return Point4{arr[0], arr[1], arr[2], arr[3]}; };
    const std::vector<Family> families{
        {"a0", 0, [&](const Point4& p, int i, int) { return k.a(p).a0[i]; },
         [&](const Point4& p, int i, int) { return pgrad(k.a(p).grad_a0[i]); }, false},
        {"a1", -1, [&](const Point4& p, int i, int) { return k.a(p).a1[i]; },
         [&](const Point4& p, int i, int) { return pgrad(k.a(p).grad_a1[i]); }, false},
        {"b0", 0, [&](const Point4& p, int i, int j) { return k.b(p).b0[i][j]; },
         [&](const Point4& p, int i, int j) { return pgrad(k.b(p).grad_b0[i][j]); }, true},
        {"b1", -1, [&](const Point4& p, int i, int j) { return k.b(p).b1[i][j]; },
         [&](const Point4& p, int i, int j) { return pgrad(k.b(p).grad_b1[i][j]); }, true},
        {"b2", -2, [&](const Point4& p, int i, int j) { return k.b(p).b2[i][j]; },
         [&](const Point4& p, int i, int j) { return pgrad(k.b(p).grad_b2[i][j]); }, true},
    };

    std::vector<KernelCheckRecord> records;
    for (const auto& fam : families) {
        double hom = 0.0, euler = 0.0, grad = 0.0;
        const int jmax = fam.matrix ? 4 : 1;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < jmax; ++j) {
                HomogeneousFunction g{fam.degree, [&](const Point4& p) { return fam.value(p, i, j); },
                                      [&](const Point4& p) { return fam.grad(p, i, j); }};
                hom = std::max(hom, homogeneity_check(g, samples, lambdas));
                for (const auto& p : samples) {
                    const Point4 gr = g.gradient(p);
                    euler = std::max(euler, euler_residual(g, p));
                    Point4 fd{};
                    for (int mu = 0; mu < 4; ++mu) {
                        Point4 e{};
                        e[mu] = 1.0;
                        fd[mu] = central_difference([&](const Point4& q) { return g.value(q); }, p, e, opt.fd_step);
                    }
                    grad = std::max(grad, rel_vec_error(fd, gr));
                }
            }
        records.push_back({fam.name, v, "homogeneity", hom, opt.homogeneity_tol});
        records.push_back({fam.name, v, "euler", euler, opt.euler_tol});
        records.push_back({fam.name, v, "fd_gradient", grad, opt.gradient_tol});
    }

    // a1 = -T a0 against a directional difference of a0
    {
        double worst = 0.0;
        Point4 w{1.0, v[0], v[1], v[2]};
        for (const auto& p : samples) {
            const auto ak = k.a(p);
            double scale = 0.0, err = 0.0;
            for (int j = 0; j < 4; ++j) {
                const double ta0 =
                    central_difference([&](const Point4& q) { return k.a(q).a0[j]; }, p, w, opt.fd_step);
                err = std::max(err, std::abs(ak.a1[j] + ta0));
                scale = std::max(scale, std::abs(ak.a1[j]));
            }
            worst = std::max(worst, scale > 0 ? err / scale : err);
        }
        records.push_back({"a1", v, "streaming_identity", worst, opt.gradient_tol});
    }

    // sphere mean zero of b2, relative to sup |b2(1, .)|
    {
        const SphereRule rule(opt.sphere_theta, opt.sphere_phi);
        double worst = 0.0;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                double sup = 0.0;
                for (const auto& n : rule.nodes()) sup = std::max(sup, std::abs(cone_values(k.velocity(), n.omega).b2[i][j]));
                const double m = std::abs(sphere_mean_zero(k, i, j, rule));
                worst = std::max(worst, sup > 0 ? m / sup : m);
            }
        records.push_back({"b2", v, "sphere_mean_zero", worst, opt.mean_zero_tol});
    }

    // b0 symmetry and agreement of the cone fast path with the generic path
    {
        double sym = 0.0, cone = 0.0;
        for (int s = 0; s < 4; ++s) {
            const Vec3 om = rng.unit_vector();
            const auto gb = k.b(make_point(1.0, om));
            const auto cv = cone_values(k.velocity(), om);
            double scale = 1.0;
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) scale = std::max(scale, std::abs(gb.b2[i][j]));
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) {
                    sym = std::max(sym, std::abs(gb.b0[i][j] - gb.b0[j][i]));
                    cone = std::max({cone, std::abs(gb.b0[i][j] - cv.b0[i][j]) / scale,
                                     std::abs(gb.b1[i][j] - cv.b1[i][j]) / scale,
                                     std::abs(gb.b2[i][j] - cv.b2[i][j]) / scale});
                }
        }
        records.push_back({"b0", v, "symmetry", sym, 0.0});
        records.push_back({"cone", v, "fast_path_agreement", cone, 1e-12});
    }
    return records;
}

} // namespace lwvm
