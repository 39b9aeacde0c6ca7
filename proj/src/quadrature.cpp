#include "lwvm/quadrature.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace lwvm {

namespace {

GaussLegendre build_gauss_legendre(int n) {
    GaussLegendre rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0, p1 = x;
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // recompute derivative at the converged node
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = (n == 1) ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

} // namespace

const GaussLegendre& gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
    static std::mutex mutex;
    static std::map<int, std::unique_ptr<GaussLegendre>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[n];
    if (!slot) {
        if (n == 1)
            slot = std::make_unique<GaussLegendre>(GaussLegendre{{0.0}, {2.0}});
        else
            slot = std::make_unique<GaussLegendre>(build_gauss_legendre(n));
    }
    return *slot;
}

std::array<Vec3, 3> frame_from_pole(const Vec3& pole) {
    const double len = norm(pole);
    if (!(len > 0.0)) return {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
    const Vec3 e3 = pole / len;
    // pick the axis least aligned with e3
    Vec3 a{1, 0, 0};
    if (std::abs(e3[1]) < std::abs(e3[0]) && std::abs(e3[1]) <= std::abs(e3[2]))
        a = {0, 1, 0};
    else if (std::abs(e3[2]) < std::abs(e3[0]) && std::abs(e3[2]) < std::abs(e3[1]))
        a = {0, 0, 1};
    Vec3 e1 = a - dot(a, e3) * e3;
    e1 = e1 / norm(e1);
    const Vec3 e2 = cross(e3, e1);
    return {e1, e2, e3};
}

SphereRule::SphereRule(int n_theta, int n_phi) : SphereRule(Vec3{0, 0, 1}, -1.0, n_theta, n_phi) {}

SphereRule SphereRule::rotated(const Vec3& pole, int n_theta, int n_phi) {
    return SphereRule(pole, -1.0, n_theta, n_phi);
}

SphereRule SphereRule::cap(const Vec3& pole, double mu_lo, int n_theta, int n_phi) {
    return SphereRule(pole, std::clamp(mu_lo, -1.0, 1.0), n_theta, n_phi);
}

SphereRule::SphereRule(const Vec3& pole, double mu_lo, int n_theta, int n_phi)
    : n_theta_(n_theta), n_phi_(n_phi) {
    if (n_theta < 1 || n_phi < 1) throw std::invalid_argument("SphereRule: orders must be positive");
    const auto frame = frame_from_pole(pole);
    const auto& gl = gauss_legendre(n_theta);
    const double half = 0.5 * (1.0 - mu_lo);
    const double mid = 0.5 * (1.0 + mu_lo);
    const double dphi = 2.0 * std::numbers::pi / n_phi;
    nodes_.reserve(static_cast<std::size_t>(n_theta) * n_phi);
    for (int a = 0; a < n_theta; ++a) {
        const double mu = mid + half * gl.nodes[a];
        const double sin_theta = std::sqrt(std::max(0.0, 1.0 - mu * mu));
        const double w = half * gl.weights[a] * dphi;
        for (int b = 0; b < n_phi; ++b) {
            const double phi = (b + 0.5) * dphi;
            const double c1 = sin_theta * std::cos(phi);
            const double c2 = sin_theta * std::sin(phi);
            nodes_.push_back({c1 * frame[0] + c2 * frame[1] + mu * frame[2], w});
        }
    }
}

double unit_sphere_area(int dim) {
    switch (dim) {
    case 1: return 2.0;
    case 2: return 2.0 * std::numbers::pi;
    case 3: return 4.0 * std::numbers::pi;
    case 4: return 2.0 * std::numbers::pi * std::numbers::pi;
    default: throw std::invalid_argument("unit_sphere_area: dimension must be 1..4");
    }
}

UnitSphereRule unit_sphere_rule(int dim, int order) {
    UnitSphereRule rule;
    rule.dim = dim;
    if (dim == 2) {
        const int n = 2 * order;
        for (int k = 0; k < n; ++k) {
            const double phi = 2.0 * std::numbers::pi * (k + 0.5) / n;
            rule.nodes.push_back({std::cos(phi), std::sin(phi), 0.0, 0.0});
            rule.weights.push_back(2.0 * std::numbers::pi / n);
        }
    } else if (dim == 3) {
        const SphereRule s(order, 2 * order);
        for (const auto& n : s.nodes()) {
            rule.nodes.push_back({n.omega[0], n.omega[1], n.omega[2], 0.0});
            rule.weights.push_back(n.weight);
        }
    } else if (dim == 4) {
        // omega = (cos psi, sin psi * eta), eta in S^2, measure sin^2 psi dpsi deta
        const auto& gl = gauss_legendre(order);
        const SphereRule s(order, 2 * order);
        const double half = 0.5 * std::numbers::pi;
        for (int a = 0; a < order; ++a) {
            const double psi = half + half * gl.nodes[a];
            const double sp = std::sin(psi);
            const double w = half * gl.weights[a] * sp * sp;
            for (const auto& n : s.nodes()) {
                rule.nodes.push_back({std::cos(psi), sp * n.omega[0], sp * n.omega[1], sp * n.omega[2]});
                rule.weights.push_back(w * n.weight);
            }
        }
    } else {
        throw std::invalid_argument("unit_sphere_rule: dimension must be 2, 3 or 4");
    }
    return rule;
}

ConeQuadrature::ConeQuadrature(double horizon, int time_order, const SphereRule& sphere)
    : horizon_(horizon), time_order_(time_order), sphere_(sphere) {
    if (!(horizon > 0.0)) throw std::invalid_argument("ConeQuadrature: horizon must be positive");
    const auto& gl = gauss_legendre(time_order);
    const double half = 0.5 * horizon;
    nodes_.reserve(gl.nodes.size() * sphere.size());
    for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
        const double s = half + half * gl.nodes[q];
        const double ws = half * gl.weights[q];
        for (const auto& n : sphere.nodes())
            nodes_.push_back({s, n.omega, s / (4.0 * std::numbers::pi) * ws * n.weight});
    }
}

double ConeQuadrature::total_weight() const {
    // pairwise-free but order-fixed accumulation; per-shell partial sums keep rounding small
    double total = 0.0;
    const std::size_t per_shell = sphere_.size();
    for (std::size_t start = 0; start < nodes_.size(); start += per_shell) {
        double shell = 0.0;
        for (std::size_t k = start; k < start + per_shell; ++k) shell += nodes_[k].y_weight;
        total += shell;
    }
    return total;
}

MomentumQuadrature::MomentumQuadrature(double half_width, int order, int blocks)
    : half_width_(half_width), order_(order) {
    if (!(half_width > 0.0)) throw std::invalid_argument("MomentumQuadrature: half width must be positive");
    if (blocks < 1 || blocks % 2 == 0) throw std::invalid_argument("MomentumQuadrature: blocks must be odd");
    const auto& gl = gauss_legendre(order);
    const int nb = blocks / 2;
    std::vector<double> x, w;
    for (int b = -nb; b <= nb; ++b) {
        const double centre = 2.0 * half_width * b;
        for (int q = 0; q < order; ++q) {
            x.push_back(centre + half_width * gl.nodes[q]);
            w.push_back(half_width * gl.weights[q]);
        }
    }
    nodes_.reserve(x.size() * x.size() * x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j)
            for (std::size_t k = 0; k < x.size(); ++k)
                nodes_.push_back({{x[i], x[j], x[k]}, w[i] * w[j] * w[k]});
}

} // namespace lwvm
