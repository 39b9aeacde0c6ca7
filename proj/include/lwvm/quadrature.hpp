#pragma once

#include <span>
#include <vector>

#include "lwvm/vec.hpp"

namespace lwvm {

/// Gauss-Legendre rule on [-1, 1].
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Cached n-point Gauss-Legendre rule. Thread-safe.
const GaussLegendre& gauss_legendre(int n);

/// Integrate f over [a, b] with an n-point rule.
template <class F>
double integrate_gl(F&& f, double a, double b, int n) {
    const auto& rule = gauss_legendre(n);
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (b + a);
    double sum = 0.0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) sum += rule.weights[q] * f(mid + half * rule.nodes[q]);
    return half * sum;
}

struct SphereNode {
    Vec3 omega;
    double weight;
};

/// Product rule on S^2 (or a polar cap of it): Gauss-Legendre in mu = cos(theta)
/// times the trapezoid rule in azimuth, in a frame whose pole is `pole`.
class SphereRule {
public:
    SphereRule() = default;
    SphereRule(int n_theta, int n_phi);

    /// Full sphere in a rotated frame.
    static SphereRule rotated(const Vec3& pole, int n_theta, int n_phi);
    /// Cap {omega : pole . omega >= mu_lo}.
    static SphereRule cap(const Vec3& pole, double mu_lo, int n_theta, int n_phi);

    std::span<const SphereNode> nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }
    int n_theta() const { return n_theta_; }
    int n_phi() const { return n_phi_; }

    template <class F>
    double integrate(F&& f) const {
        double s = 0.0;
        for (const auto& n : nodes_) s += n.weight * f(n.omega);
        return s;
    }

private:
    SphereRule(const Vec3& pole, double mu_lo, int n_theta, int n_phi);

    int n_theta_ = 0;
    int n_phi_ = 0;
    std::vector<SphereNode> nodes_;
};

/// Orthonormal frame (e1, e2, pole) with the given unit pole.
std::array<Vec3, 3> frame_from_pole(const Vec3& pole);

/// Rule on the unit sphere S^{N-1} of R^N for N = 2, 3, 4. Nodes carry N
/// coordinates padded into a Vec<4>.
struct UnitSphereRule {
    int dim = 0;
    std::vector<Vec<4>> nodes;
    std::vector<double> weights;
};

UnitSphereRule unit_sphere_rule(int dim, int order);

/// Area of S^{N-1}.
double unit_sphere_area(int dim);

/// Node of the cone quadrature: spacetime point (s, s*omega) with the weight
/// of the measure Y(s, dx) ds, i.e. (s / 4 pi) w_s w_omega.
struct ConeNode {
    double s;
    Vec3 omega;
    double y_weight;
};

/// Discretization of the forward light cone {(s, s omega) : 0 < s < horizon}
/// with the measure of the fundamental solution of the wave operator.
class ConeQuadrature {
public:
    ConeQuadrature(double horizon, int time_order, const SphereRule& sphere);

    std::span<const ConeNode> nodes() const { return nodes_; }
    double horizon() const { return horizon_; }
    int time_order() const { return time_order_; }
    const SphereRule& sphere() const { return sphere_; }
    /// Sum of all weights; equals horizon^2 / 2 up to rounding.
    double total_weight() const;

private:
    double horizon_;
    int time_order_;
    SphereRule sphere_;
    std::vector<ConeNode> nodes_;
};

struct MomentumNode {
    Vec3 xi;
    double weight;
};

/// Tensor Gauss-Legendre rule on the box [-half_width, half_width]^3. With
/// blocks > 1 the box is enlarged to blocks x blocks x blocks copies of the
/// base box, each carrying the same base rule (blocks must be odd so that the
/// central copy coincides with the base rule).
class MomentumQuadrature {
public:
    MomentumQuadrature(double half_width, int order, int blocks = 1);

    std::span<const MomentumNode> nodes() const { return nodes_; }
    double half_width() const { return half_width_; }
    int order() const { return order_; }

private:
    double half_width_;
    int order_;
    std::vector<MomentumNode> nodes_;
};

} // namespace lwvm
