#pragma once

#include <array>

#include "lwvm/cone.hpp"
#include "lwvm/fields.hpp"

namespace lwvm {

struct RepresentationOrders {
    int time = 8;      // Gauss-Legendre nodes per time panel
    int polar = 8;     // sphere rule
    int azimuth = 16;
};

struct FirstDerivative {
    std::array<double, 4> total{};
    std::array<double, 4> force{};      // -(grad_xi(m a^0) Y) * (K f)
    std::array<double, 4> streaming{};  // (m a^1 Y) * f
    std::array<double, 4> initial{};    // m (a^0 Y)(t) *_x f^in
};

struct SecondDerivative {
    Mat4 s11{}, s12{}, s13{}, s14{};
    Mat4 s14_direct{};  // un-expanded commutator term, when requested
    bool has_direct = false;
    Mat4 s1{}, s2{}, s3{}, total{};
    double theta = 0.0;
};

/// Derivatives of the moment potentials int m u dxi, u = Y * (1_{t>=0} f),
/// through the division-lemma kernels. f is evaluated along characteristics
/// of f.force(); a zero force gives free streaming.
class FieldRepresentation {
public:
    FieldRepresentation(const PhaseDensity& f, MomentumQuadrature xi_rule, RepresentationOrders orders = {},
                        const DeltaCoefficientTable* delta = nullptr);

    /// int m u dxi at (t, x) by plain cone quadrature.
    double moment_potential(const MomentSpec& m, double t, const Vec3& x) const;

    FirstDerivative first(const MomentSpec& m, double t, const Vec3& x) const;
    double first(const MomentSpec& m, int j, double t, const Vec3& x) const { return first(m, t, x).total.at(j); }

    /// grad_f_norm sets theta_t = min(1 / grad_f_norm, t) for the vp split.
    SecondDerivative second(const MomentSpec& m, double t, const Vec3& x, double grad_f_norm,
                            bool direct_s14 = false) const;

    const RepresentationOrders& orders() const { return orders_; }
    const MomentumQuadrature& xi_rule() const { return xi_rule_; }

private:
    bool xi_inactive(const Vec3& xi, double t) const;

    const PhaseDensity& f_;
    MomentumQuadrature xi_rule_;
    RepresentationOrders orders_;
    SphereRule sphere_;
    const DeltaCoefficientTable* delta_;
};

} // namespace lwvm
