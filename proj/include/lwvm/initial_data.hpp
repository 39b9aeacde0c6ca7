#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>

#include "lwvm/transport.hpp"

namespace lwvm {

/// (1 - |y|^2 / R^2)^k on the ball of radius R, zero outside.
class RadialBump {
public:
    RadialBump() = default;
    RadialBump(double radius, int exponent);

    double value(const Vec3& y) const;
    Vec3 gradient(const Vec3& y) const;
    double radius() const { return r_; }
    int exponent() const { return k_; }
    /// Integral over R^3.
    double mass() const;
    /// int_0^u (1 - s^2)^k s^2 ds.
    double partial_moment(double u) const;

private:
    double r_ = 1.0;
    int k_ = 4;
};

/// "gaussian-bump": A b_x(x - x0) b_xi(xi - xi0) with polynomial bumps.
class BumpProfile final : public PhaseProfile {
public:
    BumpProfile(double amplitude, const Vec3& x0, double rx, const Vec3& xi0, double rxi, int exponent);
    double value(const Vec3& x, const Vec3& xi) const override;
    PhaseGradient gradient(const Vec3& x, const Vec3& xi) const override;
    Vec3 x_center() const override { return x0_; }
    double x_radius() const override { return bx_.radius(); }
    double xi_radius() const override { return norm(xi0_) + bxi_.radius(); }
    PhasePoint argmax() const override { return {x0_, xi0_}; }
    /// int f^in dxi / b_x, i.e. the charge per unit spatial profile.
    double momentum_mass() const { return amp_ * bxi_.mass(); }
    const RadialBump& x_bump() const { return bx_; }

private:
    double amp_;
    Vec3 x0_, xi0_;
    RadialBump bx_, bxi_;
};

/// "ring": A b_x(x - x0) (1 - ((|xi| - r0) / w)^2)^k, a momentum shell.
class RingProfile final : public PhaseProfile {
public:
    RingProfile(double amplitude, const Vec3& x0, double rx, double r0, double width, int exponent);
    double value(const Vec3& x, const Vec3& xi) const override;
    PhaseGradient gradient(const Vec3& x, const Vec3& xi) const override;
    Vec3 x_center() const override { return x0_; }
    double x_radius() const override { return bx_.radius(); }
    double xi_radius() const override { return r0_ + w_; }
    PhasePoint argmax() const override { return {x0_, Vec3{r0_, 0, 0}}; }
    double momentum_mass() const { return mass_; }
    const RadialBump& x_bump() const { return bx_; }

private:
    double shell(double p) const;
    double amp_;
    Vec3 x0_;
    RadialBump bx_;
    double r0_, w_;
    int k_;
    double mass_;
};

/// Field of a radial charge density q b(|x - x0|): E = Q(r) / (4 pi r^2) e_r.
class CoulombField {
public:
    CoulombField() = default;
    CoulombField(double charge_density_scale, const Vec3& x0, const RadialBump& profile);
    Vec3 value(const Vec3& x) const;
    /// grad[a][b] = dE_a / dx_b
    Mat3 gradient(const Vec3& x) const;
    double total_charge() const;

private:
    double q_ = 0.0;
    Vec3 x0_{};
    RadialBump b_;
};

/// Initial data for the coupled system. B^in is zero in this version; the
/// divergence-free vector potential for nonzero B^in is not implemented.
struct InitialData {
    std::string name;
    std::shared_ptr<const PhaseProfile> f;
    std::function<Vec3(const Vec3&)> e;
    std::function<Mat3(const Vec3&)> grad_e;
    std::function<Vec3(const Vec3&)> b;  // must stay empty
    /// int f^in dxi at x, from the closed-form profile.
    std::function<double(const Vec3&)> charge;
};

/// Named profiles: "gaussian-bump", "ring", "zero". Unknown parameters are rejected.
/// gaussian-bump: amplitude, x_radius, xi_radius, xi0_1..3, x0_1..3, exponent.
/// ring: amplitude, x_radius, ring_radius, ring_width, x0_1..3, exponent.
InitialData make_initial_data(const std::string& name, const std::map<std::string, double>& params = {});

/// max |div E^in - int f^in dxi| over a cube lattice (4th-order differences).
double compatibility_residual(const InitialData& d, double half_width, int n);

} // namespace lwvm
