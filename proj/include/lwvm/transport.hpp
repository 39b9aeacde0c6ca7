#pragma once

#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <vector>

#include "lwvm/kernels.hpp"
#include "lwvm/random.hpp"

namespace lwvm {

struct PhasePoint {
    Vec3 x{};
    Vec3 xi{};
};

struct PhaseGradient {
    Vec3 dx{};
    Vec3 dxi{};
};

/// Initial phase density f^in with closed-form gradient and a description of
/// its support: f^in(x, xi) = 0 unless |x - x_center| < x_radius and |xi| < xi_radius.
class PhaseProfile {
public:
    virtual ~PhaseProfile() = default;
    virtual double value(const Vec3& x, const Vec3& xi) const = 0;
    virtual PhaseGradient gradient(const Vec3& x, const Vec3& xi) const = 0;
    virtual Vec3 x_center() const = 0;
    virtual double x_radius() const = 0;
    virtual double xi_radius() const = 0;
    /// A point where f^in attains its maximum, and the maximum.
    virtual PhasePoint argmax() const = 0;
    double sup() const {
        const auto p = argmax();
        return value(p.x, p.xi);
    }
};

/// K_u(t, x, xi), minus the Lorentz force. Implementations return zero
/// beyond the region where data exist and set *outside.
class ForceField {
public:
    virtual ~ForceField() = default;
    virtual Vec3 operator()(double t, const Vec3& x, const Vec3& xi, bool* outside = nullptr) const = 0;
    /// Upper bound of |K| on [0, t], used for support bounds.
    virtual double bound(double t) const = 0;
    /// dK_a / dxi_b, by default from central differences.
    virtual Mat3 xi_jacobian(double t, const Vec3& x, const Vec3& xi) const;
};

class ZeroForce final : public ForceField {
public:
    Vec3 operator()(double, const Vec3&, const Vec3&, bool* = nullptr) const override { return {}; }
    double bound(double) const override { return 0.0; }
};

class ConstantForce final : public ForceField {
public:
    explicit ConstantForce(const Vec3& c) : c_(c) {}
    Vec3 operator()(double, const Vec3&, const Vec3&, bool* = nullptr) const override { return c_; }
    double bound(double) const override { return norm(c_); }

private:
    Vec3 c_;
};

/// K = -(E + v(xi) x B) for analytic E(t, x), B(t, x).
class ElectromagneticForce final : public ForceField {
public:
    using VectorField = std::function<Vec3(double, const Vec3&)>;
    ElectromagneticForce(VectorField e, VectorField b, double bound) : e_(std::move(e)), b_(std::move(b)), bound_(bound) {}
    Vec3 operator()(double t, const Vec3& x, const Vec3& xi, bool* outside = nullptr) const override;
    double bound(double) const override { return bound_; }

private:
    VectorField e_, b_;
    double bound_;
};

/// -(E + v x B) for given field values.
Vec3 lorentz_k(const Vec3& e, const Vec3& b, const Vec3& xi);

/// One explicit RK4 step of dx/dt = v(xi), dxi/dt = -K(t, x, xi). dt may be negative.
PhasePoint characteristics_step(const PhasePoint& p, double t, double dt, const ForceField& k, bool* outside = nullptr);

/// Integrate from t0 to t1 with equal steps no longer than max_step.
PhasePoint integrate_characteristic(PhasePoint p, double t0, double t1, double max_step, const ForceField& k,
                                    bool* outside = nullptr);

struct FValue {
    double value = 0.0;
    bool outside = false;  // the backward trajectory left the force data
};

/// f(t, x, xi) as the pullback of f^in along backward characteristics.
class PhaseDensity {
public:
    PhaseDensity(std::shared_ptr<const PhaseProfile> fin, std::shared_ptr<const ForceField> k, double max_step);

    FValue evaluate(double t, const Vec3& x, const Vec3& xi) const;
    PhasePoint foot(double t, const Vec3& x, const Vec3& xi, bool* outside = nullptr) const;
    /// Gradient from central differences of the foot-point map, step h.
    PhaseGradient gradient(double t, const Vec3& x, const Vec3& xi, double h = 1e-4) const;
    /// True when (x, xi) is provably outside supp f(t) (finite speed and force bound).
    bool certainly_zero(double t, const Vec3& x, const Vec3& xi) const;

    const PhaseProfile& initial() const { return *fin_; }
    const ForceField& force() const { return *k_; }
    double max_step() const { return max_step_; }

private:
    std::shared_ptr<const PhaseProfile> fin_;
    std::shared_ptr<const ForceField> k_;
    double max_step_;
};

struct SupportSample {
    double t;
    double radius;  // R_f(t)
    double r_star;  // running maximum
};

/// Tracks R_f(t) = max |xi| over an ensemble pushed forward along characteristics.
class SupportTracker {
public:
    explicit SupportTracker(std::vector<PhasePoint> ensemble, double t0 = 0.0);

    /// Advance by dt (one RK4 step per call) and record R_f.
    const SupportSample& advance(double dt, const ForceField& k);

    double time() const { return t_; }
    double radius() const { return history_.back().radius; }
    double r_star() const { return history_.back().r_star; }
    std::span<const PhasePoint> ensemble() const { return pts_; }
    std::span<const SupportSample> history() const { return history_; }

private:
    std::vector<PhasePoint> pts_;
    double t_;
    std::vector<SupportSample> history_;
};

/// Points of supp f^in: the argmax first, then rejection samples with f^in > 0.
/// For f^in = 0 a single point at rest.
std::vector<PhasePoint> seed_ensemble(const PhaseProfile& fin, std::size_t n, Rng& rng);

/// Rows (t, x1..x3, xi1..xi3, f_value).
void write_ensemble_csv(std::ostream& os, double t, std::span<const PhasePoint> pts, std::span<const double> values,
                        bool header = true);

} // namespace lwvm
