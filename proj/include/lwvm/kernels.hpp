#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lwvm/quadrature.hpp"
#include "lwvm/vec.hpp"

namespace lwvm {

template <int N>
using SqMat = std::array<std::array<double, N>, N>;
using Mat4 = SqMat<4>;

/// Velocity with |v| < 1 (speed of light units).
template <int Dim>
class BasicVelocity {
public:
    BasicVelocity() = default;
    explicit BasicVelocity(const Vec<Dim>& v);

    const Vec<Dim>& value() const { return v_; }
    double speed() const { return speed_; }
    double operator[](std::size_t i) const { return v_[i]; }

private:
    Vec<Dim> v_{};
    double speed_ = 0.0;
};

using SubluminalVelocity = BasicVelocity<3>;

/// v(xi) = xi / sqrt(1 + |xi|^2).
SubluminalVelocity relativistic_velocity(const Vec3& xi);
/// dv_k / dxi_a = (delta_ka - v_k v_a) / gamma.
Mat3 velocity_jacobian(const Vec3& xi);
/// H[k](a, b) = d^2 v_k / dxi_a dxi_b.
std::array<Mat3, 3> velocity_hessian(const Vec3& xi);

/// Quintic smoothstep cutoff: 1 on [0, c1], 0 on [c2, inf).
/// For zero velocity the profile is identically 1.
class CutoffProfile {
public:
    CutoffProfile() = default;
    explicit CutoffProfile(double speed);

    double c1() const { return c1_; }
    double c2() const { return c2_; }
    int order() const { return 5; }
    bool trivial() const { return trivial_; }

    double value(double r) const;
    /// chi and its first three r-derivatives.
    std::array<double, 4> derivatives(double r) const;
    /// d chi / d|v| at fixed r.
    double speed_derivative(double r) const;

private:
    bool trivial_ = true;
    double speed_ = 0.0;
    double c1_ = 0.0;
    double c2_ = 0.0;
};

/// Values of a_i^0, a_i^1 and their spacetime gradients grad[i][mu].
template <int Dim>
struct AKernels {
    static constexpr int N = Dim + 1;
    std::array<double, N> a0{}, a1{};
    SqMat<N> grad_a0{}, grad_a1{};
};

/// Values of b_ij^k and spacetime gradients grad_bk[i][j][mu].
template <int Dim>
struct BKernels {
    static constexpr int N = Dim + 1;
    SqMat<N> b0{}, b1{}, b2{};
    std::array<SqMat<N>, N> grad_b0{}, grad_b1{}, grad_b2{};
};

/// Kernels of the division lemma for a fixed velocity.
template <int Dim>
class KernelSet {
public:
    static constexpr int N = Dim + 1;
    using Point = SpacePoint<Dim>;

    explicit KernelSet(const Vec<Dim>& v);
    explicit KernelSet(const BasicVelocity<Dim>& v);

    const BasicVelocity<Dim>& velocity() const { return v_; }
    const CutoffProfile& chi() const { return chi_; }

    /// alpha_0 = t / (t - x.v), alpha_i = x_i / (x.v - t).
    std::array<double, N> alpha(const Point& p) const;
    AKernels<Dim> a(const Point& p) const;
    BKernels<Dim> b(const Point& p) const;
    /// d a_j^0 / d v_k (generic point, includes the cutoff).
    std::array<Vec<Dim>, N> a0_velocity_gradient(const Point& p) const;

private:
    void check_point(const Point& p, bool need_positive_time) const;

    BasicVelocity<Dim> v_;
    CutoffProfile chi_;
};

using KernelSet3 = KernelSet<3>;
using KernelSet2 = KernelSet<2>;

/// Everything the field representation needs from the kernels at a unit cone
/// point (1, omega), where the cutoff is identically 1. Scale with
/// homogeneity: a^k, b^k have degree -k.
struct ConeJet {
    std::array<double, 4> a0{}, a1{};
    Mat4 b0{}, b1{}, b2{};
    Mat4 grad_a0{};                        // d_mu a_j^0, [j][mu]
    std::array<Vec3, 4> dv_a0{};           // d a_j^0 / d v_k
    std::array<std::array<Vec3, 4>, 4> dv_b0{};
    std::array<std::array<Vec3, 4>, 4> dv_b1{};
    std::array<std::array<Mat3, 4>, 4> dvv_b0{};
};

/// Unit cone values only (cheap).
struct ConeValues {
    std::array<double, 4> a0{}, a1{};
    Mat4 b0{}, b1{}, b2{};
};

ConeValues cone_values(const SubluminalVelocity& v, const Vec3& omega);
ConeJet cone_jet(const SubluminalVelocity& v, const Vec3& omega);

/// Evaluator tagged with a homogeneity degree.
struct HomogeneousFunction {
    int degree = 0;
    std::function<double(const Point4&)> value;
    std::function<Point4(const Point4&)> gradient;
};

/// max |g(lambda p) - lambda^m g(p)| / |g(p)| over samples. Samples where
/// |g(p)| is below 1e-8 of the sample maximum are skipped.
double homogeneity_check(const HomogeneousFunction& g, std::span<const Point4> samples,
                         std::span<const double> lambdas);

/// |div(p g) - (m + 4) g| at p, using the supplied gradient.
double euler_residual(const HomogeneousFunction& g, const Point4& p);

/// Integral of b_ij^2(1, omega) over the unit sphere.
double sphere_mean_zero(const KernelSet3& k, int i, int j, const SphereRule& rule);
double sphere_mean_zero(const KernelSet3& k, int i, int j, int n_theta = 32, int n_phi = 64);

/// Integral of b_ij^2(1, y) / sqrt(1 - |y|^2) over the unit disk (2D kernels).
double disk_mean_zero_2d(const KernelSet2& k, int i, int j, int n_radial = 32, int n_phi = 64);
/// Same quadrature applied to an arbitrary integrand on the disk.
double disk_weighted_integral(const std::function<double(const Vec2&)>& f, int n_radial, int n_phi);

/// Self-test record for export.
struct KernelCheckRecord {
    std::string kernel;
    Vec3 v;
    std::string check;
    double residual;
    double tolerance;
    bool passed() const { return residual <= tolerance; }
};

struct KernelSelfTestOptions {
    int samples_per_velocity = 8;
    double fd_step = 1e-5;
    double homogeneity_tol = 1e-10;
    double euler_tol = 1e-8;
    double gradient_tol = 1e-6;
    double mean_zero_tol = 1e-8;
    int sphere_theta = 32;
    int sphere_phi = 64;
};

/// Homogeneity, Euler, finite-difference gradient and sphere mean-zero checks
/// for one velocity, sampled points drawn from `seed`.
std::vector<KernelCheckRecord> kernel_self_test(const Vec3& v, unsigned seed,
                                                const KernelSelfTestOptions& opt = {});

extern template class KernelSet<2>;
extern template class KernelSet<3>;
extern template class BasicVelocity<2>;
extern template class BasicVelocity<3>;

} // namespace lwvm
