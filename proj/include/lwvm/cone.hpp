#pragma once

#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "lwvm/kernels.hpp"
#include "lwvm/quadrature.hpp"

namespace lwvm {

/// Radial polynomial bump on R^4: A (1 - |p - c|^2 / rho^2)^k inside the ball,
/// zero outside. Exact derivatives to second order.
class TestFunction {
public:
    TestFunction(const Point4& center, double radius, int exponent = 8, double amplitude = 1.0);

    double value(const Point4& p) const;
    Point4 gradient(const Point4& p) const;
    Mat4 hessian(const Point4& p) const;

    /// T phi and T^2 phi for T = d_t + v . grad_x.
    double stream(const Point4& p, const Vec3& v) const;
    double stream2(const Point4& p, const Vec3& v) const;

    const Point4& center() const { return c_; }
    double radius() const { return rho_; }
    int exponent() const { return k_; }
    double amplitude() const { return amp_; }
    bool contains_origin() const { return dot(c_, c_) < rho_ * rho_; }

private:
    Point4 c_;
    double rho_;
    int k_;
    double amp_;
};

struct PairingOrders {
    int time = 24;     // Gauss-Legendre nodes per time panel
    int polar = 32;    // Gauss-Legendre nodes in cos(theta)
    int azimuth = 64;  // trapezoid nodes
};

/// Node (s, s omega) of the measure Y restricted to the support of a test function.
struct ConeSample {
    double s;
    Vec3 omega;
    double weight;  // includes s / (4 pi)
};

/// One time node of a ConeSampling and the range of its sphere nodes.
struct ConeSlice {
    double s;
    double weight;  // Gauss-Legendre weight times s / (4 pi)
    bool full;      // the whole sphere of radius s lies in the support
    std::size_t begin, end;
};

struct ConeSampling {
    std::vector<ConeSample> samples;
    std::vector<ConeSlice> slices;
};

/// Cone quadrature adapted to the ball supporting phi: composite Gauss-Legendre
/// in s with breakpoints where the spherical slice changes topology, and for
/// each s a polar cap rule around the spatial part of the centre. Only nodes
/// with s in (s_min, s_max) are produced. `pole` orients full-sphere slices.
ConeSampling cone_samples(const TestFunction& phi, const PairingOrders& orders, const Vec3& pole = {0, 0, 1},
                          double s_min = 0.0, double s_max = std::numeric_limits<double>::infinity());

struct PairingReport {
    std::string check;
    Vec3 v{};
    std::vector<int> indices;
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;   // |lhs - rhs|
    double scale = 1.0;      // max(|lhs|, |rhs|, 1)
    PairingOrders orders;
    double relative() const { return residual / scale; }
};

struct YPairResult {
    double value = 0.0;
    bool reduced_accuracy = false;  // support touches the origin or the horizon
};

/// <Y, phi> over 0 < s < horizon.
YPairResult y_pair(double horizon, const TestFunction& phi, const PairingOrders& orders = {});
/// <Y, phi> for an arbitrary integrand phi(s, x) with the plain cone rule.
double y_pair(double horizon, const std::function<double(double, const Vec3&)>& phi, int time_order,
              const SphereRule& sphere);

/// (Y * 1_{t>=0} g)(t, x) = int_0^t (t-s)/(4 pi) int_{S^2} g(s, x - (t-s) omega) ds.
double y_convolve(const std::function<double(double, const Vec3&)>& g, double t, const Vec3& x, int time_order,
                  const SphereRule& sphere);

/// lhs = -<Y, d_i phi>, rhs = -<a_i^0 Y, T phi> + <a_i^1 Y, phi>.
PairingReport division_identity_first(const SubluminalVelocity& v, int i, const TestFunction& phi,
                                      const PairingOrders& orders = {});

/// Principal value of b_ij^2 Y against psi, split at theta > 0.
double vp_pair(const SubluminalVelocity& v, int i, int j, const TestFunction& psi, double theta,
               const PairingOrders& orders = {});
/// Same for a general psi(s, y) with support in s < s_max (plain product rule).
double vp_pair(const SubluminalVelocity& v, int i, int j, const std::function<double(double, const Vec3&)>& psi,
               double theta, double s_max, const PairingOrders& orders = {});

struct DeltaOptions {
    PairingOrders orders{24, 32, 64};
    double radius = 1.0;   // support radius of both test functions
    double shift = 0.3;    // spatial offset of the second test function, along v
    int exponent = 8;
    double theta = 0.25;
    double tolerance = 1e-4;  // relative spread that signals quadrature failure
};

struct DeltaCoefficients {
    Mat4 c{};       // average over the two test functions
    Mat4 spread{};  // |c_A - c_B| / max(|c|, 1)
    Mat4 c_a{}, c_b{};
};

/// Coefficients c_ij of the delta part of b_ij^2 Y, from both test functions.
DeltaCoefficients extract_delta_coefficients(const SubluminalVelocity& v, const DeltaOptions& opt = {});
/// Single entry; throws std::runtime_error when the spread exceeds opt.tolerance.
double extract_delta_coefficient(const SubluminalVelocity& v, int i, int j, const DeltaOptions& opt = {});

/// Rotate coefficients computed for |v| e_z onto direction v.
Mat4 rotate_delta(const Mat4& c_axis, const Vec3& v);

/// Thread-safe memo of c(v) keyed on |v|, using rotation covariance.
class DeltaCoefficientCache {
public:
    explicit DeltaCoefficientCache(DeltaOptions opt = {}) : opt_(opt) {}
    Mat4 get(const Vec3& v);
    std::size_t size() const;

private:
    DeltaOptions opt_;
    mutable std::mutex mutex_;
    std::map<double, Mat4> table_;
};

/// c(v) interpolated in |v| on Chebyshev nodes of [0, v_max], rotated onto v.
/// Built eagerly; immutable afterwards.
class DeltaCoefficientTable {
public:
    explicit DeltaCoefficientTable(double v_max = 0.9, int nodes = 16, DeltaOptions opt = {});
    Mat4 get(const Vec3& v) const;
    double v_max() const { return v_max_; }
    /// Largest spread seen while building.
    double max_spread() const { return max_spread_; }

private:
    double v_max_;
    std::vector<double> q_;
    std::vector<Mat4> c_;
    double max_spread_ = 0.0;
};

/// Shared table with default settings, built on first use.
const DeltaCoefficientTable& default_delta_table();

/// second identity: lhs = <Y, d_ij phi>,
/// rhs = <b0 Y, T^2 phi> - <b1 Y, T phi> + vp(phi) + c_ij phi(0).
/// When phi(0) != 0 the delta coefficients are needed; pass them or they are extracted.
PairingReport division_identity_second(const SubluminalVelocity& v, int i, int j, const TestFunction& phi,
                                       double theta = 0.25, const PairingOrders& orders = {},
                                       const DeltaCoefficients* delta = nullptr);

/// Res_0 g for g homogeneous of degree -dim on R^dim (dim = 2, 3, 4): integral
/// of g over the unit sphere. Throws std::invalid_argument when sampled
/// homogeneity fails.
double residue(const std::function<double(const Vec<4>&)>& g, int dim, int order = 32);

/// Integral over S^2 of (d_i m - T(m a_i^0))(1, omega) for m homogeneous of
/// degree 0 or -1 supplied with its gradient.
double avm0_residual(const KernelSet3& k, int i, const HomogeneousFunction& m, const SphereRule& rule);

} // namespace lwvm
