#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "lwvm/initial_data.hpp"
#include "lwvm/quadrature.hpp"
#include "lwvm/transport.hpp"

namespace lwvm {

struct HomogeneousField {
    Vec3 a0{};     // A^0(t, x)
    Vec3 dt_a0{};  // d_t A^0(t, x)
};

/// A^0 = -(t / 4 pi) int E^in(x - t omega) d omega and its time derivative
/// (Kirchhoff). Rejects initial data with a magnetic field.
HomogeneousField homogeneous_field(const InitialData& data, double t, const Vec3& x, const SphereRule& sphere);

/// Moment weight m(xi) times the momentum cutoff phi_c(|xi|), which is 1 on
/// |xi| <= r_star and 0 beyond 2 r_star.
class MomentSpec {
public:
    enum class Kind { one, v1, v2, v3, custom };
    struct Custom {
        std::function<double(const Vec3&)> value;
        std::function<Vec3(const Vec3&)> gradient;
        std::function<Mat3(const Vec3&)> hessian;
    };

    MomentSpec(Kind kind, double r_star);
    MomentSpec(Custom custom, double r_star);
    static MomentSpec parse(const std::string& name, double r_star);  // "1", "v1", "v2", "v3"

    double value(const Vec3& xi) const;
    Vec3 gradient(const Vec3& xi) const;
    Mat3 hessian(const Vec3& xi) const;
    double cutoff(const Vec3& xi) const;
    Kind kind() const { return kind_; }
    std::string name() const;
    double r_star() const { return r_star_; }

private:
    std::array<double, 3> cutoff_radial(double rho) const;  // value, d/drho, d2/drho2
    void raw(const Vec3& xi, double& m, Vec3& g, Mat3& h, int order) const;

    Kind kind_;
    Custom custom_;
    double r_star_;
};

struct MomentDensities {
    double rho = 0.0;
    Vec3 j{};
    bool outside = false;  // some characteristic left the force data
};

/// rho_f = int f dxi, j_f = int v f dxi by the momentum rule.
MomentDensities moment_densities(const PhaseDensity& f, double t, const Vec3& x, const MomentumQuadrature& xi_rule);

struct PotentialValue {
    double phi = 0.0;
    Vec3 a{};
    Vec3 a0{};
};

/// phi = Y * (1 rho_f), A = A^0 + Y * (1 j_f) by cone quadrature with the
/// momentum rule nested inside each cone node.
PotentialValue potentials(const PhaseDensity& f, const InitialData& data, double t, const Vec3& x, int time_order,
                          const SphereRule& sphere, const MomentumQuadrature& xi_rule);

/// Uniform cube lattice [-L, L]^3 with n points per axis.
class Grid3 {
public:
    Grid3(int n, double half_width);
    int n() const { return n_; }
    double half_width() const { return l_; }
    double h() const { return h_; }
    std::size_t size() const { return static_cast<std::size_t>(n_) * n_ * n_; }
    std::size_t index(int i, int j, int k) const { return (static_cast<std::size_t>(i) * n_ + j) * n_ + k; }
    Vec3 point(int i, int j, int k) const { return {-l_ + i * h_, -l_ + j * h_, -l_ + k * h_}; }
    Vec3 point(std::size_t idx) const;
    bool contains(const Vec3& x) const;

    /// Trilinear interpolation of C-component node data; false outside the cube.
    template <std::size_t C>
    bool interpolate(const std::vector<std::array<double, C>>& data, const Vec3& x, std::array<double, C>& out) const;

private:
    int n_;
    double l_;
    double h_;
};

/// Node data for E and B on a grid at one time.
struct FieldSlice {
    double t = 0.0;
    std::vector<std::array<double, 6>> eb;  // E1 E2 E3 B1 B2 B3
};

/// K_u from stored field slices: trilinear in space, cubic Lagrange in time
/// (linear extrapolation past the newest slice). Zero outside the grid.
class FieldHistory final : public ForceField {
public:
    explicit FieldHistory(Grid3 grid) : grid_(std::move(grid)) {}

    void push(FieldSlice s);
    void replace_last(FieldSlice s);
    std::size_t slices() const { return slices_.size(); }
    const FieldSlice& slice(std::size_t k) const { return slices_[k]; }
    const Grid3& grid() const { return grid_; }

    /// Interpolated (E, B) at (t, x); false outside the grid.
    bool fields(double t, const Vec3& x, Vec3& e, Vec3& b) const;
    Vec3 operator()(double t, const Vec3& x, const Vec3& xi, bool* outside = nullptr) const override;
    double bound(double t) const override;
    Mat3 xi_jacobian(double t, const Vec3& x, const Vec3& xi) const override;

private:
    Grid3 grid_;
    std::vector<FieldSlice> slices_;
    std::vector<double> sup_;  // max |E| + |B| per slice
};

/// K_u = -(E + v(xi) x B).
Vec3 lorentz_force(const Vec3& e, const Vec3& b, const Vec3& xi);

/// Derivatives of the potential pieces entering the moment form of K_u:
/// A^0, M_1 = int u dxi and M_v = int v u dxi.
struct PotentialDerivatives {
    Vec3 dt_a0{};
    Mat3 grad_a0{};   // [a][b] = d_b A^0_a
    Vec3 grad_m1{};
    Vec3 dt_mv{};
    Mat3 grad_mv{};   // [a][b] = d_b M_v,a
};

/// K_u = d_t A^0 - v x curl A^0 + d_t M_v + grad M_1 - v x curl M_v.
Vec3 lorentz_force(const PotentialDerivatives& d, const Vec3& xi);

/// div_xi K by central differences with step h.
double divergence_xi(const ForceField& k, double t, const Vec3& x, const Vec3& xi, double h = 1e-5);

// ---- template implementation ----

template <std::size_t C>
bool Grid3::interpolate(const std::vector<std::array<double, C>>& data, const Vec3& x,
                        std::array<double, C>& out) const {
    double u[3];
    int i0[3];
    for (int a = 0; a < 3; ++a) {
        const double s = (x[a] + l_) / h_;
        if (!(s >= 0.0 && s <= n_ - 1)) return false;
        i0[a] = std::min(static_cast<int>(s), n_ - 2);
        u[a] = s - i0[a];
    }
    out.fill(0.0);
    for (int c = 0; c < 8; ++c) {
        const int di = c >> 2, dj = (c >> 1) & 1, dk = c & 1;
        const double w = (di ? u[0] : 1 - u[0]) * (dj ? u[1] : 1 - u[1]) * (dk ? u[2] : 1 - u[2]);
        if (w == 0.0) continue;
        const auto& v = data[index(i0[0] + di, i0[1] + dj, i0[2] + dk)];
        for (std::size_t q = 0; q < C; ++q) out[q] += w * v[q];
    }
    return true;
}

} // namespace lwvm
