#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace lwvm {

/// Small fixed-size vector used for positions, momenta and spacetime points.
template <std::size_t N>
struct Vec {
    std::array<double, N> c{};

    constexpr double& operator[](std::size_t i) { return c[i]; }
    constexpr double operator[](std::size_t i) const { return c[i]; }
    static constexpr std::size_t size() { return N; }

    constexpr Vec& operator+=(const Vec& o) {
        for (std::size_t i = 0; i < N; ++i) c[i] += o.c[i];
        return *this;
    }
    constexpr Vec& operator-=(const Vec& o) {
        for (std::size_t i = 0; i < N; ++i) c[i] -= o.c[i];
        return *this;
    }
    constexpr Vec& operator*=(double s) {
        for (auto& x : c) x *= s;
        return *this;
    }
    friend constexpr Vec operator+(Vec a, const Vec& b) { return a += b; }
    friend constexpr Vec operator-(Vec a, const Vec& b) { return a -= b; }
    friend constexpr Vec operator-(Vec a) { return a *= -1.0; }
    friend constexpr Vec operator*(Vec a, double s) { return a *= s; }
    friend constexpr Vec operator*(double s, Vec a) { return a *= s; }
    friend constexpr Vec operator/(Vec a, double s) { return a *= 1.0 / s; }
    friend constexpr bool operator==(const Vec&, const Vec&) = default;
};

using Vec2 = Vec<2>;
using Vec3 = Vec<3>;

template <std::size_t N>
constexpr double dot(const Vec<N>& a, const Vec<N>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) s += a[i] * b[i];
    return s;
}

template <std::size_t N>
inline double norm(const Vec<N>& a) { return std::sqrt(dot(a, a)); }

template <std::size_t N>
inline double max_abs(const Vec<N>& a) {
    double m = 0.0;
    for (double x : a.c) m = std::max(m, std::abs(x));
    return m;
}

template <std::size_t N>
inline bool all_finite(const Vec<N>& a) {
    for (double x : a.c)
        if (!std::isfinite(x)) return false;
    return true;
}

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

/// Spacetime point (t, x) in Dim space dimensions; component 0 is time.
template <int Dim>
using SpacePoint = Vec<static_cast<std::size_t>(Dim + 1)>;

using Point4 = SpacePoint<3>;

inline Point4 make_point(double t, const Vec3& x) { return {t, x[0], x[1], x[2]}; }
inline Vec3 spatial(const Point4& p) { return {p[1], p[2], p[3]}; }

using Mat3 = std::array<Vec3, 3>;

} // namespace lwvm
