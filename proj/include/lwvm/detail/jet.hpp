#pragma once

#include <array>
#include <cmath>

namespace lwvm::detail {

// Value with first, second and third partial derivatives in N variables.
// Used by the generic kernel path to carry exact chain-rule derivatives.
template <int N>
struct Jet3 {
    double v = 0.0;
    std::array<double, N> g{};
    std::array<double, N * N> h{};
    std::array<double, N * N * N> k{};

    static constexpr int idx(int a, int b) { return a * N + b; }
    static constexpr int idx(int a, int b, int c) { return (a * N + b) * N + c; }

    static Jet3 constant(double c) {
        Jet3 j;
        j.v = c;
        return j;
    }
    // Affine function c0 + sum_a lin[a] p[a].
    static Jet3 affine(double value, const std::array<double, N>& lin) {
        Jet3 j;
        j.v = value;
        j.g = lin;
        return j;
    }
};

template <int N>
Jet3<N> operator*(const Jet3<N>& A, const Jet3<N>& B) {
    using J = Jet3<N>;
    J C;
    C.v = A.v * B.v;
    for (int a = 0; a < N; ++a) C.g[a] = A.g[a] * B.v + A.v * B.g[a];
    for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b)
            C.h[J::idx(a, b)] = A.h[J::idx(a, b)] * B.v + A.g[a] * B.g[b] + A.g[b] * B.g[a] + A.v * B.h[J::idx(a, b)];
    for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b)
            for (int c = 0; c < N; ++c)
                C.k[J::idx(a, b, c)] = A.k[J::idx(a, b, c)] * B.v + A.h[J::idx(a, b)] * B.g[c] +
                                       A.h[J::idx(a, c)] * B.g[b] + A.h[J::idx(b, c)] * B.g[a] +
                                       A.g[a] * B.h[J::idx(b, c)] + A.g[b] * B.h[J::idx(a, c)] +
                                       A.g[c] * B.h[J::idx(a, b)] + A.v * B.k[J::idx(a, b, c)];
    return C;
}

// f(A) given f and its first three derivatives at A.v.
template <int N>
Jet3<N> compose(const Jet3<N>& A, double f0, double f1, double f2, double f3) {
    using J = Jet3<N>;
    J C;
    C.v = f0;
    for (int a = 0; a < N; ++a) C.g[a] = f1 * A.g[a];
    for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b) C.h[J::idx(a, b)] = f2 * A.g[a] * A.g[b] + f1 * A.h[J::idx(a, b)];
    for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b)
            for (int c = 0; c < N; ++c)
                C.k[J::idx(a, b, c)] =
                    f3 * A.g[a] * A.g[b] * A.g[c] +
                    f2 * (A.h[J::idx(a, b)] * A.g[c] + A.h[J::idx(a, c)] * A.g[b] + A.h[J::idx(b, c)] * A.g[a]) +
                    f1 * A.k[J::idx(a, b, c)];
    return C;
}

template <int N>
Jet3<N> reciprocal(const Jet3<N>& A) {
    const double r = 1.0 / A.v;
    return compose(A, r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r);
}

template <int N>
Jet3<N> sqrt(const Jet3<N>& A) {
    const double s = std::sqrt(A.v);
    return compose(A, s, 0.5 / s, -0.25 / (s * A.v), 0.375 / (s * A.v * A.v));
}

} // namespace lwvm::detail
