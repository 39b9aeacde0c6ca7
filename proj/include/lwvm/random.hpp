#pragma once

#include <cstdint>
#include <numbers>
#include <random>

#include "lwvm/vec.hpp"

namespace lwvm {

/// Seeded generator with platform-independent draws (the standard
/// distributions are implementation-defined, mt19937_64 is not).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    Vec3 unit_vector() {
        const double z = uniform(-1.0, 1.0);
        const double phi = uniform(0.0, 2.0 * std::numbers::pi);
        const double s = std::sqrt(1.0 - z * z);
        return {s * std::cos(phi), s * std::sin(phi), z};
    }

    /// Uniform in the ball of the given radius.
    Vec3 in_ball(double radius) { return (radius * std::cbrt(uniform())) * unit_vector(); }

    std::uint64_t bits() { return eng_(); }

private:
    std::mt19937_64 eng_;
};

} // namespace lwvm
