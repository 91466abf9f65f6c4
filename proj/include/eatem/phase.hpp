#pragma once

#include <cmath>
#include <numbers>

namespace eatem {

inline constexpr double pi = std::numbers::pi;

/// Reduces an angle to the representative in (-pi, pi].
inline double wrap_phase(double x) {
    double r = std::remainder(x, 2.0 * pi);
    if (r <= -pi) {
        r += 2.0 * pi;
    }
    return r;
}

/// Shortest distance between two angles on the circle, in [0, pi].
inline double phase_distance(double x, double y) {
    return std::abs(wrap_phase(x - y));
}

}  // namespace eatem
