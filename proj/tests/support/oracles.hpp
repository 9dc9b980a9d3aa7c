#pragma once

// Test-only oracles, independent of the implementation paths they check.

#include <cmath>
#include <functional>
#include <vector>

#include "skillstart/geometry.hpp"
#include "skillstart/rng.hpp"

namespace skillstart::testing {

// Central finite difference of a scalar function of a vector.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = x[i];
        x[i] = x0 + h;
        const double fp = f(x);
        x[i] = x0 - h;
        const double fm = f(x);
        x[i] = x0;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

inline double rel_err(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / denom;
}

// Max relative error between two gradients, with an absolute floor so that
// near-zero components do not inflate the ratio.
inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b,
                          double abs_floor = 1e-7) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({std::abs(a[i]), std::abs(b[i]), abs_floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

// Containment test written independently of point_distance.
inline bool contains_point(const Shape& shape, const Vec2& p) {
    if (const auto* c = std::get_if<Circle>(&shape)) {
        return (p - c->center).norm() < c->radius;
    }
    if (const auto* b = std::get_if<BoxShape>(&shape)) {
        const Vec2 d = p - b->center;
        const double ca = std::cos(b->angle), sa = std::sin(b->angle);
        const double lx = ca * d.x + sa * d.y;
        const double ly = -sa * d.x + ca * d.y;
        return std::abs(lx) < b->half_extents.x && std::abs(ly) < b->half_extents.y;
    }
    const auto& cap = std::get<CapsuleShape>(shape);
    const Vec2 ab = cap.b - cap.a;
    const double len2 = ab.norm2();
    double t = len2 > 0.0 ? (p - cap.a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (p - (cap.a + ab * t)).norm() < cap.radius;
}

inline Shape random_shape(Rng& rng) {
    const int kind = static_cast<int>(rng.uniform_index(3));
    const Vec2 c{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    if (kind == 0) return Circle{c, rng.uniform(0.05, 0.5)};
    if (kind == 1)
        return BoxShape{c, {rng.uniform(0.05, 0.5), rng.uniform(0.05, 0.5)}, rng.uniform(-M_PI, M_PI)};
    return CapsuleShape{c, c + Vec2{rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)},
                        rng.uniform(0.02, 0.3)};
}

}  // namespace skillstart::testing
