#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace skillstart {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2() = default;
    constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

    constexpr Vec2 operator+(const Vec2& r) const { return {x + r.x, y + r.y}; }
    constexpr Vec2 operator-(const Vec2& r) const { return {x - r.x, y - r.y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
    constexpr Vec2 operator-() const { return {-x, -y}; }
    Vec2& operator+=(const Vec2& r) { x += r.x; y += r.y; return *this; }
    Vec2& operator-=(const Vec2& r) { x -= r.x; y -= r.y; return *this; }
    constexpr bool operator==(const Vec2& r) const { return x == r.x && y == r.y; }

    constexpr double dot(const Vec2& r) const { return x * r.x + y * r.y; }
    constexpr double cross(const Vec2& r) const { return x * r.y - y * r.x; }
    double norm() const { return std::hypot(x, y); }
    constexpr double norm2() const { return x * x + y * y; }
    // 90-degree counterclockwise rotation: (x,y) -> (-y,x)
    constexpr Vec2 rot90() const { return {-y, x}; }
    Vec2 normalized() const {
        double n = norm();
        return n > 0.0 ? Vec2{x / n, y / n} : Vec2{0.0, 0.0};
    }
};

inline constexpr Vec2 operator*(double s, const Vec2& v) { return v * s; }

inline Vec2 rotate(const Vec2& v, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

struct Circle {
    Vec2 center;
    double radius = 0.0;
};

struct BoxShape {
    Vec2 center;
    Vec2 half_extents;
    double angle = 0.0;  // radians, CCW
};

struct CapsuleShape {
    Vec2 a;
    Vec2 b;
    double radius = 0.0;
};

using Shape = std::variant<Circle, BoxShape, CapsuleShape>;

struct Aabb {
    Vec2 min;
    Vec2 max;
    bool contains(const Vec2& p) const {
        return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y;
    }
};

enum class EnvFamily : int { F1 = 1, F2, F3, F4, F5, F6 };

std::string family_name(EnvFamily f);
EnvFamily family_from_name(const std::string& name);

struct Scene {
    Aabb workspace;
    double table_y = 0.0;
    EnvFamily family = EnvFamily::F1;
    Shape target;
    std::vector<Shape> obstacles;
};

// Signed distance from p to the shape boundary: negative inside, zero on the
// boundary, positive outside. Exact for all three variants.
double point_distance(const Shape& shape, const Vec2& p);

// min over t in [0,1] of point_distance(shape, a + t(b-a)). Closed form for
// circle, capsule and axis-aligned box; branch-and-bound subdivision to 1e-9
// for rotated boxes.
double segment_distance(const Shape& shape, const Vec2& a, const Vec2& b);

// Closest-point pair between two segments; returns squared distance.
double segment_segment_closest(const Vec2& p1, const Vec2& q1, const Vec2& p2, const Vec2& q2,
                               double* s_out = nullptr, double* t_out = nullptr,
                               Vec2* c1_out = nullptr, Vec2* c2_out = nullptr);

// Signed distance between a segment and an axis-aligned rectangle, with the
// minimizing segment parameter and the spatial gradient of the distance with
// respect to the segment point at that parameter (a subgradient at corner or
// penetration ties).
struct SegRectDistance {
    double dist = 0.0;
    double t = 0.0;      // parameter of the minimizing point on the segment
    Vec2 grad_p;         // d dist / d p(t), unit (or axis) direction
};
SegRectDistance segment_rect_distance(const Vec2& a, const Vec2& b, const Aabb& rect);

double perimeter(const Shape& shape);

// Point at arc-length s (measured from a fixed shape-specific origin) on the
// boundary, s in [0, perimeter).
Vec2 boundary_point(const Shape& shape, double s);

// Approximately n*(1-dropout) points at uniformly spaced arc-length
// parameters, each perturbed by isotropic Gaussian noise of scale
// noise_sigma. Deterministic given seed. Throws std::invalid_argument for
// n < 1 or dropout outside [0,1).
std::vector<Vec2> sample_boundary(const Shape& shape, int n, double noise_sigma, double dropout,
                                  std::uint64_t seed);

// Smallest distance between the boundaries of two shapes; negative if they
// intersect. Used by scene generation to enforce non-intersection.
double shape_clearance(const Shape& s1, const Shape& s2);

Vec2 shape_centroid(const Shape& shape);
Aabb shape_aabb(const Shape& shape);

std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);

}  // namespace skillstart
