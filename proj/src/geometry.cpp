#include "skillstart/geometry.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

#include "json.hpp"
#include "skillstart/rng.hpp"

namespace skillstart {

namespace {

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.norm2();
    if (len2 == 0.0) return (p - a).norm();
    double t = (p - a).dot(ab) / len2;
    t = std::clamp(t, 0.0, 1.0);
    return (p - (a + ab * t)).norm();
}

Vec2 box_local(const BoxShape& box, const Vec2& p) {
    const Vec2 d = p - box.center;
    const double c = std::cos(box.angle), s = std::sin(box.angle);
    return {c * d.x + s * d.y, -s * d.x + c * d.y};
}

double box_sdf_local(const Vec2& l, const Vec2& he) {
    const double qx = std::abs(l.x) - he.x;
    const double qy = std::abs(l.y) - he.y;
    if (qx > 0.0 || qy > 0.0) {
        const double ox = std::max(qx, 0.0);
        const double oy = std::max(qy, 0.0);
        return std::hypot(ox, oy);
    }
    return std::max(qx, qy);
}

std::array<Vec2, 4> box_corners(const BoxShape& box) {
    const double c = std::cos(box.angle), s = std::sin(box.angle);
    const Vec2 ex{c * box.half_extents.x, s * box.half_extents.x};
    const Vec2 ey{-s * box.half_extents.y, c * box.half_extents.y};
    return {box.center + ex + ey, box.center - ex + ey, box.center - ex - ey, box.center + ex - ey};
}

// Branch-and-bound minimization of the 1-Lipschitz function
// t -> point_distance(shape, a + t*(b-a)) on [0,1], to tolerance 1e-9.
template <typename F>
double segment_min_lipschitz(const F& f, double seg_len) {
    struct Interval {
        double lo, hi, fmid;
    };
    const double tol = 1e-9;
    double best = std::min(f(0.0), f(1.0));
    std::vector<Interval> stack;
    stack.push_back({0.0, 1.0, f(0.5)});
    best = std::min(best, stack.back().fmid);
    while (!stack.empty()) {
        Interval iv = stack.back();
        stack.pop_back();
        const double half = 0.5 * (iv.hi - iv.lo) * seg_len;
        if (iv.fmid - half >= best - tol) continue;  // cannot improve
        const double mid = 0.5 * (iv.lo + iv.hi);
        const double m1 = 0.5 * (iv.lo + mid);
        const double m2 = 0.5 * (mid + iv.hi);
        const double f1 = f(m1), f2 = f(m2);
        best = std::min({best, f1, f2});
        stack.push_back({iv.lo, mid, f1});
        stack.push_back({mid, iv.hi, f2});
    }
    return best;
}

}  // namespace

double point_distance(const Shape& shape, const Vec2& p) {
    return std::visit(
        [&](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Circle>) {
                return (p - s.center).norm() - s.radius;
            } else if constexpr (std::is_same_v<T, BoxShape>) {
                return box_sdf_local(box_local(s, p), s.half_extents);
            } else {
                if (s.a == s.b) return (p - s.a).norm() - s.radius;
                return point_segment_distance(p, s.a, s.b) - s.radius;
            }
        },
        shape);
}

double segment_segment_closest(const Vec2& p1, const Vec2& q1, const Vec2& p2, const Vec2& q2,
                               double* s_out, double* t_out, Vec2* c1_out, Vec2* c2_out) {
    // Ericson, Real-Time Collision Detection, 5.1.9
    const Vec2 d1 = q1 - p1;
    const Vec2 d2 = q2 - p2;
    const Vec2 r = p1 - p2;
    const double a = d1.norm2();
    const double e = d2.norm2();
    const double f = d2.dot(r);
    double s, t;
    if (a == 0.0 && e == 0.0) {
        s = t = 0.0;
    } else if (a == 0.0) {
        s = 0.0;
        t = std::clamp(f / e, 0.0, 1.0);
    } else {
        const double c = d1.dot(r);
        if (e == 0.0) {
            t = 0.0;
            s = std::clamp(-c / a, 0.0, 1.0);
        } else {
            const double b = d1.dot(d2);
            const double denom = a * e - b * b;
            s = denom != 0.0 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
            t = (b * s + f) / e;
            if (t < 0.0) {
                t = 0.0;
                s = std::clamp(-c / a, 0.0, 1.0);
            } else if (t > 1.0) {
                t = 1.0;
                s = std::clamp((b - c) / a, 0.0, 1.0);
            }
        }
    }
    const Vec2 c1 = p1 + d1 * s;
    const Vec2 c2 = p2 + d2 * t;
    if (s_out) *s_out = s;
    if (t_out) *t_out = t;
    if (c1_out) *c1_out = c1;
    if (c2_out) *c2_out = c2;
    return (c1 - c2).norm2();
}

SegRectDistance segment_rect_distance(const Vec2& a, const Vec2& b, const Aabb& rect) {
    const Vec2 c = (rect.min + rect.max) * 0.5;
    const Vec2 he = (rect.max - rect.min) * 0.5;
    const Vec2 la = a - c;
    const Vec2 lb = b - c;
    const Vec2 d = lb - la;

    // Liang-Barsky clip of the segment against the rectangle.
    double t0 = 0.0, t1 = 1.0;
    bool hit = true;
    const double p[4] = {-d.x, d.x, -d.y, d.y};
    const double q[4] = {la.x + he.x, he.x - la.x, la.y + he.y, he.y - la.y};
    for (int i = 0; i < 4 && hit; ++i) {
        if (p[i] == 0.0) {
            if (q[i] < 0.0) hit = false;
        } else {
            const double r = q[i] / p[i];
            if (p[i] < 0.0) {
                if (r > t1) hit = false;
                else if (r > t0) t0 = r;
            } else {
                if (r < t0) hit = false;
                else if (r < t1) t1 = r;
            }
        }
    }

    SegRectDistance out;
    if (hit) {
        // Interval [t0,t1] of the segment lies inside the rectangle. The
        // inside SDF max(|lx|-hx, |ly|-hy) is piecewise linear along the
        // segment; its minimum is at an endpoint or a breakpoint.
        std::vector<double> cand{t0, t1};
        auto add = [&](double t) {
            if (t > t0 && t < t1) cand.push_back(t);
        };
        if (d.x != 0.0) add(-la.x / d.x);  // lx = 0
        if (d.y != 0.0) add(-la.y / d.y);  // ly = 0
        // crossings +-lx - hx = +-ly - hy
        for (const double sx : {1.0, -1.0}) {
            for (const double sy : {1.0, -1.0}) {
                const double denom = sx * d.x - sy * d.y;
                if (denom != 0.0) add((sy * la.y - he.y - sx * la.x + he.x) / denom);
            }
        }
        double best = std::numeric_limits<double>::infinity();
        double best_t = t0;
        for (const double t : cand) {
            const Vec2 l = la + d * t;
            const double v = std::max(std::abs(l.x) - he.x, std::abs(l.y) - he.y);
            if (v < best) {
                best = v;
                best_t = t;
            }
        }
        const Vec2 l = la + d * best_t;
        out.dist = best;
        out.t = best_t;
        if (std::abs(l.x) - he.x >= std::abs(l.y) - he.y) {
            out.grad_p = {l.x >= 0.0 ? 1.0 : -1.0, 0.0};
        } else {
            out.grad_p = {0.0, l.y >= 0.0 ? 1.0 : -1.0};
        }
        return out;
    }

    // Disjoint: minimum distance is between the segment and one of the four
    // rectangle edges.
    const Vec2 corners[4] = {{rect.max.x, rect.max.y},
                             {rect.min.x, rect.max.y},
                             {rect.min.x, rect.min.y},
                             {rect.max.x, rect.min.y}};
    double best2 = std::numeric_limits<double>::infinity();
    double best_s = 0.0;
    Vec2 best_c1, best_c2;
    for (int i = 0; i < 4; ++i) {
        double s, t2;
        Vec2 c1, c2;
        const double d2 = segment_segment_closest(a, b, corners[i], corners[(i + 1) % 4], &s, &t2, &c1, &c2);
        if (d2 < best2) {
            best2 = d2;
            best_s = s;
            best_c1 = c1;
            best_c2 = c2;
        }
    }
    out.dist = std::sqrt(best2);
    out.t = best_s;
    out.grad_p = out.dist > 0.0 ? (best_c1 - best_c2) / out.dist : Vec2{0.0, 1.0};
    return out;
}

double segment_distance(const Shape& shape, const Vec2& a, const Vec2& b) {
    return std::visit(
        [&](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Circle>) {
                return point_segment_distance(s.center, a, b) - s.radius;
            } else if constexpr (std::is_same_v<T, BoxShape>) {
                if (s.angle == 0.0) {
                    const Aabb rect{s.center - s.half_extents, s.center + s.half_extents};
                    return segment_rect_distance(a, b, rect).dist;
                }
                const Shape sh = s;
                return segment_min_lipschitz(
                    [&](double t) { return point_distance(sh, a + (b - a) * t); }, (b - a).norm());
            } else {
                if (s.a == s.b) return point_segment_distance(s.a, a, b) - s.radius;
                return std::sqrt(segment_segment_closest(a, b, s.a, s.b)) - s.radius;
            }
        },
        shape);
}

double perimeter(const Shape& shape) {
    return std::visit(
        [&](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Circle>) {
                return 2.0 * M_PI * s.radius;
            } else if constexpr (std::is_same_v<T, BoxShape>) {
                return 4.0 * (s.half_extents.x + s.half_extents.y);
            } else {
                if (s.a == s.b) return 2.0 * M_PI * s.radius;
                return 2.0 * (s.b - s.a).norm() + 2.0 * M_PI * s.radius;
            }
        },
        shape);
}

Vec2 boundary_point(const Shape& shape, double s) {
    return std::visit(
        [&](const auto& sh) -> Vec2 {
            using T = std::decay_t<decltype(sh)>;
            if constexpr (std::is_same_v<T, Circle>) {
                const double ang = s / sh.radius;
                return sh.center + Vec2{sh.radius * std::cos(ang), sh.radius * std::sin(ang)};
            } else if constexpr (std::is_same_v<T, BoxShape>) {
                const auto corners = box_corners(sh);
                double rem = s;
                for (int i = 0; i < 4; ++i) {
                    const Vec2 e = corners[(i + 1) % 4] - corners[i];
                    const double len = e.norm();
                    if (rem <= len || i == 3) return corners[i] + e * (rem / std::max(len, 1e-300));
                    rem -= len;
                }
                return corners[0];
            } else {
                if (sh.a == sh.b) {
                    const double ang = s / sh.radius;
                    return sh.a + Vec2{sh.radius * std::cos(ang), sh.radius * std::sin(ang)};
                }
                const Vec2 ab = sh.b - sh.a;
                const double len = ab.norm();
                const Vec2 u = ab / len;
                const Vec2 n = u.rot90();
                const double cap = M_PI * sh.radius;
                double rem = s;
                if (rem < len) return sh.a + u * rem + n * sh.radius;  // side 1
                rem -= len;
                if (rem < cap) {  // cap at b, sweeping from +n to -n
                    const double ang = rem / sh.radius;
                    return sh.b + rotate(n, -ang) * sh.radius;
                }
                rem -= cap;
                if (rem < len) return sh.b - u * rem - n * sh.radius;  // side 2
                rem -= len;
                const double ang = rem / sh.radius;  // cap at a
                return sh.a + rotate(n * -1.0, -ang) * sh.radius;
            }
        },
        shape);
}

std::vector<Vec2> sample_boundary(const Shape& shape, int n, double noise_sigma, double dropout,
                                  std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_boundary: n must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0)
        throw std::invalid_argument("sample_boundary: dropout must be in [0,1)");
    const double per = perimeter(shape);
    Rng rng(seed);
    std::vector<Vec2> pts;
    pts.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        if (dropout > 0.0 && rng.bernoulli(dropout)) continue;
        Vec2 p = boundary_point(shape, per * static_cast<double>(k) / static_cast<double>(n));
        if (noise_sigma > 0.0) {
            p.x += noise_sigma * rng.normal();
            p.y += noise_sigma * rng.normal();
        }
        pts.push_back(p);
    }
    return pts;
}

double shape_clearance(const Shape& s1, const Shape& s2) {
    // circle/capsule reduce to point/segment queries against the other shape
    if (const auto* c = std::get_if<Circle>(&s1)) return point_distance(s2, c->center) - c->radius;
    if (const auto* c = std::get_if<Circle>(&s2)) return point_distance(s1, c->center) - c->radius;
    if (const auto* cap = std::get_if<CapsuleShape>(&s1))
        return segment_distance(s2, cap->a, cap->b) - cap->radius;
    if (const auto* cap = std::get_if<CapsuleShape>(&s2))
        return segment_distance(s1, cap->a, cap->b) - cap->radius;
    // box vs box: edges of one against the other, both ways, plus containment
    const auto& b1 = std::get<BoxShape>(s1);
    const auto& b2 = std::get<BoxShape>(s2);
    double best = std::min(point_distance(s2, b1.center), point_distance(s1, b2.center));
    const auto c1 = box_corners(b1);
    const auto c2 = box_corners(b2);
    for (int i = 0; i < 4; ++i) {
        best = std::min(best, segment_distance(s2, c1[i], c1[(i + 1) % 4]));
        best = std::min(best, segment_distance(s1, c2[i], c2[(i + 1) % 4]));
    }
    return best;
}

Vec2 shape_centroid(const Shape& shape) {
    return std::visit(
        [&](const auto& s) -> Vec2 {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Circle>) return s.center;
            else if constexpr (std::is_same_v<T, BoxShape>) return s.center;
            else return (s.a + s.b) * 0.5;
        },
        shape);
}

Aabb shape_aabb(const Shape& shape) {
    return std::visit(
        [&](const auto& s) -> Aabb {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Circle>) {
                return {s.center - Vec2{s.radius, s.radius}, s.center + Vec2{s.radius, s.radius}};
            } else if constexpr (std::is_same_v<T, BoxShape>) {
                const double c = std::abs(std::cos(s.angle)), sn = std::abs(std::sin(s.angle));
                const Vec2 e{c * s.half_extents.x + sn * s.half_extents.y,
                             sn * s.half_extents.x + c * s.half_extents.y};
                return {s.center - e, s.center + e};
            } else {
                const Vec2 lo{std::min(s.a.x, s.b.x) - s.radius, std::min(s.a.y, s.b.y) - s.radius};
                const Vec2 hi{std::max(s.a.x, s.b.x) + s.radius, std::max(s.a.y, s.b.y) + s.radius};
                return {lo, hi};
            }
        },
        shape);
}

std::string family_name(EnvFamily f) {
    switch (f) {
        case EnvFamily::F1: return "F1";
        case EnvFamily::F2: return "F2";
        case EnvFamily::F3: return "F3";
        case EnvFamily::F4: return "F4";
        case EnvFamily::F5: return "F5";
        case EnvFamily::F6: return "F6";
    }
    throw std::invalid_argument("bad family");
}

EnvFamily family_from_name(const std::string& name) {
    for (int i = 1; i <= 6; ++i) {
        if (name == "F" + std::to_string(i)) return static_cast<EnvFamily>(i);
    }
    throw std::invalid_argument("unknown environment family: " + name);
}

namespace {

using nlohmann::json;

json vec_to_json(const Vec2& v) { return json::array({v.x, v.y}); }

Vec2 vec_from_json(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

json shape_to_json(const Shape& shape) {
    return std::visit(
        [&](const auto& s) -> json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Circle>) {
                return {{"kind", "circle"}, {"center", vec_to_json(s.center)}, {"radius", s.radius}};
            } else if constexpr (std::is_same_v<T, BoxShape>) {
                return {{"kind", "box"},
                        {"center", vec_to_json(s.center)},
                        {"half_extents", vec_to_json(s.half_extents)},
                        {"angle", s.angle}};
            } else {
                return {{"kind", "capsule"},
                        {"a", vec_to_json(s.a)},
                        {"b", vec_to_json(s.b)},
                        {"radius", s.radius}};
            }
        },
        shape);
}

Shape shape_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "circle") {
        Circle c{vec_from_json(j.at("center")), j.at("radius").get<double>()};
        if (c.radius <= 0.0) throw std::invalid_argument("circle radius must be positive");
        return c;
    }
    if (kind == "box") {
        BoxShape b{vec_from_json(j.at("center")), vec_from_json(j.at("half_extents")),
                   j.at("angle").get<double>()};
        if (b.half_extents.x <= 0.0 || b.half_extents.y <= 0.0)
            throw std::invalid_argument("box half extents must be positive");
        return b;
    }
    if (kind == "capsule") {
        CapsuleShape c{vec_from_json(j.at("a")), vec_from_json(j.at("b")), j.at("radius").get<double>()};
        if (c.radius < 0.0) throw std::invalid_argument("capsule radius must be nonnegative");
        return c;
    }
    throw std::invalid_argument("unknown shape kind: " + kind);
}

}  // namespace

std::string scene_to_json(const Scene& scene) {
    json j;
    j["workspace"] = {{"min", vec_to_json(scene.workspace.min)}, {"max", vec_to_json(scene.workspace.max)}};
    j["table_y"] = scene.table_y;
    j["family"] = family_name(scene.family);
    j["target"] = shape_to_json(scene.target);
    json obs = json::array();
    for (const auto& o : scene.obstacles) obs.push_back(shape_to_json(o));
    j["obstacles"] = obs;
    return j.dump(2);
}

Scene scene_from_json(const std::string& text) {
    const json j = json::parse(text);
    Scene scene;
    scene.workspace.min = vec_from_json(j.at("workspace").at("min"));
    scene.workspace.max = vec_from_json(j.at("workspace").at("max"));
    scene.table_y = j.at("table_y").get<double>();
    scene.family = family_from_name(j.at("family").get<std::string>());
    scene.target = shape_from_json(j.at("target"));
    for (const auto& o : j.at("obstacles")) scene.obstacles.push_back(shape_from_json(o));
    return scene;
}

}  // namespace skillstart
