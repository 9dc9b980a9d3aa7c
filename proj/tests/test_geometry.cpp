#include "skillstart/geometry.hpp"

#include <cmath>

#include "doctest.h"
#include "skillstart/rng.hpp"
#include "support/oracles.hpp"

using namespace skillstart;

TEST_CASE("point_distance fixtures") {
    CHECK(point_distance(Circle{{0, 0}, 1.0}, {2, 0}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(point_distance(BoxShape{{0, 0}, {1, 1}, 0.0}, {3, 0}) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(point_distance(Circle{{0, 0}, 1.0}, {0, 0}) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("segment_distance fixtures") {
    CHECK(segment_distance(Circle{{1, 2}, 0.5}, {0, 0}, {2, 0}) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(segment_distance(Circle{{1, 0}, 0.1}, {0, 0}, {2, 0}) == doctest::Approx(-0.1).epsilon(1e-12));
    CHECK(segment_distance(BoxShape{{1, 0}, {1, 1}, 0.0}, {0, 3}, {2, 3}) ==
          doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("point_distance sign matches containment oracle") {
    Rng rng(12345);
    int checked = 0;
    for (int i = 0; i < 100000; ++i) {
        const Shape s = testing::random_shape(rng);
        const Vec2 p{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
        const double d = point_distance(s, p);
        if (std::abs(d) < 1e-12) continue;  // boundary: sign not defined
        ++checked;
        CHECK((d < 0.0) == testing::contains_point(s, p));
    }
    CHECK(checked > 99000);
}

TEST_CASE("segment_distance is bounded by endpoint distances") {
    Rng rng(777);
    for (int i = 0; i < 10000; ++i) {
        const Shape s = testing::random_shape(rng);
        const Vec2 a{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
        const Vec2 b{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
        const double sd = segment_distance(s, a, b);
        const double bound = std::min(point_distance(s, a), point_distance(s, b));
        CHECK(sd <= bound + 1e-9);
    }
}

TEST_CASE("rotated box segment distance agrees with rotated-frame oracle") {
    // Oracle: rotate the segment into the box frame and use the exact
    // axis-aligned path.
    Rng rng(4242);
    for (int i = 0; i < 2000; ++i) {
        const Vec2 c{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        const Vec2 he{rng.uniform(0.05, 0.5), rng.uniform(0.05, 0.5)};
        const double ang = rng.uniform(-M_PI, M_PI);
        const Vec2 a{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
        const Vec2 b{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
        const BoxShape box{c, he, ang};
        auto to_local = [&](const Vec2& p) {
            const Vec2 d = p - c;
            const double ca = std::cos(ang), sa = std::sin(ang);
            return Vec2{ca * d.x + sa * d.y, -sa * d.x + ca * d.y};
        };
        const double oracle = segment_distance(BoxShape{{0, 0}, he, 0.0}, to_local(a), to_local(b));
        const double got = segment_distance(Shape{box}, a, b);
        CHECK(got == doctest::Approx(oracle).epsilon(1e-7));
    }
}

TEST_CASE("sample_boundary noiseless points lie on the boundary") {
    const auto pts = sample_boundary(Circle{{0, 0}, 1.0}, 100, 0.0, 0.0, 1);
    REQUIRE(pts.size() == 100);
    for (const auto& p : pts) CHECK(std::abs(p.norm() - 1.0) < 1e-9);

    Rng rng(99);
    for (int i = 0; i < 50; ++i) {
        const Shape s = testing::random_shape(rng);
        for (const auto& p : sample_boundary(s, 64, 0.0, 0.0, 7)) {
            CHECK(std::abs(point_distance(s, p)) < 1e-9);
        }
    }
}

TEST_CASE("sample_boundary dropout is seeded and deterministic") {
    const auto a = sample_boundary(Circle{{0, 0}, 1.0}, 100, 0.0, 0.5, 42);
    const auto b = sample_boundary(Circle{{0, 0}, 1.0}, 100, 0.0, 0.5, 42);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    // binomial count: 50 +- 5 sigma (sigma = sqrt(100*0.25) = 5)
    CHECK(a.size() >= 25);
    CHECK(a.size() <= 75);
}

TEST_CASE("sample_boundary noise matches the half-normal radial oracle") {
    // Monte-Carlo oracle: radial error of an isotropic Gaussian perturbation
    // of the unit circle is approximately half-normal with mean
    // sigma*sqrt(2/pi) and variance sigma^2*(1 - 2/pi).
    const int n = 10000;
    const double sigma = 0.01;
    const auto pts = sample_boundary(Circle{{0, 0}, 1.0}, n, sigma, 0.0, 2024);
    REQUIRE(static_cast<int>(pts.size()) == n);
    double mean = 0.0;
    for (const auto& p : pts) mean += std::abs(p.norm() - 1.0);
    mean /= static_cast<double>(pts.size());
    const double expect = sigma * std::sqrt(2.0 / M_PI);
    const double se = sigma * std::sqrt((1.0 - 2.0 / M_PI) / static_cast<double>(n));
    CHECK(std::abs(mean - expect) < 3.0 * se);
}

TEST_CASE("sample_boundary rejects bad arguments") {
    CHECK_THROWS_AS(sample_boundary(Circle{{0, 0}, 1.0}, 10, 0.0, 1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(sample_boundary(Circle{{0, 0}, 1.0}, 0, 0.0, 0.0, 1), std::invalid_argument);
}

TEST_CASE("segment_rect_distance agrees with the axis-aligned box SDF") {
    Rng rng(5150);
    for (int i = 0; i < 5000; ++i) {
        const Vec2 c{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        const Vec2 he{rng.uniform(0.05, 0.6), rng.uniform(0.05, 0.6)};
        const Aabb rect{c - he, c + he};
        const Vec2 a{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
        const Vec2 b{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
        const auto res = segment_rect_distance(a, b, rect);
        const double viaShape = segment_distance(BoxShape{c, he, 0.0}, a, b);
        CHECK(res.dist == doctest::Approx(viaShape).epsilon(1e-9));
        // minimizing point evaluates to the reported distance
        const Vec2 p = a + (b - a) * res.t;
        CHECK(point_distance(BoxShape{c, he, 0.0}, p) == doctest::Approx(res.dist).epsilon(1e-7));
    }
}

TEST_CASE("shape_clearance sign matches pairwise sampling") {
    Rng rng(31337);
    for (int i = 0; i < 300; ++i) {
        const Shape s1 = testing::random_shape(rng);
        const Shape s2 = testing::random_shape(rng);
        const double cl = shape_clearance(s1, s2);
        // oracle: dense boundary sampling of s1 against s2 and vice versa
        double best = 1e9;
        for (const auto& p : sample_boundary(s1, 256, 0.0, 0.0, 5)) best = std::min(best, point_distance(s2, p));
        for (const auto& p : sample_boundary(s2, 256, 0.0, 0.0, 5)) best = std::min(best, point_distance(s1, p));
        if (cl > 0.02) CHECK(best > 0.0);
        if (cl < -0.02) CHECK(best < 0.02);
    }
}

TEST_CASE("scene json round trip") {
    Scene scene;
    scene.workspace = {{-1.5, 0.0}, {1.5, 1.2}};
    scene.table_y = 0.0;
    scene.family = EnvFamily::F3;
    scene.target = Circle{{0.4, 0.3}, 0.05};
    scene.obstacles.push_back(CapsuleShape{{0.2, 0.1}, {0.6, 0.1}, 0.015});
    scene.obstacles.push_back(BoxShape{{-0.3, 0.2}, {0.1, 0.05}, 0.3});
    const auto text = scene_to_json(scene);
    const Scene back = scene_from_json(text);
    CHECK(back.family == scene.family);
    CHECK(back.table_y == scene.table_y);
    CHECK(back.obstacles.size() == scene.obstacles.size());
    CHECK(std::get<Circle>(back.target).radius == std::get<Circle>(scene.target).radius);
    CHECK(scene_to_json(back) == text);
}
