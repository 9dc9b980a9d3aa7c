#include "skillstart/arm.hpp"

#include <cmath>

#include "doctest.h"
#include "skillstart/rng.hpp"
#include "support/oracles.hpp"

using namespace skillstart;

namespace {

ArmModel two_link() {
    ArmModel arm;
    arm.base = {0.0, 0.0};
    arm.link_lengths = {1.0, 1.0};
    arm.link_radius = 0.05;
    arm.joint_limits.assign(2, {-M_PI, M_PI});
    arm.key_point_spec = {{1, 0.5}, {2, 0.5}, {2, 1.0}};
    return arm;
}

ArmModel random_arm(Rng& rng) {
    ArmModel arm;
    arm.base = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
    const int n = static_cast<int>(rng.uniform_int(2, 5));
    for (int i = 0; i < n; ++i) arm.link_lengths.push_back(rng.uniform(0.2, 0.6));
    arm.link_radius = 0.04;
    arm.joint_limits.assign(static_cast<std::size_t>(n), {-2.8, 2.8});
    for (int i = 1; i <= n; ++i) arm.key_point_spec.push_back({i, 0.5});
    arm.key_point_spec.push_back({n, 1.0});
    return arm;
}

JointVec random_q(const ArmModel& arm, Rng& rng) {
    JointVec q(static_cast<std::size_t>(arm.dof()));
    for (auto& v : q) v = rng.uniform(-2.8, 2.8);
    return q;
}

}  // namespace

TEST_CASE("forward kinematics fixtures") {
    const ArmModel arm = two_link();
    {
        const auto fk = forward_kinematics(arm, {0.0, 0.0});
        CHECK(fk.joints.back().x == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(fk.joints.back().y == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(fk.ee_heading == doctest::Approx(0.0));
    }
    {
        const auto fk = forward_kinematics(arm, {M_PI / 2, 0.0});
        CHECK(fk.joints.back().x == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(fk.joints.back().y == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(fk.ee_heading == doctest::Approx(M_PI / 2));
    }
    {
        const auto fk = forward_kinematics(arm, {M_PI / 2, -M_PI / 2});
        CHECK(fk.joints.back().x == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(fk.joints.back().y == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(fk.ee_heading == doctest::Approx(0.0));
    }
    CHECK_THROWS_AS(forward_kinematics(arm, {0.0}), std::invalid_argument);
}

TEST_CASE("key points fixtures") {
    const ArmModel arm = two_link();
    {
        const auto kp = key_points(arm, {0.0, 0.0});
        REQUIRE(kp.positions.size() == 3);
        CHECK(kp.positions[0].x == doctest::Approx(0.5));
        CHECK(kp.positions[0].y == doctest::Approx(0.0));
        CHECK(kp.positions[1].x == doctest::Approx(1.5));
        CHECK(kp.positions[2].x == doctest::Approx(2.0));
    }
    {
        const auto kp = key_points(arm, {M_PI / 2, 0.0});
        CHECK(kp.positions[0].x == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(kp.positions[0].y == doctest::Approx(0.5));
        CHECK(kp.positions[1].y == doctest::Approx(1.5));
        CHECK(kp.positions[2].y == doctest::Approx(2.0));
    }
}

TEST_CASE("key points are affine in the joint positions") {
    Rng rng(31);
    for (int i = 0; i < 200; ++i) {
        const ArmModel arm = random_arm(rng);
        const JointVec q = random_q(arm, rng);
        const auto fk = forward_kinematics(arm, q);
        const auto kp = key_points(arm, q);
        for (std::size_t k = 0; k < arm.key_point_spec.size(); ++k) {
            const auto& [link, frac] = arm.key_point_spec[k];
            const Vec2 expect = fk.joints[static_cast<std::size_t>(link) - 1] +
                                (fk.joints[static_cast<std::size_t>(link)] -
                                 fk.joints[static_cast<std::size_t>(link) - 1]) *
                                    frac;
            CHECK(kp.positions[k].x == doctest::Approx(expect.x).epsilon(1e-12));
            CHECK(kp.positions[k].y == doctest::Approx(expect.y).epsilon(1e-12));
        }
    }
}

TEST_CASE("key point jacobian fixtures") {
    const ArmModel arm = two_link();
    const auto jac = key_point_jacobian(arm, {0.0, 0.0});
    // EE tip: d/dq1 = rot90((2,0)) = (0,2); d/dq2 = rot90((1,0)) = (0,1)
    CHECK(jac[2][0].x == doctest::Approx(0.0));
    CHECK(jac[2][0].y == doctest::Approx(2.0));
    CHECK(jac[2][1].x == doctest::Approx(0.0));
    CHECK(jac[2][1].y == doctest::Approx(1.0));
    // key point on link 1 is unaffected by the distal joint
    CHECK(jac[0][1].x == 0.0);
    CHECK(jac[0][1].y == 0.0);
}

TEST_CASE("key point jacobian matches central finite differences") {
    Rng rng(202);
    int cases = 0;
    double worst = 0.0;
    while (cases < 1000) {
        const ArmModel arm = random_arm(rng);
        const JointVec q = random_q(arm, rng);
        const auto jac = key_point_jacobian(arm, q);
        const double h = 1e-6;
        for (std::size_t k = 0; k < arm.key_point_spec.size(); ++k) {
            for (int j = 0; j < arm.dof(); ++j) {
                JointVec qp = q, qm = q;
                qp[static_cast<std::size_t>(j)] += h;
                qm[static_cast<std::size_t>(j)] -= h;
                const auto pp = key_points(arm, qp).positions[k];
                const auto pm = key_points(arm, qm).positions[k];
                const Vec2 fd{(pp.x - pm.x) / (2 * h), (pp.y - pm.y) / (2 * h)};
                worst = std::max(worst, testing::max_rel_err({jac[k][static_cast<std::size_t>(j)].x,
                                                              jac[k][static_cast<std::size_t>(j)].y},
                                                             {fd.x, fd.y}, 1e-4));
            }
        }
        ++cases;
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("fk is translation-equivariant in the base") {
    Rng rng(55);
    for (int i = 0; i < 200; ++i) {
        ArmModel arm = random_arm(rng);
        arm.base = {0.0, 0.0};
        const JointVec q = random_q(arm, rng);
        const Vec2 t{rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)};
        const auto fk0 = forward_kinematics(arm, q);
        ArmModel moved = arm;
        moved.base = t;
        const auto fk1 = forward_kinematics(moved, q);
        for (std::size_t j = 0; j < fk0.joints.size(); ++j) {
            // both sides are fl(offset + t): bit-identical
            CHECK(fk1.joints[j].x == fk0.joints[j].x + t.x);
            CHECK(fk1.joints[j].y == fk0.joints[j].y + t.y);
        }
    }
}

TEST_CASE("arm clearance fixtures") {
    const ArmModel arm = two_link();
    const std::vector<Shape> obs{Circle{{1, 2}, 0.5}};
    const auto m = clearance_matrix(arm, {0.0, 0.0}, obs);
    REQUIRE(m.size() == 2);
    CHECK(m[0][0] == doctest::Approx(1.45).epsilon(1e-12));

    const auto empty = clearance_matrix(arm, {0.0, 0.0}, {});
    CHECK(empty[0].empty());
    CHECK_FALSE(in_collision(arm, {0.0, 0.0}, {}, -10.0));
}

TEST_CASE("collision predicate matches a dense point-containment sweep") {
    Rng rng(606);
    int collisions_seen = 0;
    for (int i = 0; i < 500; ++i) {
        const ArmModel arm = two_link();
        const JointVec q = random_q(arm, rng);
        const std::vector<Shape> obs{testing::random_shape(rng)};
        const auto fk = forward_kinematics(arm, q);
        // oracle: 200 samples per link against an inflated containment test
        bool oracle_hit = false;
        for (int l = 0; l < arm.dof(); ++l) {
            for (int s = 0; s <= 200; ++s) {
                const double t = static_cast<double>(s) / 200.0;
                const Vec2 p = fk.joints[static_cast<std::size_t>(l)] +
                               (fk.joints[static_cast<std::size_t>(l) + 1] -
                                fk.joints[static_cast<std::size_t>(l)]) *
                                   t;
                if (point_distance(obs[0], p) < arm.link_radius) oracle_hit = true;
            }
        }
        const auto m = clearance_matrix(arm, q, obs);
        double min_clear = 1e9;
        for (const auto& row : m) min_clear = std::min(min_clear, row[0]);
        if (min_clear < -1e-4) {
            CHECK(oracle_hit);
            ++collisions_seen;
        }
        if (min_clear > 1e-4) CHECK_FALSE(oracle_hit);
    }
    CHECK(collisions_seen > 10);
}

TEST_CASE("camera cone fixtures") {
    const ArmModel arm = two_link();
    CHECK(camera_cone_check(arm, {0.0, 0.0}, {3.0, 0.0}, M_PI / 6));
    CHECK_FALSE(camera_cone_check(arm, {0.0, 0.0}, {2.0, 5.0}, M_PI / 6));
    // boundary is inclusive: perpendicular target at half angle pi/2
    CHECK(camera_cone_check(arm, {0.0, 0.0}, {2.0, 5.0}, M_PI / 2));
}

TEST_CASE("arm json round trip") {
    const ArmModel arm = make_default_arm();
    const ArmModel back = arm_from_json(arm_to_json(arm));
    CHECK(back.link_lengths == arm.link_lengths);
    CHECK(back.link_radius == arm.link_radius);
    CHECK(back.joint_limits == arm.joint_limits);
    CHECK(back.key_point_spec == arm.key_point_spec);
    CHECK(arm_to_json(back) == arm_to_json(arm));
}

TEST_CASE("default arm shape") {
    const ArmModel arm = make_default_arm();
    CHECK(arm.dof() == 4);
    CHECK(arm.num_key_points() == 5);
    CHECK(arm.reach() == doctest::Approx(1.4));
    CHECK(arm.key_point_spec.back() == std::pair<int, double>{4, 1.0});
}
