#include "skillstart/arm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace skillstart {

double ArmModel::reach() const {
    return std::accumulate(link_lengths.begin(), link_lengths.end(), 0.0);
}

ArmModel make_default_arm() {
    ArmModel arm;
    arm.base = {0.0, 0.0};
    arm.link_lengths = {0.5, 0.4, 0.3, 0.2};
    arm.link_radius = 0.04;
    arm.joint_limits.assign(4, {-2.8, 2.8});
    arm.key_point_spec = {{1, 0.5}, {2, 0.5}, {3, 0.5}, {4, 0.5}, {4, 1.0}};
    return arm;
}

std::vector<Vec2> fk_offsets(const ArmModel& arm, const JointVec& q) {
    const int n = arm.dof();
    if (static_cast<int>(q.size()) != n)
        throw std::invalid_argument("forward_kinematics: joint vector size mismatch");
    std::vector<Vec2> off(static_cast<std::size_t>(n) + 1);
    off[0] = {0.0, 0.0};
    double theta = 0.0;
    for (int i = 0; i < n; ++i) {
        theta += q[static_cast<std::size_t>(i)];
        const double l = arm.link_lengths[static_cast<std::size_t>(i)];
        off[static_cast<std::size_t>(i) + 1] =
            off[static_cast<std::size_t>(i)] + Vec2{l * std::cos(theta), l * std::sin(theta)};
    }
    return off;
}

FkResult forward_kinematics(const ArmModel& arm, const JointVec& q) {
    FkResult fk;
    const auto off = fk_offsets(arm, q);
    fk.joints.resize(off.size());
    for (std::size_t i = 0; i < off.size(); ++i) fk.joints[i] = arm.base + off[i];
    fk.ee_heading = std::accumulate(q.begin(), q.end(), 0.0);
    return fk;
}

std::vector<Vec2> key_point_offsets(const ArmModel& arm, const JointVec& q) {
    const auto off = fk_offsets(arm, q);
    std::vector<Vec2> pts;
    pts.reserve(arm.key_point_spec.size());
    for (const auto& [link, frac] : arm.key_point_spec) {
        const auto& a = off[static_cast<std::size_t>(link) - 1];
        const auto& b = off[static_cast<std::size_t>(link)];
        pts.push_back(a + (b - a) * frac);
    }
    return pts;
}

KeyPointSet key_points(const ArmModel& arm, const JointVec& q) {
    KeyPointSet set;
    set.positions = key_point_offsets(arm, q);
    for (auto& p : set.positions) p = arm.base + p;
    return set;
}

KeyPointJacobian key_point_jacobian(const ArmModel& arm, const JointVec& q) {
    const auto fk = forward_kinematics(arm, q);
    const int L = arm.dof();
    KeyPointJacobian jac(arm.key_point_spec.size(), std::vector<Vec2>(static_cast<std::size_t>(L)));
    for (std::size_t k = 0; k < arm.key_point_spec.size(); ++k) {
        const auto& [link, frac] = arm.key_point_spec[k];
        const Vec2 a = fk.joints[static_cast<std::size_t>(link) - 1];
        const Vec2 b = fk.joints[static_cast<std::size_t>(link)];
        const Vec2 p = a + (b - a) * frac;
        for (int j = 1; j <= L; ++j) {
            if (j <= link) {
                // joint j pivots at p_{j-1}
                jac[k][static_cast<std::size_t>(j) - 1] =
                    (p - fk.joints[static_cast<std::size_t>(j) - 1]).rot90();
            }
        }
    }
    return jac;
}

JointPosJacobian joint_position_jacobian(const ArmModel& arm, const JointVec& q) {
    const auto fk = forward_kinematics(arm, q);
    const int L = arm.dof();
    JointPosJacobian jac(fk.joints.size(), std::vector<Vec2>(static_cast<std::size_t>(L)));
    for (std::size_t i = 1; i < fk.joints.size(); ++i) {
        for (int j = 1; j <= static_cast<int>(i); ++j) {
            jac[i][static_cast<std::size_t>(j) - 1] =
                (fk.joints[i] - fk.joints[static_cast<std::size_t>(j) - 1]).rot90();
        }
    }
    return jac;
}

std::vector<std::vector<double>> clearance_matrix(const ArmModel& arm, const JointVec& q,
                                                  const std::vector<Shape>& obstacles) {
    const auto fk = forward_kinematics(arm, q);
    const int L = arm.dof();
    std::vector<std::vector<double>> m(static_cast<std::size_t>(L),
                                       std::vector<double>(obstacles.size()));
    for (int l = 0; l < L; ++l) {
        const Vec2& a = fk.joints[static_cast<std::size_t>(l)];
        const Vec2& b = fk.joints[static_cast<std::size_t>(l) + 1];
        for (std::size_t j = 0; j < obstacles.size(); ++j) {
            m[static_cast<std::size_t>(l)][j] = segment_distance(obstacles[j], a, b) - arm.link_radius;
        }
    }
    return m;
}

bool in_collision(const ArmModel& arm, const JointVec& q, const std::vector<Shape>& obstacles,
                  double table_y) {
    const auto fk = forward_kinematics(arm, q);
    const int L = arm.dof();
    for (int l = 0; l < L; ++l) {
        const Vec2& a = fk.joints[static_cast<std::size_t>(l)];
        const Vec2& b = fk.joints[static_cast<std::size_t>(l) + 1];
        if (std::min(a.y, b.y) < table_y - arm.link_radius) return true;
        for (const auto& obs : obstacles) {
            if (segment_distance(obs, a, b) - arm.link_radius < 0.0) return true;
        }
    }
    return false;
}

bool within_limits(const ArmModel& arm, const JointVec& q, double tol) {
    for (std::size_t j = 0; j < q.size(); ++j) {
        if (q[j] < arm.joint_limits[j][0] - tol || q[j] > arm.joint_limits[j][1] + tol) return false;
    }
    return true;
}

JointVec clamp_to_limits(const ArmModel& arm, JointVec q) {
    for (std::size_t j = 0; j < q.size(); ++j) {
        q[j] = std::clamp(q[j], arm.joint_limits[j][0], arm.joint_limits[j][1]);
    }
    return q;
}

bool camera_cone_check(const ArmModel& arm, const JointVec& q, const Vec2& target_centroid,
                       double half_angle) {
    const auto fk = forward_kinematics(arm, q);
    const Vec2 ee = fk.joints.back();
    const Vec2 to_target = target_centroid - ee;
    if (to_target.norm2() == 0.0) return false;
    const Vec2 heading{std::cos(fk.ee_heading), std::sin(fk.ee_heading)};
    const double ang = std::atan2(std::abs(heading.cross(to_target)), heading.dot(to_target));
    return ang <= half_angle;
}

std::string arm_to_json(const ArmModel& arm) {
    nlohmann::json j;
    j["base"] = {arm.base.x, arm.base.y};
    j["link_lengths"] = arm.link_lengths;
    j["link_radius"] = arm.link_radius;
    auto limits = nlohmann::json::array();
    for (const auto& lim : arm.joint_limits) limits.push_back({lim[0], lim[1]});
    j["joint_limits"] = limits;
    auto kps = nlohmann::json::array();
    for (const auto& [link, frac] : arm.key_point_spec) kps.push_back({link, frac});
    j["key_point_spec"] = kps;
    return j.dump(2);
}

ArmModel arm_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    ArmModel arm;
    arm.base = {j.at("base").at(0).get<double>(), j.at("base").at(1).get<double>()};
    arm.link_lengths = j.at("link_lengths").get<std::vector<double>>();
    arm.link_radius = j.at("link_radius").get<double>();
    for (const auto& lim : j.at("joint_limits"))
        arm.joint_limits.push_back({lim.at(0).get<double>(), lim.at(1).get<double>()});
    for (const auto& kp : j.at("key_point_spec"))
        arm.key_point_spec.emplace_back(kp.at(0).get<int>(), kp.at(1).get<double>());
    if (arm.dof() < 2) throw std::invalid_argument("arm must have at least two links");
    for (const auto& lim : arm.joint_limits) {
        if (!(lim[0] < lim[1])) throw std::invalid_argument("joint limits must satisfy min < max");
    }
    return arm;
}

}  // namespace skillstart
