#pragma once

#include <array>
#include <utility>
#include <vector>

#include "skillstart/geometry.hpp"

namespace skillstart {

using JointVec = std::vector<double>;

// Wrist-camera half angle shared by data generation, the Naive baseline and
// the optimizer's start filter. The value is a declared default; nothing in
// the pipeline may use a different constant.
inline constexpr double kCameraHalfAngle = M_PI / 6.0;

struct ArmModel {
    Vec2 base;
    std::vector<double> link_lengths;
    double link_radius = 0.04;
    std::vector<std::array<double, 2>> joint_limits;       // per joint [min, max]
    std::vector<std::pair<int, double>> key_point_spec;    // (1-based link index, fraction)

    int dof() const { return static_cast<int>(link_lengths.size()); }
    int num_key_points() const { return static_cast<int>(key_point_spec.size()); }
    double reach() const;
};

// L=4 planar arm: lengths (0.5, 0.4, 0.3, 0.2) m, link radius 0.04 m, limits
// +-2.8 rad, base at the origin on the table line, key points at the four
// link midpoints plus the end-effector tip.
ArmModel make_default_arm();

struct FkResult {
    std::vector<Vec2> joints;  // L+1 positions, joints[0] = base
    double ee_heading = 0.0;   // sum of joint angles
};

FkResult forward_kinematics(const ArmModel& arm, const JointVec& q);

// Joint positions relative to the base. Pure function of q; used wherever
// translation invariance must be exact.
std::vector<Vec2> fk_offsets(const ArmModel& arm, const JointVec& q);

struct KeyPointSet {
    std::vector<Vec2> positions;  // K points; ids are the rows of the K x K identity
};

KeyPointSet key_points(const ArmModel& arm, const JointVec& q);
std::vector<Vec2> key_point_offsets(const ArmModel& arm, const JointVec& q);

// J[k][j] = d p_k / d q_j (exact analytic form; zero for joints distal to the
// key point's link).
using KeyPointJacobian = std::vector<std::vector<Vec2>>;
KeyPointJacobian key_point_jacobian(const ArmModel& arm, const JointVec& q);

// Jacobians of the joint positions p_0..p_L themselves (p_0 is constant).
using JointPosJacobian = std::vector<std::vector<Vec2>>;
JointPosJacobian joint_position_jacobian(const ArmModel& arm, const JointVec& q);

// clearance(l, j) = segment_distance(obstacle_j, p_{l-1}, p_l) - link_radius
std::vector<std::vector<double>> clearance_matrix(const ArmModel& arm, const JointVec& q,
                                                  const std::vector<Shape>& obstacles);

// True iff any clearance entry is negative or any link endpoint drops below
// table_y - link_radius.
bool in_collision(const ArmModel& arm, const JointVec& q, const std::vector<Shape>& obstacles,
                  double table_y);

bool within_limits(const ArmModel& arm, const JointVec& q, double tol = 0.0);
JointVec clamp_to_limits(const ArmModel& arm, JointVec q);

// True iff the angle between the end-effector heading and the direction to
// target_centroid is <= half_angle (inclusive).
bool camera_cone_check(const ArmModel& arm, const JointVec& q, const Vec2& target_centroid,
                       double half_angle);

std::string arm_to_json(const ArmModel& arm);
ArmModel arm_from_json(const std::string& text);

}  // namespace skillstart
