#pragma once

#include <string>
#include <utility>
#include <vector>

namespace posefuse {

using JointPair = std::pair<int, int>;

/// Skeleton topology shared by every stage: joint names, limb edges, the
/// symmetric left/right pairs that must not collide, and the PCP part class
/// of each limb.
struct BodyModel {
  std::vector<std::string> joints;
  std::vector<JointPair> limbs;
  std::vector<JointPair> collision_pairs;  // (left, right)
  std::vector<std::string> part_classes;   // report column order
  std::vector<int> limb_part;              // per limb, index into part_classes
  std::vector<int> head_joints;            // shifted by the evaluation head offset

  int n_joints() const { return static_cast<int>(joints.size()); }
  /// -1 when absent.
  int joint_index(const std::string& name) const;
  /// Symmetric partner from collision_pairs, or -1.
  int partner(int joint) const;

  /// Throws ConfigError when the topology is inconsistent.
  void validate() const;
};

/// 14-joint layout: head_top, neck, l/r shoulder, l/r elbow, l/r wrist,
/// l/r hip, l/r knee, l/r ankle; 13 limbs; 6 collision pairs; the six PCP
/// classes Head, Torso, Upper Arm, Forearm, Thigh, Shin.
BodyModel default_body_model();

/// Indices into the default layout.
namespace joint {
inline constexpr int head_top = 0;
inline constexpr int neck = 1;
inline constexpr int l_shoulder = 2;
inline constexpr int r_shoulder = 3;
inline constexpr int l_elbow = 4;
inline constexpr int r_elbow = 5;
inline constexpr int l_wrist = 6;
inline constexpr int r_wrist = 7;
inline constexpr int l_hip = 8;
inline constexpr int r_hip = 9;
inline constexpr int l_knee = 10;
inline constexpr int r_knee = 11;
inline constexpr int l_ankle = 12;
inline constexpr int r_ankle = 13;
inline constexpr int count = 14;
}  // namespace joint

}  // namespace posefuse
