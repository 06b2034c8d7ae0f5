#include "posefuse/body_model.hpp"

#include "posefuse/error.hpp"

#include <set>

namespace posefuse {

int BodyModel::joint_index(const std::string& name) const {
  for (std::size_t i = 0; i < joints.size(); ++i) {
    if (joints[i] == name) return static_cast<int>(i);
  }
  return -1;
}

int BodyModel::partner(int j) const {
  for (const auto& [l, r] : collision_pairs) {
    if (l == j) return r;
    if (r == j) return l;
  }
  return -1;
}

void BodyModel::validate() const {
  const int n = n_joints();
  if (n <= 0) throw ConfigError("body model: no joints");
  auto check = [n](int j, const char* what) {
    if (j < 0 || j >= n) {
      throw ConfigError(std::string("body model: ") + what + " references joint " +
                        std::to_string(j) + " out of range");
    }
  };
  for (const auto& [a, b] : limbs) {
    check(a, "limb");
    check(b, "limb");
    if (a == b) throw ConfigError("body model: limb joins a joint to itself");
  }
  std::set<int> used;
  for (const auto& [l, r] : collision_pairs) {
    check(l, "collision pair");
    check(r, "collision pair");
    if (l == r || !used.insert(l).second || !used.insert(r).second) {
      throw ConfigError("body model: collision pairs must be disjoint");
    }
  }
  if (limb_part.size() != limbs.size()) {
    throw ConfigError("body model: every limb needs a part class");
  }
  for (int p : limb_part) {
    if (p < 0 || p >= static_cast<int>(part_classes.size())) {
      throw ConfigError("body model: limb part class out of range");
    }
  }
  for (int j : head_joints) check(j, "head joint list");
}

BodyModel default_body_model() {
  using namespace joint;
  BodyModel m;
  m.joints = {"head_top", "neck",    "l_shoulder", "r_shoulder", "l_elbow",
              "r_elbow",  "l_wrist", "r_wrist",    "l_hip",      "r_hip",
              "l_knee",   "r_knee",  "l_ankle",    "r_ankle"};
  m.part_classes = {"Head", "Torso", "Upper Arm", "Forearm", "Thigh", "Shin"};
  enum Part { Head, Torso, UpperArm, Forearm, Thigh, Shin };
  const std::pair<JointPair, Part> limbs[] = {
      {{head_top, neck}, Head},         {{neck, l_shoulder}, Torso},
      {{neck, r_shoulder}, Torso},      {{neck, l_hip}, Torso},
      {{neck, r_hip}, Torso},           {{l_shoulder, l_elbow}, UpperArm},
      {{r_shoulder, r_elbow}, UpperArm}, {{l_elbow, l_wrist}, Forearm},
      {{r_elbow, r_wrist}, Forearm},    {{l_hip, l_knee}, Thigh},
      {{r_hip, r_knee}, Thigh},         {{l_knee, l_ankle}, Shin},
      {{r_knee, r_ankle}, Shin},
  };
  for (const auto& [pair, part] : limbs) {
    m.limbs.push_back(pair);
    m.limb_part.push_back(part);
  }
  m.collision_pairs = {{l_shoulder, r_shoulder}, {l_elbow, r_elbow},
                       {l_wrist, r_wrist},       {l_hip, r_hip},
                       {l_knee, r_knee},         {l_ankle, r_ankle}};
  m.head_joints = {head_top, neck};
  return m;
}

}  // namespace posefuse
