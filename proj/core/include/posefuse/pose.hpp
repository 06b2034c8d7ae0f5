#pragma once

#include "posefuse/geometry.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace posefuse {

/// One person's 3D joints at one frame (mm, world frame).
struct Skeleton3D {
  int person_id = 0;
  int frame_index = 0;
  std::vector<std::optional<Point3>> joints;

  bool has(int j) const {
    return j < static_cast<int>(joints.size()) && joints[j].has_value();
  }
};

/// Shared file format for estimates and ground truth:
/// {"frames": [{"frame": t, "people": [{"id": p, "joints": [[x, y, z] | null, ...]}]}]}
/// Frames and people are written in ascending order, so equal inputs give
/// byte-identical text.
std::string skeletons_to_json(std::span<const Skeleton3D> skeletons);
std::vector<Skeleton3D> skeletons_from_json(const std::string& text, int n_joints);
std::vector<Skeleton3D> load_skeletons(const std::string& path, int n_joints);
void save_skeletons(const std::string& path, std::span<const Skeleton3D> skeletons);

}  // namespace posefuse
