#pragma once

#include "posefuse/association.hpp"
#include "posefuse/geometry.hpp"
#include "posefuse/heatmap.hpp"

#include <map>
#include <string>
#include <vector>

namespace posefuse {

/// Per-frame access to a recording. Heat maps are requested one frame at a
/// time so a long clip never has to sit in memory at once.
class FrameSource {
 public:
  virtual ~FrameSource() = default;

  virtual const std::vector<CameraCalibration>& cameras() const = 0;
  /// Ascending frame indices.
  virtual std::vector<int> frames() const = 0;
  /// Detections keyed by camera id; cameras without detections may be absent.
  virtual std::map<std::string, std::vector<Skeleton2D>> keypoints(int frame) const = 0;
  /// One stack per camera, in camera order. Throws DataError when missing.
  virtual std::vector<HeatmapStack> heatmaps(int frame) const = 0;
};

}  // namespace posefuse
