#pragma once

#include "posefuse/geometry.hpp"

#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace posefuse {

struct Keypoint {
  PixelCoord pixel;
  double confidence = 1.0;
};

/// One detected person in one camera image.
struct Skeleton2D {
  std::vector<std::optional<Keypoint>> joints;
  std::string camera_id;
  int frame_index = 0;

  int visible_count() const;
  bool visible(int j) const {
    return j < static_cast<int>(joints.size()) && joints[j].has_value();
  }
};

struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
};

struct AssociationParams {
  double iou_threshold = 0.7;
  double ray_distance_mm = 20.0;
  int min_mutual_joints = 5;
  int gap_max = 2;
  double box_padding = 0.05;  // fraction of the box diagonal, each side
  double keypoint_margin = 0.10;  // accepted overshoot past the image, fraction of size
};

/// Tight box over the visible joints, padded by `padding` times its diagonal
/// on each side. Throws DegenerateBox unless at least two visible joints are
/// at distinct positions.
BoundingBox bounding_box(const Skeleton2D& s, double padding = 0.05);

double iou(const BoundingBox& a, const BoundingBox& b);

/// Greedy frame-to-frame matching for one camera.
struct TimeLink {
  /// Per current skeleton: index of the matched previous skeleton, or -1.
  std::vector<int> match;
  /// Current skeletons without a match; they start new identities.
  std::vector<std::size_t> new_identities;
};

/// Pairs with IoU >= threshold are accepted in descending IoU order, each
/// skeleton at most once. Skeletons without a valid box never match.
TimeLink link_time(std::span<const Skeleton2D> prev, std::span<const Skeleton2D> curr,
                   double iou_threshold = 0.7, double box_padding = 0.05);
/// Same rule over precomputed boxes (nullopt = no valid box).
TimeLink link_boxes(std::span<const std::optional<BoundingBox>> prev,
                    std::span<const std::optional<BoundingBox>> curr,
                    double iou_threshold);

struct ViewLink {
  bool linked = false;
  int mutual_joints = 0;
  double mean_distance_mm = std::numeric_limits<double>::infinity();
};

/// Cross-camera test: enough joints visible in both skeletons and a mean ray
/// distance over those joints below the threshold.
ViewLink measure_view_link(const Skeleton2D& a, const Skeleton2D& b,
                           const CameraCalibration& cam_a,
                           const CameraCalibration& cam_b,
                           const AssociationParams& params = {});
bool link_views(const Skeleton2D& a, const Skeleton2D& b,
                const CameraCalibration& cam_a, const CameraCalibration& cam_b,
                const AssociationParams& params = {});

/// An identity's detections: frame -> camera id -> skeleton.
struct PersonTrack {
  int person_id = 0;
  std::map<int, std::map<std::string, Skeleton2D>> frames;

  int first_frame() const { return frames.empty() ? 0 : frames.begin()->first; }
  int last_frame() const { return frames.empty() ? -1 : frames.rbegin()->first; }
};

/// Drops the given frame from every identity seen by fewer than two cameras
/// in it. Tracks left without frames are removed.
std::vector<PersonTrack> prune_single_view(std::vector<PersonTrack> tracks, int frame);

/// Frame-sequential association across time (IoU) and views (ray distance).
///
/// Each camera keeps tracklets linked frame to frame by IoU. A tracklet that
/// misses a frame stays dormant for up to gap_max frames and can be revived by
/// IoU against its last box. Within a frame, skeletons from different cameras
/// are clustered by ascending mean ray distance with at most one skeleton per
/// camera per cluster. A cluster takes the identity most of its continuing
/// tracklets carry (lowest id on ties); clusters seen in two or more cameras
/// with no continuing tracklet start a new identity.
class Associator {
 public:
  Associator(std::vector<CameraCalibration> cameras, AssociationParams params = {});

  /// Detections keyed by camera id. Frames must be added in increasing order;
  /// a frame with no detections is allowed.
  void add_frame(int frame, const std::map<std::string, std::vector<Skeleton2D>>& detections);

  /// Tracks after single-camera pruning, sorted by person id.
  std::vector<PersonTrack> finish() const;

 private:
  struct Tracklet {
    int person = -1;
    BoundingBox box;
    int last_frame = 0;
  };

  std::vector<CameraCalibration> cameras_;
  AssociationParams params_;
  std::vector<std::vector<Tracklet>> tracklets_;  // per camera
  std::map<int, PersonTrack> tracks_;
  int next_person_ = 0;
  int last_frame_ = std::numeric_limits<int>::min();
};

/// Keypoint file: JSON array of {"joints": [[x, y, conf] | null, ...]}.
/// Joints outside the image by more than the margin are treated as not
/// visible; skeletons left without visible joints are dropped.
std::vector<Skeleton2D> parse_keypoint_file(const std::string& json_text,
                                            const CameraCalibration& camera,
                                            int frame_index, int n_joints,
                                            double margin = 0.10);
std::vector<Skeleton2D> load_keypoint_file(const std::string& path,
                                           const CameraCalibration& camera,
                                           int frame_index, int n_joints,
                                           double margin = 0.10);
void save_keypoint_file(const std::string& path, std::span<const Skeleton2D> skeletons);

/// Track output: JSON array of {"person_id", "frames": {frame: {camera: skeleton}}}.
std::string tracks_to_json(std::span<const PersonTrack> tracks);

}  // namespace posefuse
