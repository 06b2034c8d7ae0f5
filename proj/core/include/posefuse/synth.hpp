#pragma once

#include "posefuse/body_model.hpp"
#include "posefuse/frame_source.hpp"
#include "posefuse/pose.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace posefuse {

/// How heat-map peaks are displaced.
///   triple:      a fraction of (frame, joint, camera) maps get every actor's
///                peak moved by offset_px in a random image direction.
///   joint_frame: a fraction of (actor, joint, frame) triples get a phantom
///                peak in every camera at the projection of one 3D point
///                displaced from the joint; the phantom is at least offset_px
///                away in every view. Events never touch the first or last
///                frame, never hit the same actor joint in adjacent frames and
///                never hit two joints of one actor in the same frame.
/// In both modes the true peak keeps `residual_peak` of its height.
struct CorruptionSpec {
  enum class Mode { triple, joint_frame };
  Mode mode = Mode::triple;
  double fraction = 0.0;
  double offset_px = 30.0;
  double residual_peak = 0.5;
};

/// The left joint's map shows the partner's peak at full height and its own
/// at residual_peak, for frames [first_frame, last_frame].
struct SwapEvent {
  int actor = 0;
  int joint = 0;  // the left joint of a collision pair
  int first_frame = 0;
  int last_frame = 0;
  std::vector<int> cameras;  // empty: every camera
  double residual_peak = 0.5;
};

/// The actor is absent from one camera's heat maps and keypoints.
struct OcclusionWindow {
  int actor = 0;
  int camera = 0;
  int first_frame = 0;
  int last_frame = 0;
};

struct SceneSpec {
  int n_actors = 2;
  int n_frames = 50;
  int n_cameras = 3;
  double ring_radius_mm = 5000.0;
  double camera_height_mm = 2500.0;
  double target_height_mm = 900.0;
  int image_width = 480;
  int image_height = 360;
  double focal_px = 500.0;
  double heatmap_scale = 1.0;
  double heatmap_sigma_px = 1.5;
  double fps = 25.0;
  double walk_speed_mm_s = 800.0;
  double actor_spacing_mm = 1500.0;
  double swing_amplitude_deg = 25.0;
  double swing_period_s = 1.2;
  CorruptionSpec corruption;
  std::vector<SwapEvent> swaps;
  std::vector<OcclusionWindow> occlusions;

  /// Throws ConfigError when the spec cannot describe a scene.
  void validate() const;
};

SceneSpec parse_scene_spec(const std::string& json_text, const BodyModel& body);
SceneSpec load_scene_spec(const std::string& path, const BodyModel& body);
std::string scene_spec_to_json(const SceneSpec& spec, const BodyModel& body);

/// A displaced peak applied to one actor's joint.
struct CorruptionEvent {
  int actor = 0;
  int joint = 0;
  int frame = 0;
  int camera = -1;          // -1: all cameras (joint_frame mode)
  PixelCoord offset_px{0, 0};  // triple mode
  Point3 phantom{0, 0, 0};     // joint_frame mode
};

/// Ring of cameras around the origin looking at the target height.
std::vector<CameraCalibration> ring_cameras(const SceneSpec& spec);

/// Ground-truth pose of one actor at one frame.
Skeleton3D actor_pose(const SceneSpec& spec, int actor, int frame);

/// A generated scene. Heat maps are rendered on request per frame.
class SyntheticScene : public FrameSource {
 public:
  SyntheticScene(SceneSpec spec, std::uint64_t seed, BodyModel body = default_body_model());

  const SceneSpec& spec() const { return spec_; }
  const BodyModel& body() const { return body_; }
  const std::vector<CameraCalibration>& cameras() const override { return cameras_; }
  std::vector<int> frames() const override;
  std::map<std::string, std::vector<Skeleton2D>> keypoints(int frame) const override;
  std::vector<HeatmapStack> heatmaps(int frame) const override;

  HeatmapStack render(int frame, int camera) const;
  const std::vector<Skeleton3D>& ground_truth() const { return ground_truth_; }
  const std::vector<CorruptionEvent>& corruptions() const { return corruptions_; }
  bool occluded(int actor, int camera, int frame) const;

 private:
  struct Peak {
    PixelCoord px;
    double amplitude;
  };
  // Peaks of one actor's joint map in one camera, corruption applied.
  std::vector<Peak> peaks(int actor, int joint, int frame, int camera) const;
  const Skeleton3D& pose(int actor, int frame) const;

  SceneSpec spec_;
  BodyModel body_;
  std::vector<CameraCalibration> cameras_;
  std::vector<Skeleton3D> ground_truth_;  // frame major, then actor
  std::vector<CorruptionEvent> corruptions_;
};

/// Writes calibration.json, heatmaps/, keypoints/, ground_truth.json,
/// scene.json, model.txt and a ready-to-run config.json into `out_dir`.
void write_scene(const SyntheticScene& scene, const std::string& out_dir);

/// Hypothesis scatter bound: a 3 sigma pixel error pushed through
/// back-projection and triangulation at the scene centre, worst camera subset.
/// sqrt(trace(J J^T)) of the pixel-to-point Jacobian J gives the RMS error
/// per unit pixel noise.
double expected_triangulation_radius(const SceneSpec& spec,
                                     const std::vector<CameraCalibration>& cameras);

}  // namespace posefuse
