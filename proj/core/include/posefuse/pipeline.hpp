#pragma once

#include "posefuse/association.hpp"
#include "posefuse/bp.hpp"
#include "posefuse/crf.hpp"
#include "posefuse/evaluation.hpp"
#include "posefuse/frame_source.hpp"
#include "posefuse/sampling.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace posefuse {

struct PipelineConfig {
  // Paths are absolute or already resolved against the config file's folder.
  std::string calibration;
  std::string heatmaps;
  std::string keypoints;
  std::string ground_truth;  // optional
  std::string output;
  std::string model_file;    // optional
  double png_heatmap_scale = 1.0;

  ModelConfig model;
  AssociationParams association;
  SamplingParams sampling;
  bp::Options bp;
  FactorToggles factors;
  ScoreParams scoring;
  std::uint64_t seed = 1;
  int threads = 1;
  bool dump_states = false;
  bool dump_beliefs = false;
};

/// JSON config. Relative paths are resolved against `base_dir`. Keys:
///   calibration, heatmaps, keypoints, output (required); ground_truth,
///   model_file, png_heatmap_scale, seed, threads, factors (list of
///   data/temporal/collision), head_offset_mm, alpha, dump_states,
///   dump_beliefs, association {iou, ray_distance_mm, min_mutual_joints,
///   gap_max, box_padding, keypoint_margin}, sampling {n_states,
///   max_attempts, roi_padding}, bp {iterations, damping, tolerance},
///   crf {sigma_temp_mm, theta1, theta2, collision_unit_mm, epsilon_floor,
///   temporal_kernel} (overrides the model file).
/// Throws ConfigError for bad values and for input paths that do not exist.
PipelineConfig parse_pipeline_config(const std::string& json_text, const std::string& base_dir);
PipelineConfig load_pipeline_config(const std::string& path);

/// "data,temp,col" style list; aliases temporal/collision are accepted.
/// Throws ConfigError when the data term is missing or a name is unknown.
FactorToggles parse_factor_list(const std::string& list);

/// Reads the on-disk layout:
///   keypoints/{frame:06d}_{camera}.json
///   heatmaps/{frame:06d}_{camera}.pfhm, or per channel
///   heatmaps/{frame:06d}_{camera}_j{joint:02d}.png
class FileFrameSource : public FrameSource {
 public:
  explicit FileFrameSource(const PipelineConfig& config);

  const std::vector<CameraCalibration>& cameras() const override { return cameras_; }
  std::vector<int> frames() const override { return frames_; }
  std::map<std::string, std::vector<Skeleton2D>> keypoints(int frame) const override;
  std::vector<HeatmapStack> heatmaps(int frame) const override;

 private:
  std::string heatmap_dir_;
  std::string keypoint_dir_;
  double png_scale_;
  int n_joints_;
  double margin_;
  std::vector<CameraCalibration> cameras_;
  std::vector<int> frames_;
};

struct PersonDiagnostics {
  int person_id = 0;
  std::size_t variables = 0;
  std::size_t data_factors = 0;
  std::size_t temporal_factors = 0;
  std::size_t collision_factors = 0;
  int fallback_states = 0;
  std::vector<double> max_change;  // per BP iteration
  std::string skipped;             // reason when the person produced no graph
};

struct PipelineResult {
  std::vector<PersonTrack> tracks;
  std::vector<Skeleton3D> skeletons;
  std::vector<PersonDiagnostics> persons;
  std::optional<PCPReport> report;
  std::string states_csv;    // when dump_states
  std::string beliefs_json;  // when dump_beliefs
  std::vector<std::string> log;
};

/// Associate, sample, build one CRF per identity, run BP and take the MAP
/// states. Scores against `ground_truth` when given. Deterministic for a
/// fixed seed regardless of `threads`.
PipelineResult run_pipeline(const PipelineConfig& config, const FrameSource& source,
                            const std::vector<Skeleton3D>* ground_truth = nullptr);

/// Loads inputs named by the config, runs, and writes skeletons.json,
/// tracks.json, diagnostics.json and, with ground truth, report.csv and
/// report.txt (plus the optional dumps) to config.output.
PipelineResult run_pipeline(const PipelineConfig& config);

void write_outputs(const PipelineResult& result, const PipelineConfig& config);
std::string diagnostics_to_json(const PipelineResult& result);

/// Rounded pixel of a world point, or nullopt when behind the camera or
/// outside the image. Overlay markers are centred here.
std::optional<std::pair<int, int>> marker_position(const CameraCalibration& camera,
                                                   const Point3& p);

struct OverlayOptions {
  std::string background_dir;  // optional {frame:06d}_{camera}.png images
  int marker_radius = 3;
};

/// One PNG per (frame, camera) under out_dir: {frame:06d}_{camera}.png with
/// ground truth (red) under the estimates (green). Returns the files written.
std::vector<std::string> emit_overlays(std::span<const Skeleton3D> estimates,
                                       std::span<const Skeleton3D> ground_truth,
                                       std::span<const CameraCalibration> cameras,
                                       const BodyModel& body, const std::string& out_dir,
                                       const OverlayOptions& options = {});

}  // namespace posefuse
