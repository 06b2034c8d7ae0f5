#pragma once

#include "posefuse/geometry.hpp"
#include "posefuse/heatmap.hpp"
#include "posefuse/random.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace posefuse {

/// One camera's evidence for a joint: its heat map, calibration, and the
/// cells that may be sampled (normally the person's box in that view).
struct JointView {
  const Heatmap* heatmap = nullptr;
  const CameraCalibration* camera = nullptr;
  CellRect region;
};

/// The discrete 3D hypotheses of one joint at one frame.
struct JointStateSet {
  int person_id = 0;
  int joint_index = 0;
  int frame_index = 0;
  std::vector<std::string> cameras;           // cameras the joint was sampled in
  std::vector<std::vector<int>> subsets;      // indices into `cameras`
  std::vector<Point3> states;
  std::vector<int> source_subset;             // per state, index into `subsets`
  std::vector<double> residual_mm;            // per state, triangulation RMS
  std::vector<double> data_values;            // per state, f_data (empty until scored)
  int fallback_count = 0;                     // states substituted after degenerate draws

  std::size_t size() const { return states.size(); }
};

struct SamplingParams {
  int n_states = 64;
  int max_attempts = 8;        // draws per state before the fallback kicks in
  double roi_padding = 0.2;    // sampling region grows by this fraction of the box diagonal
};

/// All camera subsets of size >= 2, by size then lexicographically.
/// Throws TooFewCameras for fewer than two cameras.
std::vector<std::vector<int>> enumerate_subsets(int n_cameras);

/// Samples per subset so the total is exactly n_states: n_states / n_subsets
/// each, remainder to the first subsets (16 x 4 for three cameras, 64 for two).
std::vector<int> samples_per_subset(int n_subsets, int n_states);

/// Draws the joint's hypotheses: for each subset, one pixel per camera from
/// that camera's heat-map PMF, back-projected and triangulated.
///
/// A degenerate triangulation is redrawn up to max_attempts times, then
/// replaced by `fallback` when given, else by the first valid state of the
/// set; with neither available DegenerateConfiguration propagates.
/// EmptyHeatmap propagates from PMF construction.
JointStateSet sample_states(std::span<const JointView> views, SeededRandomSource& rng,
                            const SamplingParams& params = {},
                            const std::optional<Point3>& fallback = std::nullopt);

/// Optional debugging dump:
/// person_id,frame,joint,state_index,x,y,z,residual_mm
std::string states_csv_header();
std::string states_to_csv(const JointStateSet& set);

}  // namespace posefuse
