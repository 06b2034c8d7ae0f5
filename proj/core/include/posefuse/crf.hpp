#pragma once

#include "posefuse/body_model.hpp"
#include "posefuse/factor_graph.hpp"
#include "posefuse/sampling.hpp"

#include <span>
#include <string>
#include <vector>

namespace posefuse {

struct CRFParams {
  double sigma_temp_mm = 20.0;
  double theta1 = 15.0;
  double theta2 = 10.0;            // per collision unit
  double collision_unit_mm = 100.0;  // distances enter the sigmoid in decimetres
  double epsilon_floor = 1e-6;
  TemporalKernel temporal_kernel = TemporalKernel::gaussian;

  /// Throws ConfigError on non-positive sigma, theta2, unit or floor.
  void validate() const;
};

/// Which factor families go into the graph. The data term cannot be turned off.
struct FactorToggles {
  bool temporal = true;
  bool collision = true;
};

/// Mean heat value of the state's projection over the views, floored at
/// epsilon_floor. Projections behind a camera or outside its map read the
/// heat-map floor.
double eval_data(const Point3& state, std::span<const JointView> views,
                 double epsilon_floor = kHeatmapFloor);

/// exp(-|s - (prev + next)/2|^2 / (2 sigma^2)), unfloored.
double eval_temporal(const Point3& s, const Point3& prev, const Point3& next,
                     const CRFParams& params);

/// General form used for uneven frame spacing: the expected position is
/// (1 - weight) * prev + weight * next and the width is sigma_mm.
double eval_temporal(const Point3& s, const Point3& prev, const Point3& next,
                     double weight, double sigma_mm, TemporalKernel kernel);

/// 1 / (1 + exp(theta1 - theta2 * d)), d in collision units.
double eval_collision(const Point3& a, const Point3& b, const CRFParams& params);

/// Fills set.data_values with eval_data for every state.
void score_states(JointStateSet& set, std::span<const JointView> views,
                  const CRFParams& params);

/// One person's CRF. Variables are (joint, frame) pairs that have a state set.
struct PersonCrf {
  struct Variable {
    int joint = 0;
    int frame = 0;
    std::size_t state_set = 0;  // index into state_sets
  };

  int person_id = 0;
  FactorGraph graph;
  std::vector<Variable> variables;  // indexed like graph variables
  std::vector<JointStateSet> state_sets;

  /// -1 when the joint has no variable at that frame.
  int variable_of(int joint, int frame) const;
};

/// Builds the graph over scored state sets: a data factor per variable, a
/// temporal factor per joint per interior frame of its chain, and a collision
/// factor per symmetric pair per frame where both joints exist.
///
/// A joint missing at some frames is chained across the gap: the expected
/// position is interpolated by frame distance and sigma grows with the
/// square root of the longer step. Throws EmptyTrack when there are no state
/// sets.
PersonCrf build_graph(int person_id, std::vector<JointStateSet> state_sets,
                      const BodyModel& body, const CRFParams& params,
                      const FactorToggles& toggles = {});

/// Body model plus CRF parameters as read from a key = value text file.
struct ModelConfig {
  BodyModel body = default_body_model();
  CRFParams crf;
};

/// Keys (all optional, defaults as in default_body_model and CRFParams):
///   joints, limbs, limb_parts, part_classes, collision_pairs, head_joints,
///   sigma_temp_mm, theta1, theta2, collision_unit_mm, epsilon_floor,
///   temporal_kernel (gaussian | literal).
/// Lists are comma separated; pairs are written a-b with joint names.
/// Lines starting with '#' are comments. Unknown keys are a ConfigError.
ModelConfig parse_model_file(const std::string& text);
ModelConfig load_model_file(const std::string& path);

}  // namespace posefuse
