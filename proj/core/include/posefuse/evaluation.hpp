#pragma once

#include "posefuse/body_model.hpp"
#include "posefuse/pose.hpp"

#include <span>
#include <string>
#include <vector>

namespace posefuse {

/// Shifts the listed joints by +dz along world z. Missing joints stay missing.
Skeleton3D apply_head_offset(Skeleton3D s, std::span<const int> head_joints,
                             double dz_mm = 100.0);

/// Both endpoints within alpha * L of ground truth (strictly), L the ground
/// truth limb length. Throws ZeroLengthLimb when L < 1e-6 mm.
bool limb_correct(const Point3& est_a, const Point3& est_b, const Point3& gt_a,
                  const Point3& gt_b, double alpha = 0.5);

struct ScoreParams {
  double alpha = 0.5;
  double head_offset_mm = 100.0;  // applied to estimates before scoring
};

/// Estimate paired with a ground-truth actor at one frame.
struct IdentityMatch {
  int frame = 0;
  int actor_id = 0;
  int person_id = -1;  // -1: no estimate left for this actor
};

/// Per frame, greedy pairing by ascending mean distance over joints present
/// in both skeletons. Every ground-truth actor gets one entry per frame it
/// appears in.
std::vector<IdentityMatch> match_identities(std::span<const Skeleton3D> estimates,
                                            std::span<const Skeleton3D> ground_truth);

struct PCPReport {
  struct Actor {
    int actor_id = 0;
    int appearances = 0;  // ground-truth frames
    std::vector<int> correct;  // per part class
    std::vector<int> total;
    double percent(std::size_t part) const;
    double percent_all() const;
  };

  std::vector<std::string> part_classes;
  std::vector<Actor> actors;  // ascending id

  /// Per part, actor percentages weighted by appearances.
  double average(std::size_t part) const;
  double average_all() const;

  /// Columns: actor, one per part class, All. Last row is Average.
  std::string to_csv() const;
  std::string to_text() const;
};

/// PCP over all ground-truth frames. A ground-truth limb without an estimate
/// counts as wrong; limbs whose ground truth is missing are skipped.
/// Throws NoOverlap when an actor never pairs with an estimate.
PCPReport score(std::span<const Skeleton3D> estimates, std::span<const Skeleton3D> ground_truth,
                const BodyModel& body, const ScoreParams& params = {});

}  // namespace posefuse
