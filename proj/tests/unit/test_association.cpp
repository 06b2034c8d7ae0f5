#include "posefuse/association.hpp"
#include "posefuse/body_model.hpp"
#include "posefuse/error.hpp"
#include "posefuse/synth.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace posefuse;

namespace {

Skeleton2D skeleton(std::initializer_list<std::pair<double, double>> pts, std::string cam = "c") {
  Skeleton2D s;
  s.camera_id = std::move(cam);
  for (auto [x, y] : pts) s.joints.push_back(Keypoint{PixelCoord(x, y), 1.0});
  return s;
}

BoundingBox box(double x0, double y0, double x1, double y1) { return {x0, y0, x1, y1}; }

Skeleton2D project(const Skeleton3D& body, const CameraCalibration& cam) {
  Skeleton2D s;
  s.camera_id = cam.camera_id();
  for (const auto& j : body.joints) s.joints.push_back(Keypoint{cam.project(*j).pixel, 1.0});
  return s;
}

// Scene with two ring cameras looking at one ground-truth pose.
struct TwoViews {
  SceneSpec spec;
  std::vector<CameraCalibration> cams;
  Skeleton3D body;
  TwoViews() {
    cams = ring_cameras(spec);
    body = actor_pose(spec, 0, 7);
  }
};

}  // namespace

TEST(BoundingBox, PaddedAroundJoints) {
  const BoundingBox b = bounding_box(skeleton({{0, 0}, {10, 10}}), 0.05);
  const double pad = 0.05 * std::sqrt(200.0);
  EXPECT_DOUBLE_EQ(b.x_min, -pad);
  EXPECT_DOUBLE_EQ(b.y_min, -pad);
  EXPECT_DOUBLE_EQ(b.x_max, 10 + pad);
  EXPECT_DOUBLE_EQ(b.y_max, 10 + pad);
}

TEST(BoundingBox, DegenerateCases) {
  EXPECT_THROW(bounding_box(skeleton({{3, 4}})), DegenerateBox);
  EXPECT_THROW(bounding_box(skeleton({{3, 4}, {3, 4}})), DegenerateBox);
  Skeleton2D s = skeleton({{3, 4}});
  s.joints.emplace_back();
  EXPECT_THROW(bounding_box(s), DegenerateBox);
}

TEST(BoundingBox, HorizontalLineGetsHeightFromPadding) {
  const BoundingBox b = bounding_box(skeleton({{0, 5}, {20, 5}}), 0.05);
  EXPECT_DOUBLE_EQ(b.height(), 2 * 0.05 * 20.0);
  EXPECT_DOUBLE_EQ(b.width(), 20.0 + 2 * 0.05 * 20.0);
}

TEST(Iou, AlgebraicCases) {
  const BoundingBox a = box(0, 0, 1, 1);
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(iou(a, box(2, 2, 3, 3)), 0.0);
  EXPECT_EQ(iou(a, box(1, 0, 2, 1)), 0.0);  // touching edge
  EXPECT_EQ(iou(a, box(0.5, 0, 1.5, 1)), 1.0 / 3.0);
  EXPECT_EQ(iou(box(0, 0, 2, 2), box(1, 1, 3, 3)), 1.0 / 7.0);
  EXPECT_EQ(iou(box(0, 0, 4, 4), box(1, 1, 3, 3)), 0.25);
}

TEST(Iou, SymmetricAndBounded) {
  std::mt19937_64 g(4);
  std::uniform_real_distribution<double> u(0, 100), s(0.5, 50);
  for (int i = 0; i < 2000; ++i) {
    const double ax = u(g), ay = u(g), bx = u(g), by = u(g);
    const BoundingBox a = box(ax, ay, ax + s(g), ay + s(g));
    const BoundingBox b = box(bx, by, bx + s(g), by + s(g));
    const double v = iou(a, b);
    EXPECT_EQ(v, iou(b, a));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(LinkTime, StationaryPersonMatches) {
  const std::vector<Skeleton2D> prev{skeleton({{10, 10}, {50, 90}, {30, 40}})};
  const TimeLink l = link_time(prev, prev);
  ASSERT_EQ(l.match.size(), 1u);
  EXPECT_EQ(l.match[0], 0);
  EXPECT_TRUE(l.new_identities.empty());
}

TEST(LinkTime, EmptyPreviousStartsEveryone) {
  const std::vector<Skeleton2D> curr{skeleton({{10, 10}, {50, 90}}), skeleton({{200, 10}, {250, 90}})};
  const TimeLink l = link_time({}, curr);
  EXPECT_EQ(l.match, (std::vector<int>{-1, -1}));
  EXPECT_EQ(l.new_identities, (std::vector<std::size_t>{0, 1}));
}

TEST(LinkTime, BelowThresholdStartsNewIdentity) {
  const std::vector<std::optional<BoundingBox>> prev{box(0, 0, 10, 10)};
  const std::vector<std::optional<BoundingBox>> curr{box(2, 0, 12, 10), std::nullopt};
  // IoU 80/120 = 0.667 < 0.7.
  const TimeLink l = link_boxes(prev, curr, 0.7);
  EXPECT_EQ(l.match, (std::vector<int>{-1, -1}));
  EXPECT_EQ(l.new_identities.size(), 2u);
  EXPECT_EQ(link_boxes(prev, curr, 0.6).match[0], 0);
}

TEST(LinkTime, CrossingPeopleKeepIdentity) {
  // Own-box IoU 0.9 for both, cross IoU 0.2; greedy must equal the best
  // total-IoU assignment, found here by enumeration.
  const BoundingBox a0 = box(0, 0, 10, 10);
  const BoundingBox b0 = box(10.0 * 2.0 / 3.0, 0, 10.0 * 2.0 / 3.0 + 10, 10);  // IoU(a0,b0) = 0.2
  const double shift = 10.0 * (1 - 0.9) / (1 + 0.9);                          // IoU 0.9 shift
  const BoundingBox a1 = box(shift, 0, 10 + shift, 10);
  const BoundingBox b1 = box(b0.x_min - shift, 0, b0.x_max - shift, 10);
  ASSERT_NEAR(iou(a0, a1), 0.9, 1e-12);
  ASSERT_NEAR(iou(b0, b1), 0.9, 1e-12);

  const std::vector<std::optional<BoundingBox>> prev{a0, b0};
  const std::vector<std::optional<BoundingBox>> curr{b1, a1};  // listed in swapped order
  const TimeLink l = link_boxes(prev, curr, 0.1);

  std::vector<int> perm{0, 1}, best_perm;
  double best = -1;
  do {
    double total = 0;
    for (int c = 0; c < 2; ++c) total += iou(*prev[perm[c]], *curr[c]);
    if (total > best) {
      best = total;
      best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  EXPECT_EQ(l.match, best_perm);
  EXPECT_EQ(l.match, (std::vector<int>{1, 0}));
}

TEST(LinkTime, NeverAssignsOneIdentityTwice) {
  std::mt19937_64 g(6);
  std::uniform_real_distribution<double> u(0, 40), s(10, 30);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::optional<BoundingBox>> prev, curr;
    for (int i = 0; i < 4; ++i) {
      const double x = u(g), y = u(g);
      prev.push_back(box(x, y, x + s(g), y + s(g)));
      const double x2 = u(g), y2 = u(g);
      curr.push_back(box(x2, y2, x2 + s(g), y2 + s(g)));
    }
    const TimeLink l = link_boxes(prev, curr, 0.3);
    std::vector<int> used;
    for (std::size_t c = 0; c < l.match.size(); ++c) {
      if (l.match[c] < 0) {
        EXPECT_NE(std::find(l.new_identities.begin(), l.new_identities.end(), c),
                  l.new_identities.end());
        continue;
      }
      EXPECT_GE(iou(*prev[l.match[c]], *curr[c]), 0.3);
      used.push_back(l.match[c]);
    }
    std::sort(used.begin(), used.end());
    EXPECT_EQ(std::adjacent_find(used.begin(), used.end()), used.end());
  }
}

TEST(LinkViews, ProjectionsOfOneBodyLink) {
  TwoViews v;
  const Skeleton2D a = project(v.body, v.cams[0]);
  const Skeleton2D b = project(v.body, v.cams[1]);
  const ViewLink l = measure_view_link(a, b, v.cams[0], v.cams[1]);
  EXPECT_TRUE(l.linked);
  EXPECT_EQ(l.mutual_joints, joint::count);
  EXPECT_LT(l.mean_distance_mm, 1e-6);
  EXPECT_TRUE(link_views(b, a, v.cams[1], v.cams[0]));
}

TEST(LinkViews, FiftyMillimetreOffsetRejected) {
  TwoViews v;
  const Skeleton2D a = project(v.body, v.cams[0]);
  // Move each joint 50 mm along the common normal of its two viewing rays
  // before projecting into the second camera.
  Skeleton3D shifted = v.body;
  for (auto& j : shifted.joints) {
    const Eigen::Vector3d da = (*j - v.cams[0].center()).normalized();
    const Eigen::Vector3d db = (*j - v.cams[1].center()).normalized();
    *j += 50.0 * da.cross(db).normalized();
  }
  const Skeleton2D b = project(shifted, v.cams[1]);
  const ViewLink l = measure_view_link(a, b, v.cams[0], v.cams[1]);
  EXPECT_NEAR(l.mean_distance_mm, 50.0, 2.0);
  EXPECT_FALSE(l.linked);
  EXPECT_FALSE(link_views(b, a, v.cams[1], v.cams[0]));

  // 10 mm stays under the 20 mm threshold.
  Skeleton3D near = v.body;
  for (auto& j : near.joints) {
    const Eigen::Vector3d da = (*j - v.cams[0].center()).normalized();
    const Eigen::Vector3d db = (*j - v.cams[1].center()).normalized();
    *j += 10.0 * da.cross(db).normalized();
  }
  EXPECT_TRUE(link_views(a, project(near, v.cams[1]), v.cams[0], v.cams[1]));
}

TEST(LinkViews, TooFewMutualJoints) {
  TwoViews v;
  const Skeleton2D a = project(v.body, v.cams[0]);
  Skeleton2D b = project(v.body, v.cams[1]);
  for (int j = 3; j < joint::count; ++j) b.joints[j].reset();
  const ViewLink l = measure_view_link(a, b, v.cams[0], v.cams[1]);
  EXPECT_EQ(l.mutual_joints, 3);
  EXPECT_FALSE(l.linked);
  EXPECT_FALSE(link_views(b, a, v.cams[1], v.cams[0]));
}

TEST(LinkViews, SymmetricOnRandomPairs) {
  TwoViews v;
  std::mt19937_64 g(9);
  std::normal_distribution<double> n(0.0, 1.5);
  for (int t = 0; t < 50; ++t) {
    Skeleton2D a = project(v.body, v.cams[0]);
    Skeleton2D b = project(v.body, v.cams[2]);
    for (auto& j : b.joints) j->pixel += PixelCoord(n(g), n(g));
    const ViewLink ab = measure_view_link(a, b, v.cams[0], v.cams[2]);
    const ViewLink ba = measure_view_link(b, a, v.cams[2], v.cams[0]);
    EXPECT_EQ(ab.linked, ba.linked);
    EXPECT_NEAR(ab.mean_distance_mm, ba.mean_distance_mm, 1e-9);
  }
}

TEST(Prune, KeepsOnlyMultiCameraIdentities) {
  auto track = [](int id, int n_cams) {
    PersonTrack t;
    t.person_id = id;
    for (int c = 0; c < n_cams; ++c) t.frames[4]["cam" + std::to_string(c)] = Skeleton2D{};
    t.frames[5]["cam0"] = Skeleton2D{};
    return t;
  };
  const auto out = prune_single_view({track(0, 3), track(1, 1), track(2, 2)}, 4);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].frames.at(4).size(), 3u);
  EXPECT_EQ(out[1].frames.count(4), 0u);
  EXPECT_EQ(out[2].frames.at(4).size(), 2u);
  // Frame 5 untouched by a prune of frame 4.
  EXPECT_EQ(out[1].frames.count(5), 1u);
  // A track whose only frame is pruned disappears.
  PersonTrack lone;
  lone.person_id = 9;
  lone.frames[4]["cam0"] = Skeleton2D{};
  EXPECT_TRUE(prune_single_view({lone}, 4).empty());
}

namespace {

std::vector<PersonTrack> associate(const SyntheticScene& scene) {
  Associator assoc(scene.cameras());
  for (int f : scene.frames()) assoc.add_frame(f, scene.keypoints(f));
  return assoc.finish();
}

}  // namespace

TEST(Associator, SyntheticSceneHasNoFragmentation) {
  SceneSpec spec;
  spec.n_frames = 12;
  const SyntheticScene scene(spec, 1);
  const auto tracks = associate(scene);
  ASSERT_EQ(tracks.size(), 2u);
  for (const auto& t : tracks) {
    EXPECT_EQ(t.frames.size(), 12u);
    for (const auto& [f, views] : t.frames) EXPECT_EQ(views.size(), 3u);
  }
}

TEST(Associator, ShortOcclusionKeepsIdentity) {
  SceneSpec spec;
  spec.n_frames = 12;
  spec.occlusions.push_back({0, 1, 4, 5});
  const SyntheticScene scene(spec, 1);
  const auto tracks = associate(scene);
  ASSERT_EQ(tracks.size(), 2u);
  int two_view_frames = 0;
  for (const auto& t : tracks) {
    EXPECT_EQ(t.frames.size(), 12u);
    for (const auto& [f, views] : t.frames) two_view_frames += views.size() == 2;
  }
  EXPECT_EQ(two_view_frames, 2);
}

TEST(Associator, SingleCameraFramesArePruned) {
  SceneSpec spec;
  spec.n_frames = 10;
  spec.occlusions.push_back({1, 0, 6, 6});
  spec.occlusions.push_back({1, 2, 6, 6});
  const SyntheticScene scene(spec, 1);
  const auto tracks = associate(scene);
  ASSERT_EQ(tracks.size(), 2u);
  std::size_t total = 0;
  for (const auto& t : tracks) {
    total += t.frames.size();
    for (const auto& [f, views] : t.frames) EXPECT_GE(views.size(), 2u);
  }
  EXPECT_EQ(total, 19u);
}

TEST(KeypointFile, MarginAndRoundTrip) {
  const CameraCalibration cam("c", testutil::manual_projection({3000, 0, 0}, {0, 0, 0}, 500, 50, 50),
                              100, 100);
  const std::string text =
      R"([{"joints": [[10, 10, 0.9], null, [105, 50, 1.0], [150, 50, 1.0]]},
          {"joints": [null, null, null, [-50, 5, 1]]}])";
  const auto s = parse_keypoint_file(text, cam, 3, 4, 0.10);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].frame_index, 3);
  EXPECT_TRUE(s[0].visible(0));
  EXPECT_FALSE(s[0].visible(1));
  EXPECT_TRUE(s[0].visible(2));   // 5 px past the edge, within 10%
  EXPECT_FALSE(s[0].visible(3));  // 50 px past
  EXPECT_DOUBLE_EQ(s[0].joints[0]->confidence, 0.9);
  EXPECT_THROW(parse_keypoint_file(R"([{"joints": [[1, 2, 1]]}])", cam, 0, 4), DataError);

  const auto dir = testutil::temp_dir("kp");
  const std::string path = (dir / "k.json").string();
  save_keypoint_file(path, s);
  const auto back = load_keypoint_file(path, cam, 3, 4);
  ASSERT_EQ(back.size(), 1u);
  for (int j = 0; j < 4; ++j) {
    ASSERT_EQ(back[0].visible(j), s[0].visible(j));
    if (s[0].visible(j)) {
      EXPECT_EQ(back[0].joints[j]->pixel, s[0].joints[j]->pixel);
    }
  }
}
