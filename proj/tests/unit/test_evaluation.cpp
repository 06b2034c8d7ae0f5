#include "posefuse/error.hpp"
#include "posefuse/evaluation.hpp"
#include "posefuse/synth.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <random>

using namespace posefuse;

namespace {

BodyModel one_limb_model() {
  BodyModel m;
  m.joints = {"a", "b"};
  m.limbs = {{0, 1}};
  m.part_classes = {"Limb"};
  m.limb_part = {0};
  return m;
}

Skeleton3D sk(int id, int frame, std::vector<Point3> pts) {
  Skeleton3D s;
  s.person_id = id;
  s.frame_index = frame;
  for (auto& p : pts) s.joints.emplace_back(p);
  return s;
}

std::vector<Skeleton3D> walking_gt(int frames) {
  SceneSpec spec;
  std::vector<Skeleton3D> gt;
  for (int f = 0; f < frames; ++f) {
    for (int a = 0; a < spec.n_actors; ++a) gt.push_back(actor_pose(spec, a, f));
  }
  return gt;
}

ScoreParams no_offset() {
  ScoreParams p;
  p.head_offset_mm = 0.0;
  return p;
}

}  // namespace

TEST(HeadOffset, ShiftsListedJoints) {
  Skeleton3D s = sk(0, 0, {Point3(0, 0, 1700), Point3(0, 0, 1500), Point3(100, 0, 1400)});
  const std::vector<int> head{0, 1};
  const Skeleton3D out = apply_head_offset(s, head, 100.0);
  EXPECT_EQ(*out.joints[0], Point3(0, 0, 1800));
  EXPECT_EQ(*out.joints[1], Point3(0, 0, 1600));
  EXPECT_EQ(*out.joints[2], Point3(100, 0, 1400));
  EXPECT_EQ(*apply_head_offset(s, head, 0.0).joints[0], Point3(0, 0, 1700));
  s.joints[0].reset();
  const Skeleton3D missing = apply_head_offset(s, head, 100.0);
  EXPECT_FALSE(missing.has(0));
  EXPECT_EQ(*missing.joints[1], Point3(0, 0, 1600));
}

TEST(LimbCorrect, Cases) {
  const Point3 a(0, 0, 0), b(400, 0, 0);
  EXPECT_TRUE(limb_correct(a, b, a, b));
  EXPECT_FALSE(limb_correct(a + Point3(200, 0, 0), b, a, b));  // exactly 0.5 L
  EXPECT_FALSE(limb_correct(a, b + Point3(0, 0, -200), a, b));
  EXPECT_TRUE(limb_correct(a + Point3(0, 150, 0), b + Point3(0, 0, 190), a, b));
  EXPECT_TRUE(limb_correct(a + Point3(199.999, 0, 0), b, a, b));
  EXPECT_FALSE(limb_correct(a, b + Point3(0, 0, 120), a, b, 0.25));
  EXPECT_THROW(limb_correct(a, b, a, a), ZeroLengthLimb);
}

TEST(Score, PerfectEstimatesScoreHundred) {
  const auto gt = walking_gt(6);
  const PCPReport r = score(gt, gt, default_body_model(), no_offset());
  ASSERT_EQ(r.actors.size(), 2u);
  ASSERT_EQ(r.part_classes.size(), 6u);
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_EQ(r.average(k), 100.0);
    for (const auto& a : r.actors) EXPECT_EQ(a.percent(k), 100.0);
  }
  EXPECT_EQ(r.average_all(), 100.0);
  EXPECT_EQ(r.actors[0].appearances, 6);
}

TEST(Score, IdentitiesMatchedByDistance) {
  auto est = walking_gt(4);
  for (auto& s : est) s.person_id = 10 + (1 - s.person_id);  // renamed and swapped
  const PCPReport r = score(est, walking_gt(4), default_body_model(), no_offset());
  EXPECT_EQ(r.average_all(), 100.0);
  const auto m = match_identities(est, walking_gt(4));
  EXPECT_EQ(m.size(), 8u);
  for (const auto& x : m) EXPECT_EQ(x.person_id, 10 + (1 - x.actor_id));
}

TEST(Score, OneOfTwoFramesWrongIsFifty) {
  const BodyModel m = one_limb_model();
  const std::vector<Skeleton3D> gt{sk(0, 0, {Point3(0, 0, 0), Point3(0, 0, 400)}),
                                   sk(0, 1, {Point3(0, 0, 0), Point3(0, 0, 400)})};
  const std::vector<Skeleton3D> est{sk(0, 0, {Point3(0, 0, 0), Point3(0, 0, 400)}),
                                    sk(0, 1, {Point3(0, 0, 0), Point3(0, 0, 700)})};
  const PCPReport r = score(est, gt, m, no_offset());
  EXPECT_EQ(r.actors[0].percent(0), 50.0);
  EXPECT_EQ(r.average_all(), 50.0);
}

TEST(Score, MissingEstimateCountsAsWrong) {
  const BodyModel m = one_limb_model();
  const std::vector<Skeleton3D> gt{sk(0, 0, {Point3(0, 0, 0), Point3(0, 0, 400)}),
                                   sk(0, 1, {Point3(0, 0, 0), Point3(0, 0, 400)})};
  const std::vector<Skeleton3D> est{sk(3, 0, {Point3(0, 0, 0), Point3(0, 0, 400)})};
  EXPECT_EQ(score(est, gt, m, no_offset()).average_all(), 50.0);
  // A missing estimated joint fails the limb too.
  std::vector<Skeleton3D> partial{gt[0], gt[1]};
  partial[1].joints[1].reset();
  EXPECT_EQ(score(partial, gt, m, no_offset()).average_all(), 50.0);
}

TEST(Score, AverageWeightedByAppearances) {
  const BodyModel m = one_limb_model();
  const std::vector<Skeleton3D> gt{sk(0, 0, {Point3(0, 0, 0), Point3(0, 0, 400)}),
                                   sk(1, 0, {Point3(3000, 0, 0), Point3(3000, 0, 400)}),
                                   sk(0, 1, {Point3(0, 0, 0), Point3(0, 0, 400)})};
  const std::vector<Skeleton3D> est{sk(0, 0, {Point3(0, 0, 0), Point3(0, 0, 400)}),
                                    sk(1, 0, {Point3(3000, 0, 300), Point3(3000, 0, 700)}),
                                    sk(0, 1, {Point3(0, 0, 0), Point3(0, 0, 400)})};
  const PCPReport r = score(est, gt, m, no_offset());
  ASSERT_EQ(r.actors.size(), 2u);
  EXPECT_EQ(r.actors[0].percent_all(), 100.0);
  EXPECT_EQ(r.actors[1].percent_all(), 0.0);
  EXPECT_NEAR(r.average_all(), 200.0 / 3.0, 1e-12);
  const std::string csv = r.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "actor,Limb,All");
  EXPECT_NE(csv.find("Average,66.67,66.67"), std::string::npos) << csv;
  EXPECT_NE(r.to_text().find("Average"), std::string::npos);
}

TEST(Score, HeadOffsetAppliedToEstimates) {
  auto gt = walking_gt(1);
  auto est = gt;
  for (auto& s : est) {
    *s.joints[joint::head_top] -= Point3(0, 0, 100);
    *s.joints[joint::neck] -= Point3(0, 0, 100);
  }
  EXPECT_EQ(score(est, gt, default_body_model()).average_all(), 100.0);
  // Without the offset the lowered neck breaks the shorter neck-shoulder limbs.
  const PCPReport r = score(est, gt, default_body_model(), no_offset());
  EXPECT_LT(r.average(1), 100.0);
}

TEST(Score, NoOverlapThrows) {
  const BodyModel m = one_limb_model();
  const std::vector<Skeleton3D> gt{sk(0, 5, {Point3(0, 0, 0), Point3(0, 0, 400)})};
  const std::vector<Skeleton3D> est{sk(0, 6, {Point3(0, 0, 0), Point3(0, 0, 400)})};
  EXPECT_THROW(score(est, gt, m, no_offset()), NoOverlap);
  EXPECT_THROW(score({}, gt, m, no_offset()), NoOverlap);
}

TEST(Score, MatchesIndependentRecount) {
  const BodyModel body = default_body_model();
  const auto gt = walking_gt(30);
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto est = gt;
  for (auto& s : est) {
    for (auto& j : s.joints) {
      if (u(g) < 0.05) *j += 1000.0 * testutil::random_unit(g);
      else *j += 10.0 * testutil::random_unit(g);
    }
  }
  const PCPReport r = score(est, gt, body, no_offset());
  // Recount: identities are known, est[i] pairs with gt[i].
  std::vector<std::vector<int>> correct(2, std::vector<int>(6, 0)), total(2, std::vector<int>(6, 0));
  for (std::size_t i = 0; i < gt.size(); ++i) {
    for (std::size_t l = 0; l < body.limbs.size(); ++l) {
      const auto [a, b] = body.limbs[l];
      const double len = (*gt[i].joints[a] - *gt[i].joints[b]).norm();
      const bool ok = (*est[i].joints[a] - *gt[i].joints[a]).norm() < 0.5 * len &&
                      (*est[i].joints[b] - *gt[i].joints[b]).norm() < 0.5 * len;
      const int actor = gt[i].person_id;
      ++total[actor][body.limb_part[l]];
      correct[actor][body.limb_part[l]] += ok;
    }
  }
  for (int a = 0; a < 2; ++a) {
    EXPECT_EQ(r.actors[a].correct, correct[a]);
    EXPECT_EQ(r.actors[a].total, total[a]);
  }
  EXPECT_LT(r.average_all(), 100.0);
}

TEST(Score, RigidTransformInvariance) {
  const BodyModel body = default_body_model();
  const auto gt = walking_gt(10);
  std::mt19937_64 g(6);
  auto est = gt;
  for (auto& s : est) {
    for (auto& j : s.joints) *j += 60.0 * testutil::random_unit(g);
  }
  const PCPReport base = score(est, gt, body, no_offset());
  for (int t = 0; t < 20; ++t) {
    const Eigen::Matrix3d r = Eigen::AngleAxisd(0.3 + t, testutil::random_unit(g)).toRotationMatrix();
    const Eigen::Vector3d shift = testutil::random_point(g, 5000.0);
    auto te = est, tg = gt;
    for (auto* v : {&te, &tg}) {
      for (auto& s : *v) {
        for (auto& j : s.joints) *j = r * *j + shift;
      }
    }
    const PCPReport moved = score(te, tg, body, no_offset());
    for (std::size_t k = 0; k < body.part_classes.size(); ++k) {
      EXPECT_EQ(moved.average(k), base.average(k));
      for (std::size_t a = 0; a < base.actors.size(); ++a) {
        EXPECT_EQ(moved.actors[a].percent(k), base.actors[a].percent(k));
      }
    }
    EXPECT_EQ(moved.average_all(), base.average_all());
  }
}

TEST(Score, MoreNoiseNeverHelps) {
  const BodyModel body = default_body_model();
  const auto gt = walking_gt(10);
  const std::size_t parts = body.part_classes.size();
  std::vector<int> down(parts, 0), up(parts, 0);
  for (int seed = 0; seed < 20; ++seed) {
    std::mt19937_64 g(100 + seed);
    std::normal_distribution<double> n(0.0, 1.0);
    auto low = gt, high = gt;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      for (std::size_t j = 0; j < gt[i].joints.size(); ++j) {
        const Eigen::Vector3d e(n(g), n(g), n(g));
        *low[i].joints[j] += 40.0 * e;
        *high[i].joints[j] += 40.0 * e + 60.0 * Eigen::Vector3d(n(g), n(g), n(g));
      }
    }
    const PCPReport a = score(low, gt, body, no_offset());
    const PCPReport b = score(high, gt, body, no_offset());
    for (std::size_t k = 0; k < parts; ++k) {
      down[k] += b.average(k) < a.average(k);
      up[k] += b.average(k) > a.average(k);
    }
  }
  // One-sided sign test per part: P(Bin(n, 1/2) >= down) < 0.01.
  for (std::size_t k = 0; k < parts; ++k) {
    const int n = down[k] + up[k];
    double tail = 0.0;
    for (int i = down[k]; i <= n; ++i) tail += std::tgamma(n + 1.0) / (std::tgamma(i + 1.0) * std::tgamma(n - i + 1.0));
    tail /= std::pow(2.0, n);
    EXPECT_LT(tail, 0.01) << body.part_classes[k] << " down " << down[k] << " up " << up[k];
  }
}
