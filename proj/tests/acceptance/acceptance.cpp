// End-to-end acceptance checks on synthetic scenes. Prints one PASS/FAIL line
// per criterion and exits nonzero when any check fails.

#include "posefuse/association.hpp"
#include "posefuse/bp.hpp"
#include "posefuse/crf.hpp"
#include "posefuse/evaluation.hpp"
#include "posefuse/geometry.hpp"
#include "posefuse/pipeline.hpp"
#include "posefuse/synth.hpp"

#include "brute_force.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <random>
#include <set>
#include <string>
#include <thread>

using namespace posefuse;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", criterion, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  failures += !pass;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int worker_threads() {
  return static_cast<int>(std::clamp(std::thread::hardware_concurrency(), 1u, 8u));
}

PipelineConfig synthetic_config() {
  PipelineConfig cfg;
  cfg.scoring.head_offset_mm = 0.0;  // synthetic heads carry no detector bias
  cfg.threads = worker_threads();
  return cfg;
}

// Estimate per (actor, frame), paired by the scorer's identity matching.
std::map<std::pair<int, int>, const Skeleton3D*> by_actor(const std::vector<Skeleton3D>& est,
                                                          const std::vector<Skeleton3D>& gt) {
  std::map<std::pair<int, int>, const Skeleton3D*> out;
  for (const auto& m : match_identities(est, gt)) {
    for (const auto& s : est) {
      if (s.frame_index == m.frame && s.person_id == m.person_id) out[{m.actor_id, m.frame}] = &s;
    }
  }
  return out;
}

double max_abs_diff(const std::vector<std::vector<double>>& a,
                    const std::vector<std::vector<double>>& b) {
  double d = 0.0;
  for (std::size_t v = 0; v < a.size(); ++v) {
    for (std::size_t s = 0; s < a[v].size(); ++s) d = std::max(d, std::abs(a[v][s] - b[v][s]));
  }
  return d;
}

void criterion_1() {
  std::printf("criterion  1: NOTE  dataset tables need external data and a 2D detector; "
              "covered by the synthetic checks below\n");
}

void criterion_2() {
  std::mt19937_64 g(2024);
  std::uniform_real_distribution<double> u(0.02, 1.0);
  const BodyModel body = default_body_model();
  auto chain = [&](int frames, std::size_t n) {
    std::vector<JointStateSet> sets;
    for (int t = 0; t < frames; ++t) {
      JointStateSet s;
      s.joint_index = joint::neck;
      s.frame_index = t;
      for (std::size_t i = 0; i < n; ++i) {
        s.states.push_back(Point3(30.0 * t, 0, 1500) + testutil::random_point(g, 25.0));
        s.data_values.push_back(u(g));
      }
      sets.push_back(std::move(s));
    }
    return build_graph(0, std::move(sets), body, CRFParams{}, {true, false});
  };

  const auto t0 = Clock::now();
  double worst_tree = 0.0;
  std::map<int, double> worst_loopy;
  for (int frames = 1; frames <= 5; ++frames) {
    for (std::size_t n = 2; n <= 4; ++n) {
      for (int trial = 0; trial < 10; ++trial) {
        const PersonCrf crf = chain(frames, n);
        bp::Options opt;
        opt.iterations = 50;
        const double err = max_abs_diff(bp::run(crf.graph, opt).beliefs,
                                        testutil::brute_force_marginals(crf.graph));
        if (frames <= 3) {
          worst_tree = std::max(worst_tree, err);
        } else {
          worst_loopy[frames] = std::max(worst_loopy[frames], err);
        }
      }
    }
  }
  const double elapsed = seconds_since(t0);
  report(2, worst_tree < 1e-9 && elapsed < 1.0,
         fmt("acyclic chains (1-3 frames, 2-4 states) max |BP - exact| = %.2e, %.3f s", worst_tree,
             elapsed));
  std::printf("              info: 4 frames %.2e, 5 frames %.2e (overlapping ternary factors form loops)\n",
              worst_loopy[4], worst_loopy[5]);
}

void criteria_3_4_10() {
  SceneSpec spec;  // 3 cameras, 50 frames, 2 actors, no corruption
  const SyntheticScene scene(spec, 1);
  const PipelineConfig cfg = synthetic_config();

  const auto t0 = Clock::now();
  const PipelineResult r = run_pipeline(cfg, scene, &scene.ground_truth());
  const double elapsed = seconds_since(t0);

  double change5 = 0.0;
  bool finite = true, have5 = !r.persons.empty();
  for (const auto& p : r.persons) {
    for (double c : p.max_change) finite = finite && std::isfinite(c);
    if (p.max_change.size() < 5) {
      have5 = false;
    } else {
      change5 = std::max(change5, p.max_change[4]);
    }
  }
  report(3, have5 && finite && change5 < 1e-6 && elapsed < 300.0,
         fmt("max message change at iteration 5 = %.2e over %zu identities, %.1f s", change5,
             r.persons.size(), elapsed));

  bool all_parts = r.report.has_value();
  std::string parts;
  if (r.report) {
    for (std::size_t k = 0; k < r.report->part_classes.size(); ++k) {
      all_parts = all_parts && r.report->average(k) == 100.0;
      for (const auto& a : r.report->actors) all_parts = all_parts && a.percent(k) == 100.0;
      parts += fmt(" %s=%.2f", r.report->part_classes[k].c_str(), r.report->average(k));
    }
  }
  const auto matched = by_actor(r.skeletons, scene.ground_truth());
  double sum = 0.0;
  int count = 0;
  for (const auto& g : scene.ground_truth()) {
    const auto it = matched.find({g.person_id, g.frame_index});
    for (int j = 0; j < joint::count; ++j) {
      if (it == matched.end() || !it->second->has(j)) {
        sum = std::numeric_limits<double>::infinity();
        continue;
      }
      sum += (*it->second->joints[j] - *g.joints[j]).norm();
      ++count;
    }
  }
  const double mean_err = count ? sum / count : std::numeric_limits<double>::infinity();
  const double radius = expected_triangulation_radius(spec, scene.cameras());
  report(4, all_parts && mean_err < radius && elapsed < 300.0,
         fmt("PCP%s; mean joint error %.2f mm < radius %.2f mm", parts.c_str(), mean_err, radius));

  const PipelineResult again = run_pipeline(cfg, scene, &scene.ground_truth());
  const std::string a = skeletons_to_json(r.skeletons), b = skeletons_to_json(again.skeletons);
  report(10, a == b, fmt("two runs, seed %llu: %zu bytes each, %s", static_cast<unsigned long long>(cfg.seed),
                         a.size(), a == b ? "identical" : "different"));
}

void criterion_5() {
  SceneSpec spec;
  spec.corruption.mode = CorruptionSpec::Mode::joint_frame;
  spec.corruption.fraction = 0.05;
  const SyntheticScene scene(spec, 1);
  const BodyModel body = default_body_model();
  const auto& gt = scene.ground_truth();

  PipelineConfig cfg = synthetic_config();
  const PipelineResult all = run_pipeline(cfg, scene, &gt);
  cfg.factors = parse_factor_list("data");
  const PipelineResult data = run_pipeline(cfg, scene, &gt);
  const auto ma = by_actor(all.skeletons, gt), md = by_actor(data.skeletons, gt);

  // Misplaced: far enough to break the shortest limb touching the joint.
  int events = 0, misplaced = 0, fixed = 0;
  for (const auto& e : scene.corruptions()) {
    const Skeleton3D& truth = gt[e.frame * spec.n_actors + e.actor];
    double shortest = std::numeric_limits<double>::infinity();
    for (auto [a, b] : body.limbs) {
      if (a == e.joint || b == e.joint) {
        shortest = std::min(shortest, (*truth.joints[a] - *truth.joints[b]).norm());
      }
    }
    auto error = [&](const auto& m) {
      const auto it = m.find({e.actor, e.frame});
      if (it == m.end() || !it->second->has(e.joint)) return std::numeric_limits<double>::infinity();
      return (*it->second->joints[e.joint] - *truth.joints[e.joint]).norm();
    };
    ++events;
    if (error(md) >= ScoreParams{}.alpha * shortest) {
      ++misplaced;
      if (error(ma) < ScoreParams{}.alpha * shortest) ++fixed;
    }
  }
  bool every_actor = all.report && data.report && all.report->actors.size() == data.report->actors.size();
  std::string per_actor;
  if (every_actor) {
    for (std::size_t a = 0; a < all.report->actors.size(); ++a) {
      const double pa = all.report->actors[a].percent_all(), pd = data.report->actors[a].percent_all();
      every_actor = every_actor && pa >= pd;
      per_actor += fmt(" actor %d %.2f vs %.2f;", all.report->actors[a].actor_id, pa, pd);
    }
  }
  const double offset_sigmas = spec.corruption.offset_px / spec.heatmap_sigma_px;
  report(5,
         events > 0 && offset_sigmas >= 8.0 && misplaced >= 0.8 * events && fixed >= 0.8 * misplaced &&
             every_actor,
         fmt("%d corrupted joints (%.0f sigma); data-only misplaces %d, all factors fix %d; PCP all vs data:%s",
             events, offset_sigmas, misplaced, fixed, per_actor.c_str()));
}

void criterion_6() {
  SceneSpec spec;
  spec.swaps.push_back({0, joint::l_wrist, 10, 19, {}, 0.5});
  spec.swaps.push_back({1, joint::l_ankle, 20, 29, {}, 0.5});
  spec.swaps.push_back({0, joint::l_elbow, 30, 39, {}, 0.5});
  spec.swaps.push_back({1, joint::l_knee, 5, 14, {}, 0.5});
  const SyntheticScene scene(spec, 1);
  const BodyModel body = default_body_model();

  auto close_fraction = [&](const char* factors, int& close, int& total) {
    PipelineConfig cfg = synthetic_config();
    cfg.factors = parse_factor_list(factors);
    const PipelineResult r = run_pipeline(cfg, scene);
    close = total = 0;
    for (const auto& s : r.skeletons) {
      for (auto [l, rr] : body.collision_pairs) {
        if (!s.has(l) || !s.has(rr)) continue;
        ++total;
        close += (*s.joints[l] - *s.joints[rr]).norm() < 30.0;
      }
    }
    return total ? static_cast<double>(close) / total : 1.0;
  };
  int c_off, t_off, c_on, t_on;
  const double off = close_fraction("data", c_off, t_off);
  const double on = close_fraction("data,col", c_on, t_on);

  const CRFParams params;
  const double mid = eval_collision(Point3(0, 0, 0), Point3(150.0, 0, 0), params);
  report(6, on < off && mid == 0.5,
         fmt("left/right within 3 cm: collision on %d/%d, off %d/%d; f_col(15 cm) = %.17g", c_on, t_on,
             c_off, t_off, mid));
}

void criterion_7() {
  bool ok = true;
  std::string detail;
  const double sigma = 20.0;
  const Point3 prev(0, 0, 0), next(100, 40, -20), mid = 0.5 * (prev + next);
  ok = ok && eval_temporal(mid, prev, next, 0.5, sigma, TemporalKernel::gaussian) == 1.0;
  double worst_sigma = 0.0;
  std::mt19937_64 g(7);
  for (int i = 0; i < 100; ++i) {
    const Point3 s = mid + sigma * testutil::random_unit(g);
    worst_sigma = std::max(worst_sigma, std::abs(eval_temporal(s, prev, next, 0.5, sigma, TemporalKernel::gaussian) -
                                                 std::exp(-0.5)));
  }
  ok = ok && worst_sigma < 1e-12;
  detail += fmt("temporal midpoint 1, one-sigma error %.1e; ", worst_sigma);

  // Data term: heat maps with known values at the state's projections.
  SceneSpec spec;
  const auto cams = ring_cameras(spec);
  const Point3 state(0, 0, spec.target_height_mm);
  const Heatmap ones = testutil::constant_map(spec.image_width, spec.image_height, 1.0f);
  const Heatmap h08 = testutil::constant_map(spec.image_width, spec.image_height, 0.8f);
  const Heatmap h04 = testutil::constant_map(spec.image_width, spec.image_height, 0.4f);
  const Heatmap h09 = testutil::constant_map(spec.image_width, spec.image_height, 0.9f);
  const std::vector<JointView> both_one{{&ones, &cams[0], {}}, {&ones, &cams[1], {}}};
  const std::vector<JointView> mixed{{&h08, &cams[0], {}}, {&h04, &cams[1], {}}};
  const double d1 = eval_data(state, both_one), d2 = eval_data(state, mixed);
  // A third camera in front of the state, facing away from it.
  const CameraCalibration away = look_at_camera("away", state + Point3(0, -1000, 0), state + Point3(0, -5000, 0),
                                                spec.focal_px, spec.image_width, spec.image_height);
  const std::vector<JointView> behind{{&h09, &cams[0], {}}, {&h09, &cams[1], {}}, {&h09, &away, {}}};
  const bool behind_ok = away.project(state).behind && cams[0].project(state).in_image &&
                         cams[1].project(state).in_image;
  const double d3 = eval_data(state, behind);
  const double want3 = (static_cast<double>(0.9f) * 2 + kHeatmapFloor) / 3.0;
  ok = ok && std::abs(d1 - 1.0) < 1e-12 && std::abs(d2 - 0.6) < 1e-7 && behind_ok && std::abs(d3 - want3) < 1e-15;
  detail += fmt("data 1.0 / %.7f / %.7f; ", d2, d3);

  // Two skew rays: midpoint of the common perpendicular in long double.
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Ray a{testutil::random_point(g, 3000.0), testutil::random_unit(g)};
    const Ray b{testutil::random_point(g, 3000.0), testutil::random_unit(g)};
    Eigen::Vector3d pa, pb;
    testutil::closest_points(a, b, pa, pb);
    const std::vector<Ray> rays{a, b};
    worst = std::max(worst, (triangulate(rays).point - 0.5 * (pa + pb)).norm());
  }
  ok = ok && worst < 1e-9;
  detail += fmt("triangulation max error %.2e mm over 1000 skew pairs", worst);
  report(7, ok, detail);
}

void criterion_8() {
  bool ok = true;
  const BoundingBox unit{0, 0, 1, 1};
  ok = ok && iou(unit, unit) == 1.0 && iou(unit, {2, 2, 3, 3}) == 0.0 &&
       iou(unit, {0.5, 0, 1.5, 1}) == 1.0 / 3.0;

  SceneSpec spec;
  const auto cams = ring_cameras(spec);
  const Skeleton3D body = actor_pose(spec, 0, 7);
  auto project = [](const Skeleton3D& s, const CameraCalibration& cam) {
    Skeleton2D out;
    out.camera_id = cam.camera_id();
    for (const auto& j : s.joints) out.joints.push_back(Keypoint{cam.project(*j).pixel, 1.0});
    return out;
  };
  const Skeleton2D a = project(body, cams[0]);
  const bool same = link_views(a, project(body, cams[1]), cams[0], cams[1]);
  Skeleton3D shifted = body;
  for (auto& j : shifted.joints) {
    const Eigen::Vector3d da = (*j - cams[0].center()).normalized();
    const Eigen::Vector3d db = (*j - cams[1].center()).normalized();
    *j += 50.0 * da.cross(db).normalized();
  }
  const bool far = link_views(a, project(shifted, cams[1]), cams[0], cams[1]);
  Skeleton2D few = project(body, cams[1]);
  for (int j = 3; j < joint::count; ++j) few.joints[j].reset();
  const bool three = link_views(a, few, cams[0], cams[1]);
  ok = ok && same && !far && !three;

  auto track = [](int id, int n_cams) {
    PersonTrack t;
    t.person_id = id;
    for (int c = 0; c < n_cams; ++c) t.frames[0]["cam" + std::to_string(c)] = Skeleton2D{};
    return t;
  };
  const auto pruned = prune_single_view({track(0, 3), track(1, 1), track(2, 2)}, 0);
  bool prune_ok = pruned.size() == 2;
  for (const auto& t : pruned) prune_ok = prune_ok && t.frames.at(0).size() >= 2;
  ok = ok && prune_ok;
  report(8, ok, fmt("IoU cases exact; link same-body %d, 50 mm %d, 3 mutual joints %d; pruning %s", same,
                    far, three, prune_ok ? "keeps only multi-camera identities" : "wrong"));
}

void criterion_9() {
  SceneSpec spec;
  spec.n_frames = 10;
  const BodyModel body = default_body_model();
  std::vector<Skeleton3D> gt;
  for (int f = 0; f < spec.n_frames; ++f) {
    for (int a = 0; a < spec.n_actors; ++a) gt.push_back(actor_pose(spec, a, f));
  }
  ScoreParams params;
  params.head_offset_mm = 0.0;
  const PCPReport perfect = score(gt, gt, body, params);
  const Point3 p(0, 0, 0), q(400, 0, 0);
  const bool boundary = !limb_correct(p + Point3(200, 0, 0), q, p, q) &&
                        limb_correct(p + Point3(199.999, 0, 0), q, p, q);

  std::mt19937_64 g(9);
  auto est = gt;
  for (auto& s : est) {
    for (auto& j : s.joints) *j += 60.0 * testutil::random_unit(g);
  }
  const PCPReport base = score(est, gt, body, params);
  bool invariant = true;
  for (int t = 0; t < 20; ++t) {
    const Eigen::Matrix3d r = Eigen::AngleAxisd(0.3 + t, testutil::random_unit(g)).toRotationMatrix();
    const Eigen::Vector3d shift = testutil::random_point(g, 5000.0);
    auto te = est, tg = gt;
    for (auto* v : {&te, &tg}) {
      for (auto& s : *v) {
        for (auto& j : s.joints) *j = r * *j + shift;
      }
    }
    const PCPReport moved = score(te, tg, body, params);
    for (std::size_t k = 0; k < body.part_classes.size(); ++k) {
      invariant = invariant && moved.average(k) == base.average(k);
      for (std::size_t a = 0; a < base.actors.size(); ++a) {
        invariant = invariant && moved.actors[a].percent(k) == base.actors[a].percent(k);
      }
    }
  }
  report(9, perfect.average_all() == 100.0 && boundary && invariant,
         fmt("perfect %.1f; 0.5 L boundary %s; 20 rigid transforms %s (base %.2f)", perfect.average_all(),
             boundary ? "false as required" : "wrong", invariant ? "bit-identical" : "differ",
             base.average_all()));
}

}  // namespace

// Optional arguments pick criteria by number; none runs everything.
int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  auto want = [&](int c) { return only.empty() || only.count(c) > 0; };
  if (want(1)) criterion_1();
  if (want(2)) criterion_2();
  if (want(3) || want(4) || want(10)) criteria_3_4_10();
  if (want(5)) criterion_5();
  if (want(6)) criterion_6();
  if (want(7)) criterion_7();
  if (want(8)) criterion_8();
  if (want(9)) criterion_9();
  std::printf("%s: %d failing criteria\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
