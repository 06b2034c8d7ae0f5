#include "posefuse/synth.hpp"

#include "posefuse/crf.hpp"
#include "posefuse/error.hpp"
#include "posefuse/io_util.hpp"
#include "posefuse/random.hpp"
#include "posefuse/sampling.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

namespace posefuse {

namespace fs = std::filesystem;

void SceneSpec::validate() const {
  if (n_cameras != 2 && n_cameras != 3) throw ConfigError("scene: n_cameras must be 2 or 3");
  if (n_frames < 3) throw ConfigError("scene: n_frames must be at least 3");
  if (n_actors < 1) throw ConfigError("scene: n_actors must be at least 1");
  if (!(heatmap_sigma_px > 0.0)) throw ConfigError("scene: heatmap_sigma_px must be > 0");
  if (!(heatmap_scale > 0.0)) throw ConfigError("scene: heatmap_scale must be > 0");
  if (!(fps > 0.0) || !(focal_px > 0.0) || !(ring_radius_mm > 0.0)) {
    throw ConfigError("scene: fps, focal_px and ring_radius_mm must be > 0");
  }
  if (image_width < 16 || image_height < 16) throw ConfigError("scene: image too small");
  if (corruption.fraction < 0.0 || corruption.fraction > 1.0) {
    throw ConfigError("scene: corruption fraction must be in [0, 1]");
  }
  auto check_window = [&](int actor, int first, int last, const char* what) {
    if (actor < 0 || actor >= n_actors || first > last) {
      throw ConfigError(std::string("scene: invalid ") + what);
    }
  };
  for (const auto& s : swaps) {
    check_window(s.actor, s.first_frame, s.last_frame, "swap event");
    for (int c : s.cameras) {
      if (c < 0 || c >= n_cameras) throw ConfigError("scene: swap camera out of range");
    }
  }
  for (const auto& o : occlusions) {
    check_window(o.actor, o.first_frame, o.last_frame, "occlusion window");
    if (o.camera < 0 || o.camera >= n_cameras) {
      throw ConfigError("scene: occlusion camera out of range");
    }
  }
}

SceneSpec parse_scene_spec(const std::string& json_text, const BodyModel& body) {
  SceneSpec s;
  try {
    const auto j = nlohmann::json::parse(json_text);
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("n_actors", s.n_actors);
    get("n_frames", s.n_frames);
    get("n_cameras", s.n_cameras);
    get("ring_radius_mm", s.ring_radius_mm);
    get("camera_height_mm", s.camera_height_mm);
    get("target_height_mm", s.target_height_mm);
    get("image_width", s.image_width);
    get("image_height", s.image_height);
    get("focal_px", s.focal_px);
    get("heatmap_scale", s.heatmap_scale);
    get("heatmap_sigma_px", s.heatmap_sigma_px);
    get("fps", s.fps);
    get("walk_speed_mm_s", s.walk_speed_mm_s);
    get("actor_spacing_mm", s.actor_spacing_mm);
    get("swing_amplitude_deg", s.swing_amplitude_deg);
    get("swing_period_s", s.swing_period_s);
    if (j.contains("corruption")) {
      const auto& c = j.at("corruption");
      const std::string mode = c.value("mode", std::string("triple"));
      if (mode == "triple") {
        s.corruption.mode = CorruptionSpec::Mode::triple;
      } else if (mode == "joint_frame") {
        s.corruption.mode = CorruptionSpec::Mode::joint_frame;
      } else {
        throw ConfigError("scene: corruption mode must be triple or joint_frame");
      }
      s.corruption.fraction = c.value("fraction", 0.0);
      s.corruption.offset_px = c.value("offset_px", s.corruption.offset_px);
      s.corruption.residual_peak = c.value("residual_peak", s.corruption.residual_peak);
    }
    for (const auto& e : j.value("swaps", nlohmann::json::array())) {
      SwapEvent w;
      w.actor = e.at("actor").get<int>();
      const std::string name = e.at("joint").get<std::string>();
      w.joint = body.joint_index(name);
      if (w.joint < 0 || body.partner(w.joint) < 0) {
        throw ConfigError("scene: swap joint '" + name + "' has no symmetric partner");
      }
      w.first_frame = e.at("first_frame").get<int>();
      w.last_frame = e.at("last_frame").get<int>();
      w.cameras = e.value("cameras", std::vector<int>{});
      w.residual_peak = e.value("residual_peak", w.residual_peak);
      s.swaps.push_back(w);
    }
    for (const auto& e : j.value("occlusions", nlohmann::json::array())) {
      s.occlusions.push_back({e.at("actor").get<int>(), e.at("camera").get<int>(),
                              e.at("first_frame").get<int>(), e.at("last_frame").get<int>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scene: ") + e.what());
  }
  s.validate();
  return s;
}

SceneSpec load_scene_spec(const std::string& path, const BodyModel& body) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  try {
    return parse_scene_spec(text, body);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string scene_spec_to_json(const SceneSpec& s, const BodyModel& body) {
  nlohmann::json j = {
      {"n_actors", s.n_actors},
      {"n_frames", s.n_frames},
      {"n_cameras", s.n_cameras},
      {"ring_radius_mm", s.ring_radius_mm},
      {"camera_height_mm", s.camera_height_mm},
      {"target_height_mm", s.target_height_mm},
      {"image_width", s.image_width},
      {"image_height", s.image_height},
      {"focal_px", s.focal_px},
      {"heatmap_scale", s.heatmap_scale},
      {"heatmap_sigma_px", s.heatmap_sigma_px},
      {"fps", s.fps},
      {"walk_speed_mm_s", s.walk_speed_mm_s},
      {"actor_spacing_mm", s.actor_spacing_mm},
      {"swing_amplitude_deg", s.swing_amplitude_deg},
      {"swing_period_s", s.swing_period_s},
      {"corruption",
       {{"mode", s.corruption.mode == CorruptionSpec::Mode::triple ? "triple" : "joint_frame"},
        {"fraction", s.corruption.fraction},
        {"offset_px", s.corruption.offset_px},
        {"residual_peak", s.corruption.residual_peak}}},
  };
  j["swaps"] = nlohmann::json::array();
  for (const auto& w : s.swaps) {
    j["swaps"].push_back({{"actor", w.actor},
                          {"joint", body.joints.at(static_cast<std::size_t>(w.joint))},
                          {"first_frame", w.first_frame},
                          {"last_frame", w.last_frame},
                          {"cameras", w.cameras},
                          {"residual_peak", w.residual_peak}});
  }
  j["occlusions"] = nlohmann::json::array();
  for (const auto& o : s.occlusions) {
    j["occlusions"].push_back({{"actor", o.actor},
                               {"camera", o.camera},
                               {"first_frame", o.first_frame},
                               {"last_frame", o.last_frame}});
  }
  return j.dump(2) + "\n";
}

std::vector<CameraCalibration> ring_cameras(const SceneSpec& spec) {
  std::vector<CameraCalibration> out;
  const Point3 target(0.0, 0.0, spec.target_height_mm);
  for (int c = 0; c < spec.n_cameras; ++c) {
    // Start off the walking axis so no camera looks straight down a path.
    const double a = 2.0 * std::numbers::pi * c / spec.n_cameras + std::numbers::pi / 6.0;
    const Point3 center(spec.ring_radius_mm * std::cos(a), spec.ring_radius_mm * std::sin(a),
                        spec.camera_height_mm);
    out.push_back(look_at_camera("cam" + std::to_string(c), center, target, spec.focal_px,
                                 spec.image_width, spec.image_height));
  }
  return out;
}

Skeleton3D actor_pose(const SceneSpec& spec, int actor, int frame) {
  using namespace joint;
  const double dir = actor % 2 == 0 ? 1.0 : -1.0;
  const double t = frame / spec.fps;
  const double duration = (spec.n_frames - 1) / spec.fps;
  const double y = (actor - (spec.n_actors - 1) / 2.0) * spec.actor_spacing_mm;
  const double x = dir * spec.walk_speed_mm_s * (t - duration / 2.0);
  const double phase = 2.0 * std::numbers::pi * t / spec.swing_period_s + 0.7 * actor;
  const double amp = spec.swing_amplitude_deg * std::numbers::pi / 180.0;

  const Eigen::Vector3d fwd(dir, 0.0, 0.0);
  const Eigen::Vector3d left(0.0, dir, 0.0);
  const Eigen::Vector3d up(0.0, 0.0, 1.0);
  const Point3 root(x, y, 0.0);
  auto seg = [&](double angle, double length) -> Eigen::Vector3d {
    return length * (std::sin(angle) * fwd - std::cos(angle) * up);
  };

  std::vector<Point3> p(count);
  p[head_top] = root + 1750.0 * up;
  p[neck] = root + 1500.0 * up;
  p[l_shoulder] = root + 1450.0 * up + 190.0 * left;
  p[r_shoulder] = root + 1450.0 * up - 190.0 * left;
  p[l_hip] = root + 950.0 * up + 110.0 * left;
  p[r_hip] = root + 950.0 * up - 110.0 * left;
  const double arm = amp * std::sin(phase);
  p[l_elbow] = p[l_shoulder] + seg(arm, 300.0);
  p[r_elbow] = p[r_shoulder] + seg(-arm, 300.0);
  p[l_wrist] = p[l_elbow] + seg(1.3 * arm + 0.2, 280.0);
  p[r_wrist] = p[r_elbow] + seg(-1.3 * arm + 0.2, 280.0);
  const double leg = -amp * std::sin(phase);
  p[l_knee] = p[l_hip] + seg(leg, 430.0);
  p[r_knee] = p[r_hip] + seg(-leg, 430.0);
  p[l_ankle] = p[l_knee] + seg(0.5 * leg - 0.1, 430.0);
  p[r_ankle] = p[r_knee] + seg(-0.5 * leg - 0.1, 430.0);

  Skeleton3D s;
  s.person_id = actor;
  s.frame_index = frame;
  for (const auto& q : p) s.joints.emplace_back(q);
  return s;
}

namespace {

std::vector<std::size_t> shuffled(std::size_t n, SeededRandomSource& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[rng.index(i)]);
  }
  return order;
}

}  // namespace

SyntheticScene::SyntheticScene(SceneSpec spec, std::uint64_t seed, BodyModel body)
    : spec_(std::move(spec)), body_(std::move(body)), cameras_(ring_cameras(spec_)) {
  spec_.validate();
  body_.validate();
  if (body_.n_joints() != joint::count) {
    throw ConfigError("scene: the synthetic actor uses the 14-joint layout");
  }
  for (int f = 0; f < spec_.n_frames; ++f) {
    for (int a = 0; a < spec_.n_actors; ++a) ground_truth_.push_back(actor_pose(spec_, a, f));
  }

  // Every joint must be seen by some camera in at least half of the frames.
  for (int a = 0; a < spec_.n_actors; ++a) {
    for (int j = 0; j < joint::count; ++j) {
      int unseen = 0;
      for (int f = 0; f < spec_.n_frames; ++f) {
        const Point3& p = *pose(a, f).joints[j];
        bool seen = false;
        for (const auto& cam : cameras_) seen = seen || cam.project(p).visible();
        unseen += !seen;
      }
      if (2 * unseen > spec_.n_frames) {
        throw ActorOutOfView("actor " + std::to_string(a) + " joint " + body_.joints[j] +
                             " is outside every camera in most frames");
      }
    }
  }

  SeededRandomSource rng = SeededRandomSource::derive(seed, {0x636f7272});
  const auto& c = spec_.corruption;
  if (c.fraction <= 0.0) return;
  const int F = spec_.n_frames, J = joint::count, C = spec_.n_cameras, A = spec_.n_actors;
  if (c.mode == CorruptionSpec::Mode::triple) {
    const std::size_t total = static_cast<std::size_t>(F) * J * C;
    const auto n = static_cast<std::size_t>(std::llround(c.fraction * static_cast<double>(total)));
    const auto order = shuffled(total, rng);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = order[i];
      CorruptionEvent e;
      e.actor = -1;
      e.frame = static_cast<int>(k / (J * C));
      e.joint = static_cast<int>((k / C) % J);
      e.camera = static_cast<int>(k % C);
      const double angle = 2.0 * std::numbers::pi * rng.uniform();
      e.offset_px = c.offset_px * PixelCoord(std::cos(angle), std::sin(angle));
      corruptions_.push_back(e);
    }
  } else {
    const std::size_t total = static_cast<std::size_t>(A) * F * J;
    const auto n = static_cast<std::size_t>(std::llround(c.fraction * static_cast<double>(total)));
    const std::size_t interior = static_cast<std::size_t>(A) * (F - 2) * J;
    const auto order = shuffled(interior, rng);
    std::vector<char> taken(total, 0);
    std::vector<char> frame_taken(static_cast<std::size_t>(A) * F, 0);
    auto idx = [&](int a, int f, int j) {
      return (static_cast<std::size_t>(a) * F + f) * J + j;
    };
    for (std::size_t k : order) {
      if (corruptions_.size() == n) break;
      const int a = static_cast<int>(k / ((F - 2) * J));
      const int f = 1 + static_cast<int>((k / J) % (F - 2));
      const int j = static_cast<int>(k % J);
      if (taken[idx(a, f - 1, j)] || taken[idx(a, f + 1, j)]) continue;
      if (frame_taken[static_cast<std::size_t>(a) * F + f]) continue;
      taken[idx(a, f, j)] = 1;
      frame_taken[static_cast<std::size_t>(a) * F + f] = 1;
      CorruptionEvent e;
      e.actor = a;
      e.frame = f;
      e.joint = j;
      const Point3 truth = *pose(a, f).joints[j];
      double depth = 0.0;
      for (const auto& cam : cameras_) depth = std::max(depth, cam.project(truth).depth);
      double m = c.offset_px * depth / spec_.focal_px;
      auto min_shift = [&](double lift) {
        double shift = std::numeric_limits<double>::infinity();
        for (const auto& cam : cameras_) {
          const Point3 ph = truth + Point3(0.0, 0.0, lift);
          shift = std::min(shift, (cam.project(ph).pixel - cam.project(truth).pixel).norm());
        }
        return shift;
      };
      while (min_shift(m) < c.offset_px) m *= 1.1;
      e.phantom = truth + Point3(0.0, 0.0, m);
      corruptions_.push_back(e);
    }
    if (corruptions_.size() < n) {
      throw ConfigError("scene: corruption fraction too high for single-frame events");
    }
  }
  std::sort(corruptions_.begin(), corruptions_.end(), [](const auto& x, const auto& y) {
    return std::tie(x.frame, x.actor, x.joint, x.camera) <
           std::tie(y.frame, y.actor, y.joint, y.camera);
  });
}

const Skeleton3D& SyntheticScene::pose(int actor, int frame) const {
  return ground_truth_[static_cast<std::size_t>(frame) * spec_.n_actors + actor];
}

std::vector<int> SyntheticScene::frames() const {
  std::vector<int> out(static_cast<std::size_t>(spec_.n_frames));
  for (int f = 0; f < spec_.n_frames; ++f) out[f] = f;
  return out;
}

bool SyntheticScene::occluded(int actor, int camera, int frame) const {
  for (const auto& o : spec_.occlusions) {
    if (o.actor == actor && o.camera == camera && frame >= o.first_frame &&
        frame <= o.last_frame) {
      return true;
    }
  }
  return false;
}

std::vector<SyntheticScene::Peak> SyntheticScene::peaks(int actor, int joint, int frame,
                                                         int camera) const {
  std::vector<Peak> out;
  if (occluded(actor, camera, frame)) return out;
  const CameraCalibration& cam = cameras_[camera];
  const Skeleton3D& gt = pose(actor, frame);
  auto add = [&](const Point3& p, double amplitude) {
    const Projection pr = cam.project(p);
    if (!pr.behind) out.push_back({pr.pixel, amplitude});
  };
  auto add_px = [&](const PixelCoord& px, double amplitude) { out.push_back({px, amplitude}); };

  double own = 1.0;
  std::vector<std::pair<Point3, double>> extra;
  std::vector<std::pair<PixelCoord, double>> extra_px;
  for (const auto& w : spec_.swaps) {
    const bool cam_ok =
        w.cameras.empty() || std::find(w.cameras.begin(), w.cameras.end(), camera) != w.cameras.end();
    if (w.actor == actor && w.joint == joint && frame >= w.first_frame &&
        frame <= w.last_frame && cam_ok) {
      own = std::min(own, w.residual_peak);
      extra.emplace_back(*gt.joints[body_.partner(joint)], 1.0);
    }
  }
  for (const auto& e : corruptions_) {
    if (e.frame != frame || e.joint != joint) continue;
    if (e.camera < 0 && e.actor == actor) {
      own = std::min(own, spec_.corruption.residual_peak);
      extra.emplace_back(e.phantom, 1.0);
    } else if (e.camera == camera && e.actor < 0) {
      own = std::min(own, spec_.corruption.residual_peak);
      const Projection pr = cam.project(*gt.joints[joint]);
      if (!pr.behind) extra_px.emplace_back(pr.pixel + e.offset_px, 1.0);
    }
  }
  if (own > 0.0) add(*gt.joints[joint], own);
  for (const auto& [p, a] : extra) add(p, a);
  for (const auto& [px, a] : extra_px) add_px(px, a);
  return out;
}

namespace {

struct Painter {
  int width, height;
  double scale, sigma_cells, radius;

  template <class F>
  void visit(const PixelCoord& px, F&& f) const {
    const double hx = px.x() * scale, hy = px.y() * scale;
    const int x0 = std::max(0, static_cast<int>(std::floor(hx - radius)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(hx + radius)));
    const int y0 = std::max(0, static_cast<int>(std::floor(hy - radius)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(hy + radius)));
    const double k = 1.0 / (2.0 * sigma_cells * sigma_cells);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - hx, dy = y - hy;
        f(x, y, std::exp(-(dx * dx + dy * dy) * k));
      }
    }
  }
};

Painter painter_for(const SceneSpec& spec) {
  Painter p;
  p.width = static_cast<int>(std::lround(spec.image_width * spec.heatmap_scale));
  p.height = static_cast<int>(std::lround(spec.image_height * spec.heatmap_scale));
  p.scale = spec.heatmap_scale;
  p.sigma_cells = spec.heatmap_sigma_px * spec.heatmap_scale;
  p.radius = std::ceil(4.0 * p.sigma_cells);
  return p;
}

}  // namespace

HeatmapStack SyntheticScene::render(int frame, int camera) const {
  const Painter painter = painter_for(spec_);
  HeatmapStack stack;
  stack.camera_id = cameras_[camera].camera_id();
  stack.frame_index = frame;
  const std::size_t cells = static_cast<std::size_t>(painter.width) * painter.height;
  for (int j = 0; j < joint::count; ++j) {
    std::vector<float> values(cells, 0.0f);
    for (int a = 0; a < spec_.n_actors; ++a) {
      for (const Peak& pk : peaks(a, j, frame, camera)) {
        painter.visit(pk.px, [&](int x, int y, double g) {
          float& cell = values[static_cast<std::size_t>(y) * painter.width + x];
          cell = std::max(cell, static_cast<float>(pk.amplitude * g));
        });
      }
    }
    Heatmap h(painter.width, painter.height, std::move(values), painter.scale);
    h.joint_index = j;
    h.camera_id = stack.camera_id;
    h.frame_index = frame;
    stack.channels.push_back(std::move(h));
  }
  return stack;
}

std::vector<HeatmapStack> SyntheticScene::heatmaps(int frame) const {
  if (frame < 0 || frame >= spec_.n_frames) {
    throw DataError("scene: frame " + std::to_string(frame) + " out of range");
  }
  std::vector<HeatmapStack> out;
  for (int c = 0; c < spec_.n_cameras; ++c) out.push_back(render(frame, c));
  return out;
}

std::map<std::string, std::vector<Skeleton2D>> SyntheticScene::keypoints(int frame) const {
  const Painter painter = painter_for(spec_);
  std::map<std::string, std::vector<Skeleton2D>> out;
  for (int c = 0; c < spec_.n_cameras; ++c) {
    auto& list = out[cameras_[c].camera_id()];
    for (int a = 0; a < spec_.n_actors; ++a) {
      if (occluded(a, c, frame)) continue;
      Skeleton2D s;
      s.camera_id = cameras_[c].camera_id();
      s.frame_index = frame;
      s.joints.resize(joint::count);
      for (int j = 0; j < joint::count; ++j) {
        // Argmax of this actor's own map, lowest cell index on ties. The
        // stored map keeps float values, so compare in float.
        const auto pk = peaks(a, j, frame, c);
        float best = 0.0f;
        long best_idx = -1;
        for (const Peak& p : pk) {
          painter.visit(p.px, [&](int x, int y, double) {
            float v = 0.0f;
            for (const Peak& q : pk) {
              const double dx = x - q.px.x() * painter.scale, dy = y - q.px.y() * painter.scale;
              v = std::max(v, static_cast<float>(
                                  q.amplitude *
                                  std::exp(-(dx * dx + dy * dy) /
                                           (2.0 * painter.sigma_cells * painter.sigma_cells))));
            }
            const long idx = static_cast<long>(y) * painter.width + x;
            if (v > best || (v == best && best_idx >= 0 && idx < best_idx)) {
              best = v;
              best_idx = idx;
            }
          });
        }
        if (best_idx < 0 || best < 0.05f) continue;
        const double hx = static_cast<double>(best_idx % painter.width);
        const double hy = static_cast<double>(best_idx / painter.width);
        s.joints[j] = Keypoint{PixelCoord(hx / painter.scale, hy / painter.scale), best};
      }
      if (s.visible_count() > 0) list.push_back(std::move(s));
    }
  }
  return out;
}

namespace {

std::string frame_file(int frame, const std::string& camera, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d_", frame);
  return buf + camera + ext;
}

}  // namespace

void write_scene(const SyntheticScene& scene, const std::string& out_dir) {
  const fs::path root(out_dir);
  fs::create_directories(root / "heatmaps");
  fs::create_directories(root / "keypoints");
  save_calibrations((root / "calibration.json").string(), scene.cameras());
  for (int f : scene.frames()) {
    const auto kp = scene.keypoints(f);
    for (int c = 0; c < static_cast<int>(scene.cameras().size()); ++c) {
      const std::string& id = scene.cameras()[c].camera_id();
      save_heatmap_file((root / "heatmaps" / frame_file(f, id, ".pfhm")).string(),
                        scene.render(f, c));
      auto it = kp.find(id);
      const std::vector<Skeleton2D> empty;
      save_keypoint_file((root / "keypoints" / frame_file(f, id, ".json")).string(),
                         it == kp.end() ? empty : it->second);
    }
  }
  save_skeletons((root / "ground_truth.json").string(), scene.ground_truth());
  write_text_file_atomic((root / "scene.json").string(),
                         scene_spec_to_json(scene.spec(), scene.body()));

  const CRFParams crf;
  char model[512];
  std::snprintf(model, sizeof model,
                "# CRF parameters; the body model is the default 14-joint layout.\n"
                "sigma_temp_mm = %.17g\ntheta1 = %.17g\ntheta2 = %.17g\n"
                "collision_unit_mm = %.17g\nepsilon_floor = %.17g\n"
                "temporal_kernel = gaussian\n",
                crf.sigma_temp_mm, crf.theta1, crf.theta2, crf.collision_unit_mm,
                crf.epsilon_floor);
  write_text_file_atomic((root / "model.txt").string(), model);

  // The synthetic head and neck sit where the ground truth puts them.
  const nlohmann::json cfg = {{"calibration", "calibration.json"},
                              {"heatmaps", "heatmaps"},
                              {"keypoints", "keypoints"},
                              {"ground_truth", "ground_truth.json"},
                              {"model_file", "model.txt"},
                              {"output", "out"},
                              {"head_offset_mm", 0.0}};
  write_text_file_atomic((root / "config.json").string(), cfg.dump(2) + "\n");
}

double expected_triangulation_radius(const SceneSpec& spec,
                                     const std::vector<CameraCalibration>& cameras) {
  if (spec.heatmap_sigma_px == 0.0) return 0.0;
  const Point3 centre(0.0, 0.0, spec.target_height_mm);
  const double h = 1e-3;
  double worst = 0.0;
  for (const auto& subset : enumerate_subsets(static_cast<int>(cameras.size()))) {
    std::vector<PixelCoord> px;
    for (int c : subset) px.push_back(cameras[c].project(centre).pixel);
    auto solve = [&](std::size_t which, int axis, double delta) {
      std::vector<Ray> rays;
      for (std::size_t k = 0; k < subset.size(); ++k) {
        PixelCoord p = px[k];
        if (k == which) p[axis] += delta;
        rays.push_back(cameras[subset[k]].backproject(p));
      }
      return triangulate(rays).point;
    };
    double trace = 0.0;  // squared Frobenius norm of the Jacobian
    for (std::size_t k = 0; k < subset.size(); ++k) {
      for (int axis = 0; axis < 2; ++axis) {
        const Point3 d = (solve(k, axis, h) - solve(k, axis, -h)) / (2.0 * h);
        trace += d.squaredNorm();
      }
    }
    worst = std::max(worst, 3.0 * spec.heatmap_sigma_px * std::sqrt(trace));
  }
  return worst;
}

}  // namespace posefuse
