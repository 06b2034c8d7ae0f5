#include "posefuse/pipeline.hpp"

#include "posefuse/error.hpp"
#include "posefuse/io_util.hpp"
#include "posefuse/png_io.hpp"
#include "posefuse/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

namespace posefuse {

namespace fs = std::filesystem;

FactorToggles parse_factor_list(const std::string& list) {
  FactorToggles t{false, false};
  bool data = false;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
    if (item == "data") {
      data = true;
    } else if (item == "temp" || item == "temporal") {
      t.temporal = true;
    } else if (item == "col" || item == "collision") {
      t.collision = true;
    } else if (!item.empty()) {
      throw ConfigError("factors: unknown factor '" + item + "'");
    }
  }
  if (!data) throw ConfigError("factors: the data term cannot be disabled");
  return t;
}

namespace {

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty()) return p;
  fs::path path(p);
  if (path.is_absolute()) return p;
  return (fs::path(base) / path).lexically_normal().string();
}

void require_exists(const std::string& path, const char* what) {
  if (!fs::exists(path)) throw ConfigError(std::string(what) + " not found: " + path);
}

}  // namespace

PipelineConfig parse_pipeline_config(const std::string& json_text, const std::string& base_dir) {
  PipelineConfig c;
  try {
    const auto j = nlohmann::json::parse(json_text);
    auto path = [&](const char* key, bool required) {
      if (!j.contains(key)) {
        if (required) throw ConfigError(std::string("config: missing '") + key + "'");
        return std::string();
      }
      return resolve(base_dir, j.at(key).get<std::string>());
    };
    c.calibration = path("calibration", true);
    c.heatmaps = path("heatmaps", true);
    c.keypoints = path("keypoints", true);
    c.output = path("output", true);
    c.ground_truth = path("ground_truth", false);
    c.model_file = path("model_file", false);

    require_exists(c.calibration, "calibration file");
    require_exists(c.heatmaps, "heat-map directory");
    require_exists(c.keypoints, "keypoint directory");
    if (!c.ground_truth.empty()) require_exists(c.ground_truth, "ground-truth file");
    if (!c.model_file.empty()) {
      require_exists(c.model_file, "model file");
      c.model = load_model_file(c.model_file);
    }

    c.png_heatmap_scale = j.value("png_heatmap_scale", c.png_heatmap_scale);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    c.dump_states = j.value("dump_states", c.dump_states);
    c.dump_beliefs = j.value("dump_beliefs", c.dump_beliefs);
    c.scoring.alpha = j.value("alpha", c.scoring.alpha);
    c.scoring.head_offset_mm = j.value("head_offset_mm", c.scoring.head_offset_mm);
    if (j.contains("factors")) {
      std::string list;
      for (const auto& f : j.at("factors")) list += f.get<std::string>() + ",";
      c.factors = parse_factor_list(list);
    }
    if (j.contains("association")) {
      const auto& a = j.at("association");
      auto& p = c.association;
      p.iou_threshold = a.value("iou", p.iou_threshold);
      p.ray_distance_mm = a.value("ray_distance_mm", p.ray_distance_mm);
      p.min_mutual_joints = a.value("min_mutual_joints", p.min_mutual_joints);
      p.gap_max = a.value("gap_max", p.gap_max);
      p.box_padding = a.value("box_padding", p.box_padding);
      p.keypoint_margin = a.value("keypoint_margin", p.keypoint_margin);
    }
    if (j.contains("sampling")) {
      const auto& s = j.at("sampling");
      auto& p = c.sampling;
      p.n_states = s.value("n_states", p.n_states);
      p.max_attempts = s.value("max_attempts", p.max_attempts);
      p.roi_padding = s.value("roi_padding", p.roi_padding);
    }
    if (j.contains("bp")) {
      const auto& b = j.at("bp");
      c.bp.iterations = b.value("iterations", c.bp.iterations);
      c.bp.damping = b.value("damping", c.bp.damping);
      c.bp.tolerance = b.value("tolerance", c.bp.tolerance);
    }
    if (j.contains("crf")) {
      const auto& k = j.at("crf");
      auto& p = c.model.crf;
      p.sigma_temp_mm = k.value("sigma_temp_mm", p.sigma_temp_mm);
      p.theta1 = k.value("theta1", p.theta1);
      p.theta2 = k.value("theta2", p.theta2);
      p.collision_unit_mm = k.value("collision_unit_mm", p.collision_unit_mm);
      p.epsilon_floor = k.value("epsilon_floor", p.epsilon_floor);
      if (k.contains("temporal_kernel")) {
        const auto kernel = k.at("temporal_kernel").get<std::string>();
        if (kernel == "gaussian") {
          p.temporal_kernel = TemporalKernel::gaussian;
        } else if (kernel == "literal") {
          p.temporal_kernel = TemporalKernel::literal;
        } else {
          throw ConfigError("config: temporal_kernel must be gaussian or literal");
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  c.model.crf.validate();
  if (c.sampling.n_states < 1 || c.sampling.max_attempts < 1 || c.sampling.roi_padding < 0.0) {
    throw ConfigError("config: sampling values out of range");
  }
  if (c.bp.iterations < 0 || c.bp.damping < 0.0 || c.bp.damping >= 1.0) {
    throw ConfigError("config: bp iterations must be >= 0 and damping in [0, 1)");
  }
  if (c.threads < 1) throw ConfigError("config: threads must be >= 1");
  if (!(c.scoring.alpha > 0.0)) throw ConfigError("config: alpha must be > 0");
  if (!(c.png_heatmap_scale > 0.0)) throw ConfigError("config: png_heatmap_scale must be > 0");
  if (c.association.min_mutual_joints < 1 || c.association.gap_max < 0) {
    throw ConfigError("config: association values out of range");
  }
  return c;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  const std::string base = fs::path(path).parent_path().string();
  try {
    return parse_pipeline_config(text, base.empty() ? "." : base);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

namespace {

std::string frame_prefix(int frame) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d_", frame);
  return buf;
}

}  // namespace

FileFrameSource::FileFrameSource(const PipelineConfig& config)
    : heatmap_dir_(config.heatmaps),
      keypoint_dir_(config.keypoints),
      png_scale_(config.png_heatmap_scale),
      n_joints_(config.model.body.n_joints()),
      margin_(config.association.keypoint_margin) {
  try {
    cameras_ = load_calibrations(config.calibration);
  } catch (const DataError& e) {
    throw DataError(std::string("loading calibration: ") + e.what());
  }
  const std::regex name(R"((\d{6})_(.+)\.json)");
  std::set<int> frames;
  for (const auto& entry : fs::directory_iterator(keypoint_dir_)) {
    std::smatch m;
    const std::string file = entry.path().filename().string();
    if (!entry.is_regular_file() || !std::regex_match(file, m, name)) continue;
    if (find_camera(cameras_, m[2].str()) < 0) {
      throw DataError(entry.path().string() + ": unknown camera '" + m[2].str() + "'");
    }
    frames.insert(std::stoi(m[1].str()));
  }
  frames_.assign(frames.begin(), frames.end());
}

std::map<std::string, std::vector<Skeleton2D>> FileFrameSource::keypoints(int frame) const {
  std::map<std::string, std::vector<Skeleton2D>> out;
  for (const auto& cam : cameras_) {
    const fs::path p = fs::path(keypoint_dir_) / (frame_prefix(frame) + cam.camera_id() + ".json");
    if (!fs::exists(p)) continue;
    out[cam.camera_id()] = load_keypoint_file(p.string(), cam, frame, n_joints_, margin_);
  }
  return out;
}

std::vector<HeatmapStack> FileFrameSource::heatmaps(int frame) const {
  std::vector<HeatmapStack> out;
  for (const auto& cam : cameras_) {
    const std::string stem = frame_prefix(frame) + cam.camera_id();
    const fs::path bin = fs::path(heatmap_dir_) / (stem + ".pfhm");
    HeatmapStack stack;
    if (fs::exists(bin)) {
      stack = load_heatmap_file(bin.string(), cam.camera_id(), frame);
    } else {
      stack.camera_id = cam.camera_id();
      stack.frame_index = frame;
      for (int j = 0; j < n_joints_; ++j) {
        char suffix[32];
        std::snprintf(suffix, sizeof suffix, "_j%02d.png", j);
        const fs::path png = fs::path(heatmap_dir_) / (stem + suffix);
        if (!fs::exists(png)) {
          throw DataError("missing heat maps for frame " + std::to_string(frame) +
                          ", camera " + cam.camera_id() + ": " + bin.string());
        }
        Heatmap h = load_heatmap_png(png.string(), png_scale_);
        h.joint_index = j;
        h.camera_id = cam.camera_id();
        h.frame_index = frame;
        stack.channels.push_back(std::move(h));
      }
    }
    if (static_cast<int>(stack.channels.size()) < n_joints_) {
      throw DataError(bin.string() + ": fewer channels than joints");
    }
    out.push_back(std::move(stack));
  }
  return out;
}

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers. The exception of
// the lowest failing index is rethrown, so failures are reproducible.
template <class F>
void parallel_for(std::size_t n, int threads, F&& fn) {
  std::vector<std::exception_ptr> errors(n);
  auto body = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) body(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

[[noreturn]] void rethrow_with_context(const std::string& context) {
  try {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(context + ": " + e.what());
  } catch (const Error& e) {
    throw DataError(context + ": " + e.what());
  }
}

std::string format_change(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config, const FrameSource& source,
                            const std::vector<Skeleton3D>* ground_truth) {
  const BodyModel& body = config.model.body;
  const auto& cameras = source.cameras();
  const int n_joints = body.n_joints();
  PipelineResult result;

  // Association.
  {
    Associator assoc(cameras, config.association);
    for (int f : source.frames()) {
      try {
        assoc.add_frame(f, source.keypoints(f));
      } catch (const Error&) {
        rethrow_with_context("association, frame " + std::to_string(f));
      }
    }
    result.tracks = assoc.finish();
  }
  result.log.push_back("association: " + std::to_string(result.tracks.size()) + " identities");

  // Sampling and data scoring, one frame of heat maps at a time.
  std::vector<std::vector<JointStateSet>> sets(result.tracks.size());
  std::set<int> frames_needed;
  for (const auto& t : result.tracks) {
    for (const auto& [f, views] : t.frames) frames_needed.insert(f);
  }
  for (int f : frames_needed) {
    std::vector<HeatmapStack> stacks;
    try {
      stacks = source.heatmaps(f);
      for (std::size_t c = 0; c < stacks.size(); ++c) {
        for (int j = 0; j < n_joints; ++j) {
          check_heatmap_matches_camera(stacks[c].channels[j], cameras[c]);
        }
      }
    } catch (const Error&) {
      rethrow_with_context("loading heat maps, frame " + std::to_string(f));
    }

    struct Job {
      std::size_t track;
      int joint;
    };
    std::vector<Job> jobs;
    for (std::size_t t = 0; t < result.tracks.size(); ++t) {
      if (!result.tracks[t].frames.count(f)) continue;
      for (int j = 0; j < n_joints; ++j) jobs.push_back({t, j});
    }
    std::vector<std::optional<JointStateSet>> out(jobs.size());
    parallel_for(jobs.size(), config.threads, [&](std::size_t i) {
      const auto& track = result.tracks[jobs[i].track];
      const int j = jobs[i].joint;
      try {
        std::vector<JointView> views;
        for (const auto& [cam_id, skel] : track.frames.at(f)) {
          if (!skel.visible(j)) continue;
          const int c = find_camera(cameras, cam_id);
          const Heatmap& h = stacks[c].channels[j];
          CellRect region = h.full_rect();
          try {
            const BoundingBox b = bounding_box(skel, config.sampling.roi_padding);
            region = h.cells_for_image_box(b.x_min, b.y_min, b.x_max, b.y_max);
          } catch (const DegenerateBox&) {
          }
          try {
            build_pmf(h, region);
          } catch (const EmptyHeatmap&) {
            continue;  // no evidence for this joint in this view
          }
          views.push_back({&h, &cameras[c], region});
        }
        if (views.size() < 2) return;
        auto rng = SeededRandomSource::derive(
            config.seed, {static_cast<std::uint64_t>(track.person_id),
                          static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(f)});
        JointStateSet set = sample_states(views, rng, config.sampling);
        set.person_id = track.person_id;
        set.joint_index = j;
        set.frame_index = f;
        score_states(set, views, config.model.crf);
        out[i] = std::move(set);
      } catch (const Error&) {
        rethrow_with_context("sampling, frame " + std::to_string(f) + ", person " +
                             std::to_string(track.person_id) + ", joint " + body.joints[j]);
      }
    });
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (out[i]) sets[jobs[i].track].push_back(std::move(*out[i]));
    }
  }

  // Inference, one CRF per identity.
  struct PersonOutput {
    PersonDiagnostics diag;
    std::vector<Skeleton3D> skeletons;
    std::string states_csv;
    std::string beliefs_json;
    std::vector<std::string> log;
  };
  std::vector<PersonOutput> persons(result.tracks.size());
  parallel_for(result.tracks.size(), config.threads, [&](std::size_t t) {
    PersonOutput& po = persons[t];
    const int pid = result.tracks[t].person_id;
    po.diag.person_id = pid;
    for (const auto& s : sets[t]) po.diag.fallback_states += s.fallback_count;
    if (config.dump_states) {
      for (const auto& s : sets[t]) po.states_csv += states_to_csv(s);
    }
    try {
      PersonCrf crf;
      try {
        crf = build_graph(pid, std::move(sets[t]), body, config.model.crf, config.factors);
      } catch (const EmptyTrack& e) {
        po.diag.skipped = e.what();
        po.log.push_back("person " + std::to_string(pid) + ": skipped, " + e.what());
        return;
      }
      po.diag.variables = crf.graph.n_variables();
      po.diag.data_factors = crf.graph.count(FactorKind::data);
      po.diag.temporal_factors = crf.graph.count(FactorKind::temporal);
      po.diag.collision_factors = crf.graph.count(FactorKind::collision);
      const bp::Result r = bp::run(crf.graph, config.bp);
      po.diag.max_change = r.max_change;
      for (std::size_t it = 0; it < r.max_change.size(); ++it) {
        po.log.push_back("person " + std::to_string(pid) + ": bp iteration " +
                         std::to_string(it + 1) + " max message change " +
                         format_change(r.max_change[it]));
      }
      po.skeletons = bp::select_map(crf, r.beliefs, n_joints);
      if (config.dump_beliefs) po.beliefs_json = bp::beliefs_to_json(crf, r.beliefs);
    } catch (const Error&) {
      rethrow_with_context("inference, person " + std::to_string(pid));
    }
  });
  for (auto& po : persons) {
    result.persons.push_back(po.diag);
    for (auto& s : po.skeletons) result.skeletons.push_back(std::move(s));
    result.states_csv += po.states_csv;
    if (!po.beliefs_json.empty()) {
      result.beliefs_json += (result.beliefs_json.empty() ? "[" : ",") + po.beliefs_json;
    }
    for (auto& line : po.log) result.log.push_back(std::move(line));
  }
  if (!result.beliefs_json.empty()) result.beliefs_json += "]\n";
  if (config.dump_states) result.states_csv = states_csv_header() + result.states_csv;
  std::sort(result.skeletons.begin(), result.skeletons.end(), [](const auto& a, const auto& b) {
    return std::tie(a.frame_index, a.person_id) < std::tie(b.frame_index, b.person_id);
  });

  if (ground_truth) {
    try {
      result.report = score(result.skeletons, *ground_truth, body, config.scoring);
    } catch (const Error&) {
      rethrow_with_context("evaluation");
    }
  }
  return result;
}

PipelineResult run_pipeline(const PipelineConfig& config) {
  FileFrameSource source(config);
  std::optional<std::vector<Skeleton3D>> gt;
  if (!config.ground_truth.empty()) {
    try {
      gt = load_skeletons(config.ground_truth, config.model.body.n_joints());
    } catch (const Error&) {
      rethrow_with_context("loading ground truth");
    }
  }
  PipelineResult result = run_pipeline(config, source, gt ? &*gt : nullptr);
  write_outputs(result, config);
  return result;
}

std::string diagnostics_to_json(const PipelineResult& result) {
  nlohmann::json persons = nlohmann::json::array();
  for (const auto& d : result.persons) {
    nlohmann::json p = {{"person_id", d.person_id},
                        {"variables", d.variables},
                        {"factors",
                         {{"data", d.data_factors},
                          {"temporal", d.temporal_factors},
                          {"collision", d.collision_factors}}},
                        {"fallback_states", d.fallback_states},
                        {"max_change", d.max_change}};
    if (!d.skipped.empty()) p["skipped"] = d.skipped;
    persons.push_back(p);
  }
  nlohmann::json doc = {{"identities", result.tracks.size()}, {"persons", persons}};
  if (result.report) {
    doc["pcp_average"] = result.report->average_all();
  }
  return doc.dump(2) + "\n";
}

void write_outputs(const PipelineResult& result, const PipelineConfig& config) {
  const fs::path out(config.output);
  save_skeletons((out / "skeletons.json").string(), result.skeletons);
  write_text_file_atomic((out / "tracks.json").string(), tracks_to_json(result.tracks));
  write_text_file_atomic((out / "diagnostics.json").string(), diagnostics_to_json(result));
  if (result.report) {
    write_text_file_atomic((out / "report.csv").string(), result.report->to_csv());
    write_text_file_atomic((out / "report.txt").string(), result.report->to_text());
  }
  if (config.dump_states) {
    write_text_file_atomic((out / "states.csv").string(), result.states_csv);
  }
  if (config.dump_beliefs) {
    write_text_file_atomic((out / "beliefs.json").string(),
                           result.beliefs_json.empty() ? "[]\n" : result.beliefs_json);
  }
}

std::optional<std::pair<int, int>> marker_position(const CameraCalibration& camera,
                                                   const Point3& p) {
  Projection pr;
  try {
    pr = camera.project(p);
  } catch (const DegenerateProjection&) {
    return std::nullopt;
  }
  if (!pr.visible()) return std::nullopt;
  const int x = static_cast<int>(std::lround(pr.pixel.x()));
  const int y = static_cast<int>(std::lround(pr.pixel.y()));
  if (x < 0 || y < 0 || x >= camera.image_width() || y >= camera.image_height()) {
    return std::nullopt;
  }
  return std::pair{x, y};
}

namespace {

using Color = std::array<std::uint8_t, 3>;

void draw_line(RgbImage& img, std::pair<int, int> a, std::pair<int, int> b, Color c) {
  auto [x0, y0] = a;
  const auto [x1, y1] = b;
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    if (img.contains(x0, y0)) img.set(x0, y0, c[0], c[1], c[2]);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void draw_marker(RgbImage& img, std::pair<int, int> p, int r, Color c) {
  for (int y = p.second - r; y <= p.second + r; ++y) {
    for (int x = p.first - r; x <= p.first + r; ++x) {
      if (img.contains(x, y)) img.set(x, y, c[0], c[1], c[2]);
    }
  }
}

void draw_skeleton(RgbImage& img, const Skeleton3D& s, const CameraCalibration& cam,
                   const BodyModel& body, int r, Color c) {
  std::vector<std::optional<std::pair<int, int>>> px(s.joints.size());
  for (std::size_t j = 0; j < s.joints.size(); ++j) {
    if (s.joints[j]) px[j] = marker_position(cam, *s.joints[j]);
  }
  for (const auto& [a, b] : body.limbs) {
    if (a < static_cast<int>(px.size()) && b < static_cast<int>(px.size()) && px[a] && px[b]) {
      draw_line(img, *px[a], *px[b], c);
    }
  }
  for (const auto& p : px) {
    if (p) draw_marker(img, *p, r, c);
  }
}

}  // namespace

std::vector<std::string> emit_overlays(std::span<const Skeleton3D> estimates,
                                       std::span<const Skeleton3D> ground_truth,
                                       std::span<const CameraCalibration> cameras,
                                       const BodyModel& body, const std::string& out_dir,
                                       const OverlayOptions& options) {
  std::map<int, std::vector<const Skeleton3D*>> est, gt;
  for (const auto& s : estimates) est[s.frame_index].push_back(&s);
  for (const auto& s : ground_truth) gt[s.frame_index].push_back(&s);
  std::set<int> frames;
  for (const auto& [f, v] : est) frames.insert(f);
  for (const auto& [f, v] : gt) frames.insert(f);

  std::vector<std::string> written;
  for (int f : frames) {
    for (const auto& cam : cameras) {
      const std::string name = frame_prefix(f) + cam.camera_id() + ".png";
      RgbImage img(cam.image_width(), cam.image_height(), 32, 32, 32);
      if (!options.background_dir.empty()) {
        const fs::path bg = fs::path(options.background_dir) / name;
        if (fs::exists(bg)) {
          img = read_png_rgb(bg.string());
          if (img.width != cam.image_width() || img.height != cam.image_height()) {
            throw DataError(bg.string() + ": background size does not match the camera");
          }
        }
      }
      for (const Skeleton3D* s : gt[f]) {
        draw_skeleton(img, *s, cam, body, options.marker_radius, {220, 40, 40});
      }
      for (const Skeleton3D* s : est[f]) {
        draw_skeleton(img, *s, cam, body, options.marker_radius, {40, 220, 40});
      }
      const std::string path = (fs::path(out_dir) / name).string();
      write_png_rgb(path, img);
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace posefuse
