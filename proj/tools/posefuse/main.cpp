// posefuse: multi-view 3D pose fusion from per-camera heat maps.

#include "posefuse/error.hpp"
#include "posefuse/evaluation.hpp"
#include "posefuse/io_util.hpp"
#include "posefuse/pipeline.hpp"
#include "posefuse/synth.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace posefuse;

namespace {

constexpr int kOk = 0;
constexpr int kDataError = 1;
constexpr int kConfigError = 2;

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            const std::string& factors) {
  PipelineConfig cfg = load_pipeline_config(config_path);
  if (seed) cfg.seed = *seed;
  if (!factors.empty()) cfg.factors = parse_factor_list(factors);
  const PipelineResult r = run_pipeline(cfg);
  for (const auto& line : r.log) std::cerr << line << "\n";
  std::cerr << "wrote " << r.skeletons.size() << " skeletons to " << cfg.output << "\n";
  if (r.report) std::cout << r.report->to_text();
  return kOk;
}

int cmd_synth(const std::string& spec_path, const std::string& out, std::uint64_t seed) {
  const BodyModel body = default_body_model();
  SceneSpec spec = load_scene_spec(spec_path, body);
  SyntheticScene scene(spec, seed, body);
  write_scene(scene, out);
  std::cerr << "scene: " << spec.n_actors << " actors, " << spec.n_frames << " frames, "
            << spec.n_cameras << " cameras, " << scene.corruptions().size()
            << " corrupted peaks\n";
  std::printf("expected_triangulation_radius_mm %.3f\n",
              expected_triangulation_radius(spec, scene.cameras()));
  return kOk;
}

int cmd_score(const std::string& est, const std::string& gt_path, const std::string& model,
              double alpha, double head_offset, const std::string& csv) {
  ModelConfig m = model.empty() ? ModelConfig{} : load_model_file(model);
  fs::path est_path(est);
  if (fs::is_directory(est_path)) est_path /= "skeletons.json";
  if (!fs::exists(est_path)) throw ConfigError("estimates not found: " + est_path.string());
  if (!fs::exists(gt_path)) throw ConfigError("ground-truth file not found: " + gt_path);
  const auto estimates = load_skeletons(est_path.string(), m.body.n_joints());
  const auto gt = load_skeletons(gt_path, m.body.n_joints());
  ScoreParams params;
  params.alpha = alpha;
  params.head_offset_mm = head_offset;
  const PCPReport report = score(estimates, gt, m.body, params);
  std::cout << report.to_text();
  if (!csv.empty()) write_text_file_atomic(csv, report.to_csv());
  return kOk;
}

int cmd_overlay(const std::string& config_path, const std::string& out,
                const std::string& backgrounds) {
  const PipelineConfig cfg = load_pipeline_config(config_path);
  const fs::path est = fs::path(cfg.output) / "skeletons.json";
  if (!fs::exists(est)) {
    throw ConfigError("no estimates at " + est.string() + "; run the pipeline first");
  }
  const int n = cfg.model.body.n_joints();
  const auto estimates = load_skeletons(est.string(), n);
  std::vector<Skeleton3D> gt;
  if (!cfg.ground_truth.empty()) gt = load_skeletons(cfg.ground_truth, n);
  const auto cameras = load_calibrations(cfg.calibration);
  OverlayOptions opt;
  opt.background_dir = backgrounds;
  const std::string dir = out.empty() ? (fs::path(cfg.output) / "overlays").string() : out;
  const auto files = emit_overlays(estimates, gt, cameras, cfg.model.body, dir, opt);
  std::cerr << "wrote " << files.size() << " overlay images to " << dir << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view 3D human pose fusion"};
  app.require_subcommand(1);

  std::string config, factors, spec, out, est, gt, model, csv, backgrounds;
  std::uint64_t seed_value = 0;
  std::uint64_t synth_seed = 1;
  double alpha = 0.5, head_offset = 100.0;

  auto* run = app.add_subcommand("run", "Run the full pipeline");
  run->add_option("--config", config, "Pipeline config JSON")->required();
  auto* seed_opt = run->add_option("--seed", seed_value, "Override the master seed");
  run->add_option("--factors", factors, "Factor list, e.g. data,temp,col");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene");
  synth->add_option("--spec", spec, "Scene spec JSON")->required();
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Seed for corruption draws");

  auto* sc = app.add_subcommand("score", "PCP of estimates against ground truth");
  sc->add_option("--est", est, "Output directory or skeletons.json")->required();
  sc->add_option("--gt", gt, "Ground-truth skeletons JSON")->required();
  sc->add_option("--model", model, "Body model file");
  sc->add_option("--alpha", alpha, "PCP threshold as a fraction of limb length");
  sc->add_option("--head-offset", head_offset, "Upward head/neck shift of estimates, mm");
  sc->add_option("--csv", csv, "Also write the table as CSV");

  auto* ov = app.add_subcommand("overlay", "Draw estimates over camera images");
  ov->add_option("--config", config, "Pipeline config JSON")->required();
  ov->add_option("--out", out, "Output directory (default: <output>/overlays)");
  ov->add_option("--backgrounds", backgrounds, "Folder of {frame:06d}_{camera}.png images");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) {
      return cmd_run(config,
                     seed_opt->count() ? std::optional<std::uint64_t>(seed_value) : std::nullopt,
                     factors);
    }
    if (*synth) return cmd_synth(spec, out, synth_seed);
    if (*sc) return cmd_score(est, gt, model, alpha, head_offset, csv);
    if (*ov) return cmd_overlay(config, out, backgrounds);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kOk;
}
