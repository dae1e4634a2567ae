// instloc: generate -> render -> fit-map -> predict-sim -> localize -> evaluate

#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "instloc/commands.hpp"
#include "json_config.hpp"

using namespace instloc;
using namespace instloc::cli;

int main(int argc, char** argv) {
  CLI::App app{"Instance-coordinate localisation toolkit for spherical cameras"};
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file; command-line flags take precedence");

  CommonOptions common;
  std::string out = ".";
  app.add_option("--seed", common.seed, "Global seed recorded into every output");
  app.add_option("--threads", common.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "Output directory");

  GenerateOptions gen;
  auto* generate = app.add_subcommand("generate", "Procedural cuboid city and query trajectory");
  generate->add_option("--preset", gen.preset, "small (102 buildings) or large (827 buildings)")
      ->check(CLI::IsMember({"small", "large"}));
  generate->add_option("--buildings", gen.buildings, "Building count");
  generate->add_option("--blocks-x", gen.layout.blocks_x, "Blocks along x");
  generate->add_option("--blocks-z", gen.layout.blocks_z, "Blocks along z");
  generate->add_option("--block-size", gen.layout.block_size, "Block edge (m)");
  generate->add_option("--street-width", gen.layout.street_width, "Street width (m)");
  generate->add_option("--min-height", gen.sizes.min_height, "Minimum building height (m)");
  generate->add_option("--max-height", gen.sizes.max_height, "Maximum building height (m)");
  generate->add_option("--frames", gen.frames, "Query poses to sample");
  generate->add_option("--camera-height", gen.camera_height, "Camera height above ground (m)");
  generate->add_option("--cloud-step", gen.cloud_step, "Also write cloud.ply sampled at this spacing (m)");

  RenderOptions ren;
  auto* render = app.add_subcommand("render", "Ray-cast scene coordinates and labels per pose");
  render->add_option("--scene", ren.scene, "Scene JSON")->required()->check(CLI::ExistingFile);
  render->add_option("--poses", ren.poses, "Pose JSON Lines")->required()->check(CLI::ExistingFile);
  render->add_option("--width", ren.dims.width, "Panorama width");
  render->add_option("--height", ren.dims.height, "Panorama height");
  render->add_option("--approximate", ren.approximate_step,
                     "Render the cuboid approximation fitted to a cloud sampled at this spacing (m)");

  FitMapOptions fit;
  auto* fit_map = app.add_subcommand("fit-map", "Fit per-instance whitening transforms");
  fit_map->add_option("--frames", fit.frames, "Directory of rendered frames")->check(CLI::ExistingDirectory);
  fit_map->add_option("--ply", fit.ply, "Labeled ASCII PLY cloud")->check(CLI::ExistingFile);

  PredictOptions pred;
  auto* predict = app.add_subcommand("predict-sim", "Simulate noisy network predictions");
  predict->add_option("--frames", pred.frames, "Ground-truth frames")->required()->check(CLI::ExistingDirectory);
  predict->add_option("--map", pred.map, "Instance map JSON")->required()->check(CLI::ExistingFile);
  predict->add_option("--scene", pred.scene, "Scene JSON (outlier volume)")->required()->check(CLI::ExistingFile);
  predict->add_option("--sigma", pred.noise.coord_sigma, "Gaussian coordinate noise (m)");
  predict->add_option("--outlier-rate", pred.noise.outlier_rate, "Share of gross outliers");
  predict->add_option("--flip-rate", pred.noise.label_flip_rate, "Share of wrong instance labels");

  LocalizeOptions loc;
  auto* localize = app.add_subcommand("localize", "RANSAC EPnP pose per predicted frame");
  localize->add_option("--frames", loc.frames, "Predicted frames")->required()->check(CLI::ExistingDirectory);
  localize->add_option("--map", loc.map, "Instance map JSON")->required()->check(CLI::ExistingFile);
  localize->add_option("--iterations", loc.ransac.iterations, "RANSAC iterations");
  localize->add_option("--threshold", loc.ransac.inlier_threshold_deg, "Inlier threshold (deg)");
  localize->add_option("--min-sample", loc.ransac.min_sample, "Minimal sample size");
  localize->add_option("--refit", loc.ransac.refit_on_inliers, "Refit on the inliers of the best model");
  localize->add_option("--max-correspondences", loc.max_correspondences,
                       "Per-frame correspondence cap (0 = all)");
  localize->add_flag("!--scene-coords", loc.use_local, "Ignore local-coordinate predictions");

  EvaluateOptions ev;
  auto* evaluate = app.add_subcommand("evaluate", "Pose and scene-coordinate metrics");
  evaluate->add_option("--estimates", ev.estimates, "Estimated poses")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--gt-poses", ev.gt_poses, "Ground-truth poses")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--pred-frames", ev.pred_frames, "Predicted frames")->check(CLI::ExistingDirectory);
  evaluate->add_option("--gt-frames", ev.gt_frames, "Ground-truth frames")->check(CLI::ExistingDirectory);
  evaluate->add_option("--percentiles", ev.percentiles, "Extra percentiles, e.g. 80");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadInput;
  }
  common.out = out;

  if (*generate) return RunGenerate(common, gen);
  if (*render) return RunRender(common, ren);
  if (*fit_map) return RunFitMap(common, fit);
  if (*predict) return RunPredictSim(common, pred);
  if (*localize) return RunLocalize(common, loc);
  if (*evaluate) return RunEvaluate(common, ev);
  return kExitBadInput;
}
