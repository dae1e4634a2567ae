#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "instloc/pnp.hpp"
#include "instloc/scene_sim.hpp"

// File-based pipeline stages behind the `instloc` command line tool. Every
// stage is a pure function of its input files, options and seed.
namespace instloc::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
  kExitOk = 0,
  kExitBadInput = 2,
  kExitNoConsensus = 3,
};

struct CommonOptions {
  std::uint64_t seed = 0;
  int threads = 1;
  fs::path out = ".";
};

struct GenerateOptions {
  std::string preset;  // "small", "large" or empty for explicit counts
  int buildings = 102;
  CityLayout layout;
  SizeRanges sizes;
  int frames = 100;
  double camera_height = 2.0;
  double cloud_step = 0.0;  // > 0 also writes cloud.ply
};

struct RenderOptions {
  fs::path scene;
  fs::path poses;
  ImageDims dims;
  double approximate_step = 0.0;  // > 0 renders the cuboid approximation
};

struct FitMapOptions {
  fs::path frames;  // directory of rendered frames
  fs::path ply;     // or a labeled point cloud
};

struct PredictOptions {
  fs::path frames;
  fs::path map;
  fs::path scene;
  NoiseModel noise;
};

struct LocalizeOptions {
  fs::path frames;
  fs::path map;
  RansacConfig ransac;
  int max_correspondences = 2000;
  bool use_local = true;  // prefer <frame>.local.scrd when present
};

struct EvaluateOptions {
  fs::path estimates;
  fs::path gt_poses;
  fs::path pred_frames;  // optional, enables coordinate metrics
  fs::path gt_frames;
  std::vector<double> percentiles;
};

// Frame ids of a directory: stems of its *.lbls files, sorted.
std::vector<std::string> ListFrames(const fs::path& dir);

// Stable 64-bit key of a frame id for per-frame random streams.
std::uint64_t FrameKey(const std::string& frame);

// Correspondences from building pixels of a frame, at most `max_count`
// chosen by a seeded subsample.
std::vector<Correspondence> FrameCorrespondences(const SceneCoordinateImage& coords,
                                                 const LabelImage& labels, const InstanceMap& map,
                                                 int max_count, std::uint64_t seed);

// Each returns an ExitCode; diagnostics go to stderr.
int RunGenerate(const CommonOptions& common, const GenerateOptions& opts);
int RunRender(const CommonOptions& common, const RenderOptions& opts);
int RunFitMap(const CommonOptions& common, const FitMapOptions& opts);
int RunPredictSim(const CommonOptions& common, const PredictOptions& opts);
int RunLocalize(const CommonOptions& common, const LocalizeOptions& opts);
int RunEvaluate(const CommonOptions& common, const EvaluateOptions& opts);

}  // namespace instloc::cli
