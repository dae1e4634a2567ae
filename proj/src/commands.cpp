#include "instloc/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "instloc/errors.hpp"
#include "instloc/eval.hpp"
#include "instloc/io.hpp"
#include "instloc/random.hpp"
#include "json.hpp"

namespace instloc::cli {

using nlohmann::json;

namespace {

// Runs fn(i) for i in [0, n) on `threads` workers. The first exception is
// rethrown after all workers stop.
template <typename Fn>
void ParallelFor(int n, int threads, Fn&& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

void WriteMeta(const fs::path& dir, const std::string& command, const CommonOptions& common, json params) {
  json meta;
  meta["command"] = command;
  meta["seed"] = common.seed;
  meta["params"] = std::move(params);
  io::WriteText(dir / "meta.json", meta.dump(1) + "\n");
}

fs::path CoordPath(const fs::path& dir, const std::string& frame) { return dir / (frame + ".scrd"); }
fs::path LocalPath(const fs::path& dir, const std::string& frame) { return dir / (frame + ".local.scrd"); }
fs::path LabelPath(const fs::path& dir, const std::string& frame) { return dir / (frame + ".lbls"); }

RenderedFrame ReadFrame(const fs::path& dir, const std::string& frame) {
  return {io::ReadSceneCoordinates(CoordPath(dir, frame)), io::ReadLabels(LabelPath(dir, frame))};
}

std::string Fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename Fn>
int Guard(const char* command, Fn&& fn) {
  try {
    return fn();
  } catch (const FormatError& e) {
    std::cerr << command << ": " << e.what() << "\n";
  } catch (const DomainError& e) {
    std::cerr << command << ": " << e.what() << "\n";
  } catch (const std::invalid_argument& e) {
    std::cerr << command << ": " << e.what() << "\n";
  } catch (const PlacementError& e) {
    std::cerr << command << ": " << e.what() << "\n";
  } catch (const fs::filesystem_error& e) {
    std::cerr << command << ": " << e.what() << "\n";
  }
  return kExitBadInput;
}

}  // namespace

std::vector<std::string> ListFrames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw FormatError("not a directory: " + dir.string());
  std::vector<std::string> frames;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".lbls") frames.push_back(entry.path().stem().string());
  }
  std::sort(frames.begin(), frames.end());
  return frames;
}

std::uint64_t FrameKey(const std::string& frame) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : frame) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<Correspondence> FrameCorrespondences(const SceneCoordinateImage& coords,
                                                 const LabelImage& labels, const InstanceMap& map,
                                                 int max_count, std::uint64_t seed) {
  std::vector<int> usable;
  for (int i = 0; i < static_cast<int>(coords.coords.size()); ++i) {
    if (coords.IsValid(i) && map.Contains(labels.labels[i])) usable.push_back(i);
  }
  if (max_count > 0 && static_cast<int>(usable.size()) > max_count) {
    CounterRng rng(seed, 0, 0x636f7272);
    for (int i = 0; i < max_count; ++i) {
      const int j = i + static_cast<int>(rng.Below(usable.size() - i));
      std::swap(usable[i], usable[j]);
    }
    usable.resize(max_count);
    std::sort(usable.begin(), usable.end());
  }
  std::vector<Correspondence> out;
  out.reserve(usable.size());
  for (int i : usable) {
    const PixelCoord px{double(i % coords.dims.width), double(i / coords.dims.width)};
    out.push_back({PixelToBearing(px, coords.dims), coords.coords[i], px});
  }
  return out;
}

int RunGenerate(const CommonOptions& common, const GenerateOptions& opts) {
  return Guard("generate", [&] {
    GenerateOptions o = opts;
    if (o.preset == "small") {
      o.buildings = 102;
      o.layout.blocks_x = 13;
      o.layout.blocks_z = 12;
    } else if (o.preset == "large") {
      o.buildings = 827;
      o.layout.blocks_x = 42;
      o.layout.blocks_z = 23;
    } else if (!o.preset.empty()) {
      throw std::invalid_argument("unknown preset '" + o.preset + "'");
    }
    if (o.frames < 0) throw std::invalid_argument("frames must be non-negative");
    const CityScene scene = GenerateCity(o.buildings, o.layout, o.sizes, common.seed);
    const std::vector<Pose> poses = SampleTrajectory(scene, o.frames, common.seed, o.camera_height);

    fs::create_directories(common.out);
    io::WriteScene(common.out / "scene.json", scene);
    std::vector<io::PoseRecord> records;
    for (std::size_t i = 0; i < poses.size(); ++i) {
      char id[32];
      std::snprintf(id, sizeof(id), "f%06zu", i);
      io::PoseRecord rec;
      rec.frame = id;
      rec.pose = poses[i];
      records.push_back(std::move(rec));
    }
    io::WritePoseFile(common.out / "poses.jsonl", records);
    if (o.cloud_step > 0.0) io::WritePly(common.out / "cloud.ply", SampleSurfaceCloud(scene, o.cloud_step));
    WriteMeta(common.out, "generate", common,
              {{"buildings", o.buildings},
               {"blocks_x", o.layout.blocks_x},
               {"blocks_z", o.layout.blocks_z},
               {"frames", o.frames},
               {"camera_height", o.camera_height},
               {"cloud_step", o.cloud_step}});
    return kExitOk;
  });
}

int RunRender(const CommonOptions& common, const RenderOptions& opts) {
  return Guard("render", [&] {
    if (!opts.dims.IsEquirectangular()) throw std::invalid_argument("width must equal 2 * height");
    CityScene scene = io::ReadScene(opts.scene);
    if (opts.approximate_step > 0.0) {
      CuboidFitOptions fit;
      fit.length_quantum = kLengthQuantum;
      fit.yaw_quantum = kYawQuantum;
      scene = ApproximateScene(scene, SampleSurfaceCloud(scene, opts.approximate_step), fit);
    }
    const std::vector<io::PoseRecord> poses = io::ReadPoseFile(opts.poses);
    fs::create_directories(common.out);
    ParallelFor(static_cast<int>(poses.size()), common.threads, [&](int i) {
      const RenderedFrame frame = RaycastRender(scene, poses[i].pose, opts.dims);
      io::WriteSceneCoordinates(CoordPath(common.out, poses[i].frame), frame.coords);
      io::WriteLabels(LabelPath(common.out, poses[i].frame), frame.labels);
    });
    WriteMeta(common.out, "render", common,
              {{"scene", opts.scene.string()},
               {"poses", opts.poses.string()},
               {"width", opts.dims.width},
               {"height", opts.dims.height},
               {"approximate_step", opts.approximate_step}});
    return kExitOk;
  });
}

int RunFitMap(const CommonOptions& common, const FitMapOptions& opts) {
  return Guard("fit-map", [&] {
    LabeledCloud cloud;
    if (!opts.ply.empty()) {
      cloud = io::ReadPly(opts.ply);
    } else if (!opts.frames.empty()) {
      for (const std::string& frame : ListFrames(opts.frames)) {
        const RenderedFrame f = ReadFrame(opts.frames, frame);
        for (int i = 0; i < f.coords.dims.PixelCount(); ++i) {
          if (f.coords.IsValid(i) && IsInstanceLabel(f.labels.labels[i])) {
            cloud.Add(f.coords.coords[i], f.labels.labels[i]);
          }
        }
      }
    } else {
      throw std::invalid_argument("fit-map needs --frames or --ply");
    }
    const InstanceMapBuild build = BuildInstanceMap(cloud);
    for (Label l : build.skipped_labels) {
      std::cerr << "fit-map: skipped instance " << l << " (fewer than 4 points)\n";
    }
    fs::create_directories(common.out);
    io::WriteInstanceMap(common.out / "map.json", build.map);
    WriteMeta(common.out, "fit-map", common,
              {{"frames", opts.frames.string()},
               {"ply", opts.ply.string()},
               {"skipped_labels", build.skipped_labels}});
    return kExitOk;
  });
}

int RunPredictSim(const CommonOptions& common, const PredictOptions& opts) {
  return Guard("predict-sim", [&] {
    NoiseModel noise = opts.noise;
    noise.seed = common.seed;
    noise.Validate();
    const InstanceMap map = io::ReadInstanceMap(opts.map);
    const Aabb volume = SceneBounds(io::ReadScene(opts.scene));
    const std::vector<std::string> frames = ListFrames(opts.frames);
    fs::create_directories(common.out);
    ParallelFor(static_cast<int>(frames.size()), common.threads, [&](int i) {
      const RenderedFrame gt = ReadFrame(opts.frames, frames[i]);
      const RenderedFrame pred = SimulatePredictions(gt, noise, map, volume, FrameKey(frames[i]));
      io::WriteSceneCoordinates(CoordPath(common.out, frames[i]), pred.coords);
      io::WriteLabels(LabelPath(common.out, frames[i]), pred.labels);
      io::WriteSceneCoordinates(LocalPath(common.out, frames[i]),
                                ToLocalCoordinates(pred.coords, pred.labels, map));
    });
    WriteMeta(common.out, "predict-sim", common,
              {{"frames", opts.frames.string()},
               {"map", opts.map.string()},
               {"sigma", noise.coord_sigma},
               {"outlier_rate", noise.outlier_rate},
               {"flip_rate", noise.label_flip_rate}});
    return kExitOk;
  });
}

int RunLocalize(const CommonOptions& common, const LocalizeOptions& opts) {
  int code = kExitOk;
  const int guarded = Guard("localize", [&] {
    opts.ransac.Validate();
    const InstanceMap map = io::ReadInstanceMap(opts.map);
    const std::vector<std::string> frames = ListFrames(opts.frames);
    std::vector<io::PoseRecord> records(frames.size());
    ParallelFor(static_cast<int>(frames.size()), common.threads, [&](int i) {
      const std::string& frame = frames[i];
      const LabelImage labels = io::ReadLabels(LabelPath(opts.frames, frame));
      SceneCoordinateImage coords;
      if (opts.use_local && fs::exists(LocalPath(opts.frames, frame))) {
        coords = ToSceneCoordinates(io::ReadSceneCoordinates(LocalPath(opts.frames, frame)), labels, map);
      } else {
        coords = io::ReadSceneCoordinates(CoordPath(opts.frames, frame));
      }
      const std::uint64_t key = Mix64(common.seed ^ FrameKey(frame));
      const std::vector<Correspondence> corrs =
          FrameCorrespondences(coords, labels, map, opts.max_correspondences, key);
      io::PoseRecord& rec = records[i];
      rec.frame = frame;
      RansacConfig cfg = opts.ransac;
      cfg.seed = key;
      if (static_cast<int>(corrs.size()) < cfg.min_sample) {
        rec.failed = true;
        rec.reason = "only " + std::to_string(corrs.size()) + " building correspondences";
        return;
      }
      try {
        const PoseEstimate est = RansacPnp(corrs, cfg);
        rec.pose = est.pose;
        rec.inliers = static_cast<int>(est.inlier_indices.size());
        rec.mean_residual_deg = est.mean_inlier_angle_deg;
      } catch (const NoConsensusError& e) {
        rec.failed = true;
        rec.reason = e.what();
      }
    });
    fs::create_directories(common.out);
    io::WritePoseFile(common.out / "estimates.jsonl", records);
    const long failed = std::count_if(records.begin(), records.end(), [](const auto& r) { return r.failed; });
    WriteMeta(common.out, "localize", common,
              {{"frames", opts.frames.string()},
               {"map", opts.map.string()},
               {"iterations", opts.ransac.iterations},
               {"inlier_threshold_deg", opts.ransac.inlier_threshold_deg},
               {"min_sample", opts.ransac.min_sample},
               {"refit_on_inliers", opts.ransac.refit_on_inliers},
               {"max_correspondences", opts.max_correspondences},
               {"failed_frames", failed}});
    if (!records.empty() && failed == static_cast<long>(records.size())) code = kExitNoConsensus;
    return kExitOk;
  });
  return guarded != kExitOk ? guarded : code;
}

int RunEvaluate(const CommonOptions& common, const EvaluateOptions& opts) {
  return Guard("evaluate", [&] {
    std::map<std::string, Pose> truth;
    for (const auto& r : io::ReadPoseFile(opts.gt_poses)) truth[r.frame] = r.pose;
    std::vector<PoseError> errors;
    long failed = 0;
    for (const auto& r : io::ReadPoseFile(opts.estimates)) {
      auto it = truth.find(r.frame);
      if (it == truth.end()) throw FormatError("no ground-truth pose for frame " + r.frame);
      if (r.failed) {
        ++failed;
        continue;
      }
      errors.push_back(RelativePoseErrors(r.pose, it->second));
    }

    json report;
    report["conventions"] = {{"thresholds", "inclusive (d <= t)"},
                             {"percentiles", "linear interpolation between closest ranks"},
                             {"coord_denominator", "pixels valid in ground truth; invalid predictions count as misses"},
                             {"seed", common.seed}};
    report["failed_frames"] = failed;
    if (!errors.empty()) {
      const PoseMetrics pm = ComputePoseMetrics(errors, opts.percentiles);
      json pose = {{"median_dist", pm.median_dist}, {"p95_dist", pm.p95_dist},
                   {"median_angle", pm.median_angle}, {"p95_angle", pm.p95_angle},
                   {"count", pm.count}};
      json extra = json::array();
      for (const auto& p : pm.extra_percentiles) {
        extra.push_back({{"percentile", p.percentile}, {"dist", p.distance}, {"angle", p.angle_deg}});
      }
      pose["extra_percentiles"] = std::move(extra);
      report["pose"] = std::move(pose);
    } else {
      report["pose"] = nullptr;
    }

    if (!opts.pred_frames.empty() && !opts.gt_frames.empty()) {
      std::vector<double> all, buildings;
      for (const std::string& frame : ListFrames(opts.gt_frames)) {
        const RenderedFrame gt = ReadFrame(opts.gt_frames, frame);
        const SceneCoordinateImage pred = io::ReadSceneCoordinates(CoordPath(opts.pred_frames, frame));
        const auto d_all = CoordDistances(pred, gt.coords);
        const auto d_bld = CoordDistances(pred, gt.coords, &gt.labels);
        all.insert(all.end(), d_all.begin(), d_all.end());
        buildings.insert(buildings.end(), d_bld.begin(), d_bld.end());
      }
      auto to_json = [](const CoordMetrics& m) {
        return json{{"pct_within_0_5m", m.pct_within_0_5m}, {"pct_within_1m", m.pct_within_1m},
                    {"pct_within_3m", m.pct_within_3m}, {"mean_dist_within_3m", m.mean_dist_within_3m},
                    {"n_valid", m.n_valid}};
      };
      report["coord"] = to_json(CoordAccuracyFromDistances(all));
      if (!buildings.empty()) report["coord_buildings"] = to_json(CoordAccuracyFromDistances(buildings));
    }

    fs::create_directories(common.out);
    io::WriteText(common.out / "report.json", report.dump(1) + "\n");
    const ErrorCurves curves = ComputeErrorCurves(errors);
    auto write_curve = [&](const fs::path& path, const std::vector<double>& values) {
      std::ostringstream ss;
      ss << "rank,value\n";
      for (std::size_t i = 0; i < values.size(); ++i) ss << i << ',' << Fixed(values[i]) << '\n';
      io::WriteText(path, ss.str());
    };
    write_curve(common.out / "dist_curve.csv", curves.distance);
    write_curve(common.out / "angle_curve.csv", curves.angle_deg);
    return kExitOk;
  });
}

}  // namespace instloc::cli
