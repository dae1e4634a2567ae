#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "instloc/geometry.hpp"
#include "instloc/image.hpp"
#include "instloc/instance_map.hpp"
#include "instloc/scene_sim.hpp"

namespace instloc::io {

// One JSON Lines record: {"frame", "q": [w,x,y,z], "t": [3]} plus, for
// estimates, {"inliers", "mean_residual_deg"}; failed frames carry
// {"frame", "failed": true, "reason"} and no pose.
struct PoseRecord {
  std::string frame;
  Pose pose;
  std::optional<int> inliers;
  std::optional<double> mean_residual_deg;
  bool failed = false;
  std::string reason;
};

void WritePoseFile(const std::filesystem::path& path, const std::vector<PoseRecord>& records);
std::vector<PoseRecord> ReadPoseFile(const std::filesystem::path& path);

std::string SceneToJson(const CityScene& scene);
CityScene SceneFromJson(const std::string& text);
void WriteScene(const std::filesystem::path& path, const CityScene& scene);
CityScene ReadScene(const std::filesystem::path& path);

std::string InstanceMapToJson(const InstanceMap& map);
InstanceMap InstanceMapFromJson(const std::string& text);
void WriteInstanceMap(const std::filesystem::path& path, const InstanceMap& map);
InstanceMap ReadInstanceMap(const std::filesystem::path& path);

// "SCRD1\n", "W H 3\n", little-endian float32 xyz per pixel, NaN = invalid.
void WriteSceneCoordinates(const std::filesystem::path& path, const SceneCoordinateImage& image);
SceneCoordinateImage ReadSceneCoordinates(const std::filesystem::path& path);

// "LBLS1\n", "W H\n", little-endian uint32 per pixel.
void WriteLabels(const std::filesystem::path& path, const LabelImage& image);
LabelImage ReadLabels(const std::filesystem::path& path);

// ASCII PLY with float x, y, z and uint instance_label.
void WritePly(const std::filesystem::path& path, const LabeledCloud& cloud);
LabeledCloud ReadPly(const std::filesystem::path& path);

std::string ReadText(const std::filesystem::path& path);
void WriteText(const std::filesystem::path& path, const std::string& text);

}  // namespace instloc::io
