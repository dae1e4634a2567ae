#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "instloc/geometry.hpp"
#include "instloc/image.hpp"
#include "instloc/instance_map.hpp"

namespace instloc {

// Generated scenes place every length on a 1 mm grid and every yaw on a
// 1e-5 rad grid; approximate maps built with the same quanta reproduce
// generated cuboids exactly.
inline constexpr double kLengthQuantum = 1e-3;
inline constexpr double kYawQuantum = 1e-5;

inline double Quantize(double value, double quantum) {
  return quantum > 0.0 ? std::round(value / quantum) * quantum : value;
}

class PlacementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Box standing on the ground, rotated by `yaw` about the world vertical.
struct Cuboid {
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Ones();
  double yaw = 0.0;
  Label label = kFirstInstanceLabel;

  // Local-to-world rotation.
  Mat3 Rotation() const;
  Vec3 ToLocal(const Vec3& world) const { return Rotation().transpose() * (world - center); }
  bool Contains(const Vec3& world) const;
  // Distance from a point to the box surface.
  double SurfaceDistance(const Vec3& world) const;
};

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
  Aabb Inflated(double fraction) const;
};

struct CityLayout {
  int blocks_x = 13;
  int blocks_z = 12;
  double block_size = 40.0;   // square lot edge (m)
  double street_width = 14.0;

  double Pitch() const { return block_size + street_width; }
  int BlockCount() const { return blocks_x * blocks_z; }
};

struct SizeRanges {
  double min_half_extent = 6.0;
  double max_half_extent = 17.0;
  double min_height = 8.0;
  double max_height = 60.0;
  double max_yaw = 0.17;        // rad
  double min_aspect = 1.2;      // footprint long / short side
  double lot_margin = 1.0;      // free border inside a block (m)
};

// Buildings over an infinite ground plane y = 0 (road class). Each block of
// the street grid holds at most one building and owns one road segment (the
// street piece along its low-z edge).
struct CityScene {
  std::uint64_t seed = 0;
  CityLayout layout;
  std::vector<Cuboid> buildings;
  int road_segments = 0;

  const Cuboid* FindBuilding(Label label) const;
};

// Throws PlacementError when the buildings do not fit the grid.
CityScene GenerateCity(int n_buildings, const CityLayout& layout, const SizeRanges& sizes,
                       std::uint64_t seed);

// Road-segment centers at ground level, one per block.
std::vector<Vec3> RoadSegmentCenters(const CityScene& scene);

// Upright cameras near road-segment centers with seeded jitter and heading.
std::vector<Pose> SampleTrajectory(const CityScene& scene, int frames, std::uint64_t seed,
                                   double camera_height = 2.0);

// Buildings plus ground up to the tallest roof.
Aabb SceneBounds(const CityScene& scene);

struct RenderedFrame {
  SceneCoordinateImage coords;
  LabelImage labels;
};

// Exact equirectangular ray casting: nearest hit over all cuboids and the
// ground; sky where nothing is hit.
RenderedFrame RaycastRender(const CityScene& scene, const Pose& pose, const ImageDims& dims);

// Z-buffer projection. Per pixel the nearest point carrying the pixel's
// reference label wins; the reference is `reference_labels` when supplied,
// else the label of the nearest point in that pixel.
RenderedFrame ProjectPointCloud(const LabeledCloud& cloud, const Pose& pose, const ImageDims& dims,
                                const LabelImage* reference_labels = nullptr);

// Regular samples on walls and roofs (edges included), optionally with a
// ground grid over the city footprint.
LabeledCloud SampleSurfaceCloud(const CityScene& scene, double step, bool include_ground = false);

struct NoiseModel {
  double coord_sigma = 0.0;      // m, isotropic Gaussian
  double outlier_rate = 0.0;     // uniform resample inside the scene volume
  double label_flip_rate = 0.0;  // building pixels moved to another instance
  std::uint64_t seed = 0;

  bool IsZero() const { return coord_sigma == 0.0 && outlier_rate == 0.0 && label_flip_rate == 0.0; }
  void Validate() const;
};

// Prediction surrogate. `stream` separates frames (e.g. the frame index).
// Flipped pixels keep their local coordinates and are unwhitened with the
// wrong instance's transform.
RenderedFrame SimulatePredictions(const RenderedFrame& gt, const NoiseModel& noise,
                                  const InstanceMap& map, const Aabb& volume,
                                  std::uint64_t stream = 0);

// Local whitened coordinates under each pixel's label; NaN where the label
// has no transform or the coordinate is invalid.
SceneCoordinateImage ToLocalCoordinates(const SceneCoordinateImage& scene_coords,
                                        const LabelImage& labels, const InstanceMap& map);
SceneCoordinateImage ToSceneCoordinates(const SceneCoordinateImage& local_coords,
                                        const LabelImage& labels, const InstanceMap& map);

// Deletes floor(fraction * N) buildings chosen uniformly by seed.
CityScene RemoveBuildings(const CityScene& scene, double fraction, std::uint64_t seed);

struct CuboidFitOptions {
  double trim_fraction = 0.005;  // per side, robust bounds
  bool rest_on_ground = true;    // bottom fixed at y = 0
  double length_quantum = 0.0;   // 0 disables snapping
  double yaw_quantum = 0.0;
};

// Building-aligned box from one instance's points: yaw from the principal
// horizontal axis (canonical range [-pi/4, pi/4)), extents from bounds in the
// yawed frame.
Cuboid CuboidApproximation(std::span<const Vec3> points, Label label,
                           const CuboidFitOptions& options = {});

// Replaces each instance of `cloud` by its cuboid approximation.
CityScene ApproximateScene(const CityScene& source, const LabeledCloud& cloud,
                           const CuboidFitOptions& options);

// Ground truth for approximate-map training: ray casting against the
// approximation.
inline RenderedFrame RenderApproximateGt(const CityScene& approximation, const Pose& pose,
                                         const ImageDims& dims) {
  return RaycastRender(approximation, pose, dims);
}

}  // namespace instloc
