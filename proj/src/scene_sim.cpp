#include "instloc/scene_sim.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "instloc/errors.hpp"
#include "instloc/random.hpp"

namespace instloc {

namespace {

constexpr int kPlacementRetries = 100;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Stream ids for CounterRng so independent draws never share a sequence.
enum Stream : std::uint64_t {
  kStreamBlockChoice = 1,
  kStreamBuildingShape = 2,
  kStreamTrajectory = 3,
  kStreamRemoval = 4,
  kStreamNoise = 5,
};

// Seeded partial Fisher-Yates: the first k entries of a permutation of [0, n).
std::vector<int> SeededChoice(int n, int k, std::uint64_t seed, std::uint64_t stream) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  CounterRng rng(seed, 0, stream);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.Below(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

double Lerp(double lo, double hi, double u) { return lo + (hi - lo) * u; }

struct PreparedBox {
  Vec3 center;
  Vec3 half;
  double c, s;  // cos/sin of yaw
  double radius;
  Label label;
  double center_distance = 0.0;
};

// Slab test in the box frame; entry distance or +inf. The camera is outside
// every box, so only entries in front of the origin count.
double RayBoxEntry(const PreparedBox& b, const Vec3& origin, const Vec3& dir) {
  const Vec3 rel = origin - b.center;
  // R^T v with R = rotation about y by yaw.
  const Vec3 o(b.c * rel.x() - b.s * rel.z(), rel.y(), b.s * rel.x() + b.c * rel.z());
  const Vec3 d(b.c * dir.x() - b.s * dir.z(), dir.y(), b.s * dir.x() + b.c * dir.z());
  double t_near = -kInf;
  double t_far = kInf;
  for (int k = 0; k < 3; ++k) {
    if (d(k) == 0.0) {
      if (std::abs(o(k)) > b.half(k)) return kInf;
      continue;
    }
    const double inv = 1.0 / d(k);
    double t0 = (-b.half(k) - o(k)) * inv;
    double t1 = (b.half(k) - o(k)) * inv;
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return kInf;
  }
  return t_near > 0.0 ? t_near : kInf;
}

double TrimmedLow(std::vector<double>& v, double trim) {
  std::sort(v.begin(), v.end());
  const std::size_t k = static_cast<std::size_t>(std::floor(trim * static_cast<double>(v.size() - 1)));
  return v[k];
}

double TrimmedHigh(const std::vector<double>& sorted, double trim) {
  const std::size_t k = static_cast<std::size_t>(std::floor(trim * static_cast<double>(sorted.size() - 1)));
  return sorted[sorted.size() - 1 - k];
}

double CanonicalYaw(double yaw) {
  const double quarter = M_PI / 2.0;
  yaw = std::remainder(yaw, quarter);  // [-pi/4, pi/4]
  if (yaw >= M_PI / 4.0) yaw -= quarter;
  return yaw;
}

}  // namespace

Mat3 Cuboid::Rotation() const {
  return Eigen::AngleAxisd(yaw, Vec3::UnitY()).toRotationMatrix();
}

bool Cuboid::Contains(const Vec3& world) const {
  return (ToLocal(world).cwiseAbs() - half_extents).maxCoeff() < 0.0;
}

double Cuboid::SurfaceDistance(const Vec3& world) const {
  const Vec3 q = ToLocal(world).cwiseAbs() - half_extents;
  const double outside = q.cwiseMax(0.0).norm();
  const double inside = std::min(q.maxCoeff(), 0.0);
  return std::abs(outside + inside);
}

Aabb Aabb::Inflated(double fraction) const {
  const Vec3 pad = (max - min) * (fraction / 2.0);
  return {min - pad, max + pad};
}

const Cuboid* CityScene::FindBuilding(Label label) const {
  for (const Cuboid& b : buildings) {
    if (b.label == label) return &b;
  }
  return nullptr;
}

CityScene GenerateCity(int n_buildings, const CityLayout& layout, const SizeRanges& sizes,
                       std::uint64_t seed) {
  if (n_buildings < 0 || layout.blocks_x < 1 || layout.blocks_z < 1) {
    throw std::invalid_argument("city needs a positive grid and a non-negative building count");
  }
  if (n_buildings > layout.BlockCount()) {
    throw PlacementError("cannot place " + std::to_string(n_buildings) + " buildings in " +
                         std::to_string(layout.BlockCount()) + " blocks");
  }
  CityScene scene;
  scene.seed = seed;
  scene.layout = layout;
  scene.road_segments = layout.BlockCount();

  std::vector<int> blocks = SeededChoice(layout.BlockCount(), n_buildings, seed, kStreamBlockChoice);
  std::sort(blocks.begin(), blocks.end());

  const double half_lot = layout.block_size / 2.0 - sizes.lot_margin;
  const double origin_x = -layout.blocks_x * layout.Pitch() / 2.0;
  const double origin_z = -layout.blocks_z * layout.Pitch() / 2.0;
  for (int n = 0; n < n_buildings; ++n) {
    const int block = blocks[n];
    const int bx = block % layout.blocks_x;
    const int bz = block / layout.blocks_x;
    const double lot_x = origin_x + bx * layout.Pitch() + layout.street_width + layout.block_size / 2.0;
    const double lot_z = origin_z + bz * layout.Pitch() + layout.street_width + layout.block_size / 2.0;

    CounterRng rng(seed, static_cast<std::uint64_t>(block), kStreamBuildingShape);
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementRetries && !placed; ++attempt) {
      const double hx = Quantize(Lerp(sizes.min_half_extent, sizes.max_half_extent, rng.Uniform()), kLengthQuantum);
      const double hz = Quantize(Lerp(sizes.min_half_extent, sizes.max_half_extent, rng.Uniform()), kLengthQuantum);
      const double height = Lerp(sizes.min_height, sizes.max_height, rng.Uniform());
      const double yaw = Quantize(Lerp(-sizes.max_yaw, sizes.max_yaw, rng.Uniform()), kYawQuantum);
      const double jitter_x = rng.Uniform();
      const double jitter_z = rng.Uniform();
      if (std::max(hx, hz) < sizes.min_aspect * std::min(hx, hz)) continue;
      const double c = std::abs(std::cos(yaw));
      const double s = std::abs(std::sin(yaw));
      const double reach_x = hx * c + hz * s;
      const double reach_z = hx * s + hz * c;
      if (reach_x > half_lot || reach_z > half_lot) continue;

      Cuboid b;
      const double hy = Quantize(height / 2.0, kLengthQuantum);
      b.half_extents = Vec3(hx, hy, hz);
      b.yaw = yaw;
      b.center = Vec3(Quantize(lot_x + Lerp(-1.0, 1.0, jitter_x) * (half_lot - reach_x), kLengthQuantum), hy,
                      Quantize(lot_z + Lerp(-1.0, 1.0, jitter_z) * (half_lot - reach_z), kLengthQuantum));
      b.label = kFirstInstanceLabel + static_cast<Label>(block);
      scene.buildings.push_back(b);
      placed = true;
    }
    if (!placed) {
      throw PlacementError("no building shape fits block " + std::to_string(block) + " after " +
                           std::to_string(kPlacementRetries) + " attempts");
    }
  }
  return scene;
}

std::vector<Vec3> RoadSegmentCenters(const CityScene& scene) {
  const CityLayout& l = scene.layout;
  const double origin_x = -l.blocks_x * l.Pitch() / 2.0;
  const double origin_z = -l.blocks_z * l.Pitch() / 2.0;
  std::vector<Vec3> out;
  out.reserve(l.BlockCount());
  for (int bz = 0; bz < l.blocks_z; ++bz) {
    for (int bx = 0; bx < l.blocks_x; ++bx) {
      out.emplace_back(origin_x + bx * l.Pitch() + l.street_width + l.block_size / 2.0, 0.0,
                       origin_z + bz * l.Pitch() + l.street_width / 2.0);
    }
  }
  return out;
}

std::vector<Pose> SampleTrajectory(const CityScene& scene, int frames, std::uint64_t seed,
                                   double camera_height) {
  const std::vector<Vec3> centers = RoadSegmentCenters(scene);
  const int segments = static_cast<int>(centers.size());
  const std::vector<int> order = SeededChoice(segments, segments, seed, kStreamTrajectory);
  std::vector<Pose> poses;
  poses.reserve(frames);
  for (int f = 0; f < frames; ++f) {
    CounterRng rng(seed, static_cast<std::uint64_t>(f), kStreamTrajectory);
    const Vec3& c = centers[order[f % segments]];
    // Along the street (x) anywhere within the block span, across it within
    // the middle half of the carriageway.
    const double along = Lerp(-0.5, 0.5, rng.Uniform()) * scene.layout.block_size;
    const double across = Lerp(-0.25, 0.25, rng.Uniform()) * scene.layout.street_width;
    const double heading = Lerp(-M_PI, M_PI, rng.Uniform());
    const Vec3 center(c.x() + along, camera_height, c.z() + across);
    poses.push_back(Pose::FromCenter(UprightCameraRotation(heading), center));
  }
  return poses;
}

Aabb SceneBounds(const CityScene& scene) {
  const CityLayout& l = scene.layout;
  const double ex = l.blocks_x * l.Pitch() / 2.0 + l.street_width;
  const double ez = l.blocks_z * l.Pitch() / 2.0 + l.street_width;
  double top = 0.0;
  for (const Cuboid& b : scene.buildings) top = std::max(top, b.center.y() + b.half_extents.y());
  Aabb box;
  box.min = Vec3(-ex, 0.0, -ez);
  box.max = Vec3(ex, std::max(top, 1.0), ez);
  return box;
}

RenderedFrame RaycastRender(const CityScene& scene, const Pose& pose, const ImageDims& dims) {
  const Vec3 origin = pose.Center();
  for (const Cuboid& b : scene.buildings) {
    if (b.Contains(origin)) throw DomainError("camera center lies inside a building");
  }
  std::vector<PreparedBox> boxes;
  boxes.reserve(scene.buildings.size());
  for (const Cuboid& b : scene.buildings) {
    PreparedBox p{b.center, b.half_extents, std::cos(b.yaw), std::sin(b.yaw), b.half_extents.norm(), b.label};
    p.center_distance = (b.center - origin).norm();
    boxes.push_back(p);
  }
  // Near boxes first so most rays stop early.
  std::sort(boxes.begin(), boxes.end(), [](const PreparedBox& a, const PreparedBox& b) {
    return a.center_distance < b.center_distance;
  });

  RenderedFrame out{SceneCoordinateImage(dims), LabelImage(dims)};
  const Mat3& rot = pose.Rotation();
  for (int row = 0; row < dims.height; ++row) {
    for (int col = 0; col < dims.width; ++col) {
      const int idx = row * dims.width + col;
      const Vec3 dir = rot * PixelToBearing({double(col), double(row)}, dims);
      double best = kInf;
      Label label = kSkyLabel;
      if (dir.y() < 0.0) {
        best = -origin.y() / dir.y();
        label = kRoadLabel;
      }
      for (const PreparedBox& b : boxes) {
        if (b.center_distance - b.radius > best) break;
        const double t = RayBoxEntry(b, origin, dir);
        if (t < best) {
          best = t;
          label = b.label;
        }
      }
      out.labels.labels[idx] = label;
      if (label != kSkyLabel) out.coords.coords[idx] = origin + best * dir;
    }
  }
  return out;
}

RenderedFrame ProjectPointCloud(const LabeledCloud& cloud, const Pose& pose, const ImageDims& dims,
                                const LabelImage* reference_labels) {
  if (reference_labels && !(reference_labels->dims == dims)) {
    throw DomainError("reference label image has different dimensions");
  }
  const int pixels = dims.PixelCount();
  std::vector<int> pixel_of(cloud.size(), -1);
  std::vector<double> depth_of(cloud.size(), kInf);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 q = pose.WorldToCamera(cloud.points[i]);
    const double depth = q.norm();
    if (!(depth >= 1e-12)) continue;
    pixel_of[i] = BearingToPixelIndex(q, dims);
    depth_of[i] = depth;
  }

  std::vector<Label> reference(pixels, kVoidLabel);
  if (reference_labels) {
    reference = reference_labels->labels;
  } else {
    std::vector<double> nearest(pixels, kInf);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const int p = pixel_of[i];
      if (p >= 0 && depth_of[i] < nearest[p]) {
        nearest[p] = depth_of[i];
        reference[p] = cloud.labels[i];
      }
    }
  }

  RenderedFrame out{SceneCoordinateImage(dims), LabelImage(dims)};
  out.labels.labels = reference;
  std::vector<double> chosen(pixels, kInf);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const int p = pixel_of[i];
    if (p < 0 || cloud.labels[i] != reference[p]) continue;
    if (depth_of[i] < chosen[p]) {
      chosen[p] = depth_of[i];
      out.coords.coords[p] = cloud.points[i];
    }
  }
  return out;
}

LabeledCloud SampleSurfaceCloud(const CityScene& scene, double step, bool include_ground) {
  if (!(step > 0.0)) throw std::invalid_argument("sampling step must be positive");
  LabeledCloud cloud;
  auto samples = [step](double half) {
    const int n = std::max(1, static_cast<int>(std::ceil(2.0 * half / step)));
    std::vector<double> v(n + 1);
    for (int i = 0; i <= n; ++i) v[i] = -half + 2.0 * half * i / n;
    v[n] = half;
    return v;
  };
  for (const Cuboid& b : scene.buildings) {
    const Mat3 rot = b.Rotation();
    const Vec3& h = b.half_extents;
    const auto xs = samples(h.x());
    const auto ys = samples(h.y());
    const auto zs = samples(h.z());
    auto emit = [&](double x, double y, double z) { cloud.Add(b.center + rot * Vec3(x, y, z), b.label); };
    for (double x : xs) {
      for (double z : zs) emit(x, h.y(), z);  // roof
    }
    for (double y : ys) {
      for (double z : zs) {
        emit(-h.x(), y, z);
        emit(h.x(), y, z);
      }
      for (double x : xs) {
        emit(x, y, -h.z());
        emit(x, y, h.z());
      }
    }
  }
  if (include_ground) {
    const Aabb box = SceneBounds(scene);
    for (double x = box.min.x(); x <= box.max.x(); x += step) {
      for (double z = box.min.z(); z <= box.max.z(); z += step) {
        const Vec3 p(x, 0.0, z);
        bool covered = false;
        for (const Cuboid& b : scene.buildings) covered = covered || b.Contains(p + Vec3(0, 1e-6, 0));
        if (!covered) cloud.Add(p, kRoadLabel);
      }
    }
  }
  return cloud;
}

void NoiseModel::Validate() const {
  if (!(coord_sigma >= 0.0)) throw std::invalid_argument("coord_sigma must be non-negative");
  for (double r : {outlier_rate, label_flip_rate}) {
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("noise rates must lie in [0, 1]");
  }
}

RenderedFrame SimulatePredictions(const RenderedFrame& gt, const NoiseModel& noise,
                                  const InstanceMap& map, const Aabb& volume, std::uint64_t stream) {
  noise.Validate();
  RenderedFrame out = gt;
  if (noise.IsZero()) return out;

  const std::vector<Label> instances = map.InstanceLabels();
  const Aabb box = volume.Inflated(0.10);
  const std::uint64_t frame_seed = noise.seed ^ Mix64(stream + 0x51ed270b27ULL);
  for (int i = 0; i < static_cast<int>(gt.coords.coords.size()); ++i) {
    if (!gt.coords.IsValid(i)) continue;
    // Fixed draw budget per pixel keeps streams aligned across settings.
    CounterRng rng(frame_seed, static_cast<std::uint64_t>(i), kStreamNoise);
    const double u_flip = rng.Uniform();
    const double u_out = rng.Uniform();
    const std::uint64_t pick = instances.size() > 1 ? rng.Below(instances.size() - 1) : 0;
    const Vec3 gauss(rng.Normal(), rng.Normal(), rng.Normal());
    const Vec3 uni(rng.Uniform(), rng.Uniform(), rng.Uniform());

    Vec3 s = gt.coords.coords[i];
    const Label truth = gt.labels.labels[i];
    const WhiteningTransform* own = map.Find(truth);
    if (own && instances.size() > 1 && u_flip < noise.label_flip_rate) {
      // Uniform over the other instances: skip the true label's slot.
      const auto pos = static_cast<std::uint64_t>(
          std::lower_bound(instances.begin(), instances.end(), truth) - instances.begin());
      const Label wrong = instances[pick >= pos ? pick + 1 : pick];
      s = map.Find(wrong)->Unwhiten(own->Whiten(s));
      out.labels.labels[i] = wrong;
    }
    if (u_out < noise.outlier_rate) {
      s = box.min + (box.max - box.min).cwiseProduct(uni);
    } else if (noise.coord_sigma > 0.0) {
      s += noise.coord_sigma * gauss;
    }
    out.coords.coords[i] = s;
  }
  return out;
}

SceneCoordinateImage ToLocalCoordinates(const SceneCoordinateImage& scene_coords,
                                        const LabelImage& labels, const InstanceMap& map) {
  SceneCoordinateImage out(scene_coords.dims);
  for (int i = 0; i < static_cast<int>(scene_coords.coords.size()); ++i) {
    if (!scene_coords.IsValid(i)) continue;
    if (const WhiteningTransform* t = map.Find(labels.labels[i])) {
      out.coords[i] = t->Whiten(scene_coords.coords[i]);
    }
  }
  return out;
}

SceneCoordinateImage ToSceneCoordinates(const SceneCoordinateImage& local_coords,
                                        const LabelImage& labels, const InstanceMap& map) {
  SceneCoordinateImage out(local_coords.dims);
  for (int i = 0; i < static_cast<int>(local_coords.coords.size()); ++i) {
    if (!local_coords.IsValid(i)) continue;
    if (const WhiteningTransform* t = map.Find(labels.labels[i])) {
      out.coords[i] = t->Unwhiten(local_coords.coords[i]);
    }
  }
  return out;
}

CityScene RemoveBuildings(const CityScene& scene, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw std::invalid_argument("fraction must lie in [0, 1]");
  const int n = static_cast<int>(scene.buildings.size());
  const int k = static_cast<int>(std::floor(fraction * n + 1e-9));
  const std::vector<int> removed = SeededChoice(n, k, seed, kStreamRemoval);
  std::vector<bool> drop(n, false);
  for (int i : removed) drop[i] = true;
  CityScene out = scene;
  out.buildings.clear();
  for (int i = 0; i < n; ++i) {
    if (!drop[i]) out.buildings.push_back(scene.buildings[i]);
  }
  return out;
}

Cuboid CuboidApproximation(std::span<const Vec3> points, Label label, const CuboidFitOptions& options) {
  if (points.size() < 4) throw DegenerateError("cuboid fit needs at least 4 points");
  const double n = static_cast<double>(points.size());
  double mx = 0.0, mz = 0.0;
  for (const Vec3& p : points) {
    mx += p.x();
    mz += p.z();
  }
  mx /= n;
  mz /= n;
  double cxx = 0.0, czz = 0.0, cxz = 0.0;
  for (const Vec3& p : points) {
    const double dx = p.x() - mx;
    const double dz = p.z() - mz;
    cxx += dx * dx;
    czz += dz * dz;
    cxz += dx * dz;
  }
  double yaw = 0.0;
  const double spread = std::hypot(cxx - czz, 2.0 * cxz);
  if (spread > 1e-9 * (cxx + czz)) {
    // Principal axis at angle theta from +x toward +z; the box x axis points
    // along (cos yaw, 0, -sin yaw), hence yaw = -theta.
    yaw = CanonicalYaw(-0.5 * std::atan2(2.0 * cxz, cxx - czz));
  }
  yaw = Quantize(yaw, options.yaw_quantum);

  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  std::vector<double> lx, ly, lz;
  lx.reserve(points.size());
  ly.reserve(points.size());
  lz.reserve(points.size());
  for (const Vec3& p : points) {
    lx.push_back(c * p.x() - s * p.z());
    ly.push_back(p.y());
    lz.push_back(s * p.x() + c * p.z());
  }
  const double trim = options.trim_fraction;
  const double x0 = TrimmedLow(lx, trim), x1 = TrimmedHigh(lx, trim);
  const double y0 = TrimmedLow(ly, trim), y1 = TrimmedHigh(ly, trim);
  const double z0 = TrimmedLow(lz, trim), z1 = TrimmedHigh(lz, trim);
  const double bottom = options.rest_on_ground ? 0.0 : y0;

  const double q = options.length_quantum;
  Cuboid box;
  box.label = label;
  box.yaw = yaw;
  box.half_extents = Vec3(Quantize((x1 - x0) / 2.0, q), Quantize((y1 - bottom) / 2.0, q),
                          Quantize((z1 - z0) / 2.0, q));
  const double cx = (x0 + x1) / 2.0;
  const double cz = (z0 + z1) / 2.0;
  box.center = Vec3(Quantize(c * cx + s * cz, q), options.rest_on_ground ? box.half_extents.y()
                                                                         : Quantize((y0 + y1) / 2.0, q),
                    Quantize(-s * cx + c * cz, q));
  return box;
}

CityScene ApproximateScene(const CityScene& source, const LabeledCloud& cloud,
                           const CuboidFitOptions& options) {
  std::map<Label, std::vector<Vec3>> groups;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (IsInstanceLabel(cloud.labels[i])) groups[cloud.labels[i]].push_back(cloud.points[i]);
  }
  CityScene out = source;
  out.buildings.clear();
  for (const auto& [label, pts] : groups) {
    if (pts.size() < 4) continue;
    out.buildings.push_back(CuboidApproximation(pts, label, options));
  }
  return out;
}

}  // namespace instloc
