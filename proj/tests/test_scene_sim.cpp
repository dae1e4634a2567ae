#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "instloc/errors.hpp"
#include "instloc/pnp.hpp"
#include "instloc/scene_sim.hpp"
#include "test_helpers.hpp"

namespace instloc {
namespace {

const ImageDims kRenderDims{256, 128};

bool SameCuboid(const Cuboid& a, const Cuboid& b) {
  return a.center == b.center && a.half_extents == b.half_extents && a.yaw == b.yaw && a.label == b.label;
}

// Footprint corners in the ground plane.
std::vector<Eigen::Vector2d> Footprint(const Cuboid& c) {
  std::vector<Eigen::Vector2d> out;
  for (int sx : {-1, 1}) {
    for (int sz : {-1, 1}) {
      const Vec3 w = c.center + c.Rotation() * Vec3(sx * c.half_extents.x(), 0, sz * c.half_extents.z());
      out.emplace_back(w.x(), w.z());
    }
  }
  return out;
}

// Separating-axis test on the two footprint rectangles.
bool FootprintsOverlap(const Cuboid& a, const Cuboid& b) {
  const auto pa = Footprint(a), pb = Footprint(b);
  for (const Cuboid* c : {&a, &b}) {
    for (const Vec3& axis3 : {c->Rotation().col(0), c->Rotation().col(2)}) {
      const Eigen::Vector2d axis(axis3.x(), axis3.z());
      double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
      for (const auto& p : pa) amin = std::min(amin, p.dot(axis)), amax = std::max(amax, p.dot(axis));
      for (const auto& p : pb) bmin = std::min(bmin, p.dot(axis)), bmax = std::max(bmax, p.dot(axis));
      if (amax <= bmin || bmax <= amin) return false;
    }
  }
  return true;
}

const CityScene& SmallCity() {
  static const CityScene scene = GenerateCity(102, CityLayout{}, SizeRanges{}, 7);
  return scene;
}

double NearestSurfaceDistance(const CityScene& scene, const Vec3& p) {
  double d = std::abs(p.y());
  for (const Cuboid& c : scene.buildings) d = std::min(d, c.SurfaceDistance(p));
  return d;
}

TEST(GenerateCity, SmallPresetHas102NonOverlappingBuildings) {
  const CityScene& scene = SmallCity();
  ASSERT_EQ(scene.buildings.size(), 102u);
  EXPECT_EQ(scene.road_segments, 156);
  std::set<Label> labels;
  for (const Cuboid& c : scene.buildings) {
    labels.insert(c.label);
    EXPECT_GE(c.label, kFirstInstanceLabel);
    EXPECT_TRUE((c.half_extents.array() > 0).all());
    EXPECT_EQ(c.center.y(), c.half_extents.y());  // rests on the ground
  }
  EXPECT_EQ(labels.size(), scene.buildings.size());
  int overlaps = 0;
  for (std::size_t i = 0; i < scene.buildings.size(); ++i) {
    for (std::size_t j = i + 1; j < scene.buildings.size(); ++j) {
      overlaps += FootprintsOverlap(scene.buildings[i], scene.buildings[j]);
    }
  }
  EXPECT_EQ(overlaps, 0);
}

TEST(GenerateCity, LargePresetCounts) {
  const CityLayout layout{42, 23, 40.0, 14.0};
  const CityScene scene = GenerateCity(827, layout, SizeRanges{}, 3);
  EXPECT_EQ(scene.buildings.size(), 827u);
  EXPECT_EQ(scene.road_segments, 966);
}

TEST(GenerateCity, EmptyCity) {
  const CityScene scene = GenerateCity(0, CityLayout{}, SizeRanges{}, 7);
  EXPECT_TRUE(scene.buildings.empty());
  const Pose pose = Pose::FromCenter(UprightCameraRotation(0.0), Vec3(0, 2, 0));
  const RenderedFrame f = RaycastRender(scene, pose, kRenderDims);
  for (int i = 0; i < kRenderDims.PixelCount(); ++i) EXPECT_FALSE(IsInstanceLabel(f.labels.labels[i]));
}

TEST(GenerateCity, DeterministicPerSeed) {
  const CityScene a = GenerateCity(102, CityLayout{}, SizeRanges{}, 7);
  const CityScene& b = SmallCity();
  ASSERT_EQ(a.buildings.size(), b.buildings.size());
  for (std::size_t i = 0; i < a.buildings.size(); ++i) EXPECT_TRUE(SameCuboid(a.buildings[i], b.buildings[i]));
  const CityScene c = GenerateCity(102, CityLayout{}, SizeRanges{}, 8);
  EXPECT_FALSE(SameCuboid(c.buildings[0], a.buildings[0]));
}

TEST(GenerateCity, TooManyBuildingsThrows) {
  EXPECT_THROW(GenerateCity(157, CityLayout{}, SizeRanges{}, 7), PlacementError);
}

TEST(GenerateCity, LengthsAndYawsAreQuantized) {
  for (const Cuboid& c : SmallCity().buildings) {
    for (int k = 0; k < 3; ++k) {
      EXPECT_EQ(Quantize(c.center(k), kLengthQuantum), c.center(k));
      EXPECT_EQ(Quantize(c.half_extents(k), kLengthQuantum), c.half_extents(k));
    }
    EXPECT_EQ(Quantize(c.yaw, kYawQuantum), c.yaw);
  }
}

TEST(SampleTrajectory, CamerasAreOutsideBuildingsAndDeterministic) {
  const auto poses = SampleTrajectory(SmallCity(), 100, 11);
  const auto again = SampleTrajectory(SmallCity(), 100, 11);
  ASSERT_EQ(poses.size(), 100u);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    EXPECT_TRUE(poses[i].IsValid(1e-9));
    EXPECT_NEAR(poses[i].Center().y(), 2.0, 1e-12);
    for (const Cuboid& c : SmallCity().buildings) EXPECT_FALSE(c.Contains(poses[i].Center()));
    EXPECT_EQ(poses[i].Rotation(), again[i].Rotation());
    EXPECT_EQ(poses[i].Translation(), again[i].Translation());
  }
}

TEST(RaycastRender, GroundBelowSkyAbove) {
  const CityScene scene = GenerateCity(0, CityLayout{}, SizeRanges{}, 1);
  const Pose pose = Pose::FromCenter(UprightCameraRotation(0.3), Vec3(5, 10, -3));
  const RenderedFrame f = RaycastRender(scene, pose, kRenderDims);
  const auto bearings = PixelBearings(kRenderDims);
  for (int i = 0; i < kRenderDims.PixelCount(); ++i) {
    const Vec3 dir = pose.Rotation() * bearings[i];
    if (dir.y() < 0.0) {
      ASSERT_TRUE(f.coords.IsValid(i));
      EXPECT_NEAR(f.coords.coords[i].y(), 0.0, 1e-9);
      EXPECT_EQ(f.labels.labels[i], kRoadLabel);
    } else {
      EXPECT_FALSE(f.coords.IsValid(i));
      EXPECT_TRUE(std::isnan(f.coords.coords[i].x()));
      EXPECT_EQ(f.labels.labels[i], kSkyLabel);
    }
  }
}

TEST(RaycastRender, UnitCubeDeadAhead) {
  CityScene scene;
  Cuboid cube;
  cube.center = Vec3(0, 2, 5);
  cube.half_extents = Vec3(0.5, 0.5, 0.5);
  cube.label = 1234;
  scene.buildings.push_back(cube);
  const Pose pose = Pose::FromCenter(UprightCameraRotation(0.0), Vec3(0, 2, 0));
  const ImageDims dims{512, 256};
  const RenderedFrame f = RaycastRender(scene, pose, dims);
  const auto bearings = PixelBearings(dims);
  int checked = 0;
  for (int v = 120; v < 136; ++v) {
    for (int u = 248; u < 264; ++u) {
      const int i = v * dims.width + u;
      const Vec3 dir = pose.Rotation() * bearings[i];
      // Analytic hit on the plane z = 4.5.
      const Vec3 hit = pose.Center() + dir * (4.5 / dir.z());
      if (std::abs(hit.x()) > 0.5 || std::abs(hit.y() - 2.0) > 0.5) continue;
      ASSERT_TRUE(f.coords.IsValid(i));
      EXPECT_LT((f.coords.coords[i] - hit).norm(), 1e-9);
      EXPECT_EQ(f.labels.labels[i], 1234u);
      ++checked;
    }
  }
  EXPECT_GT(checked, 20);
}

TEST(RaycastRender, CameraInsideBuildingRejected) {
  const Cuboid& c = SmallCity().buildings[0];
  const Pose pose = Pose::FromCenter(UprightCameraRotation(0.0), c.center);
  EXPECT_THROW(RaycastRender(SmallCity(), pose, kRenderDims), DomainError);
}

TEST(RaycastRender, HitsLieOnSurfacesAndOnTheirRays) {
  const auto poses = SampleTrajectory(SmallCity(), 5, 12);
  const auto bearings = PixelBearings(kRenderDims);
  for (const Pose& pose : poses) {
    const RenderedFrame f = RaycastRender(SmallCity(), pose, kRenderDims);
    double worst_surface = 0.0, worst_residual = 0.0;
    int buildings = 0;
    for (int i = 0; i < kRenderDims.PixelCount(); ++i) {
      if (!f.coords.IsValid(i)) continue;
      const Vec3& s = f.coords.coords[i];
      worst_surface = std::max(worst_surface, NearestSurfaceDistance(SmallCity(), s));
      worst_residual = std::max(worst_residual, AngularResidualDeg(pose, Correspondence{bearings[i], s, {}}));
      if (IsInstanceLabel(f.labels.labels[i])) {
        ++buildings;
        EXPECT_LT(SmallCity().FindBuilding(f.labels.labels[i])->SurfaceDistance(s), 1e-7);
      }
    }
    EXPECT_LT(worst_surface, 1e-7);
    EXPECT_LT(worst_residual, 1e-9);
    EXPECT_GT(buildings, 0);
  }
}

TEST(ProjectPointCloud, ReferenceLabelBeatsDepth) {
  const ImageDims dims{64, 32};
  const Pose pose = Pose::Identity();
  const Vec3 dir = PixelBearings(dims)[10 * 64 + 20];
  LabeledCloud cloud;
  cloud.Add(dir * 3.0, 1000);  // A, near
  cloud.Add(dir * 7.0, 1001);  // B, far
  LabelImage reference(dims);
  reference.labels[10 * 64 + 20] = 1001;
  const RenderedFrame with_ref = ProjectPointCloud(cloud, pose, dims, &reference);
  EXPECT_EQ(with_ref.labels.labels[10 * 64 + 20], 1001u);
  EXPECT_LT((with_ref.coords.coords[10 * 64 + 20] - dir * 7.0).norm(), 1e-12);
  const RenderedFrame nearest = ProjectPointCloud(cloud, pose, dims);
  EXPECT_EQ(nearest.labels.labels[10 * 64 + 20], 1000u);
  EXPECT_LT((nearest.coords.coords[10 * 64 + 20] - dir * 3.0).norm(), 1e-12);
}

TEST(ProjectPointCloud, OnePointPerPixelIsIdentity) {
  const ImageDims dims{32, 16};
  CounterRng rng(70, 0);
  const Pose pose = testing::RandomPose(rng);
  const auto bearings = PixelBearings(dims);
  LabeledCloud cloud;
  for (int i = 0; i < dims.PixelCount(); i += 3) {
    cloud.Add(pose.CameraToWorld(bearings[i] * (1.0 + 10.0 * rng.Uniform())), 1000 + i);
  }
  const RenderedFrame f = ProjectPointCloud(cloud, pose, dims);
  for (int i = 0; i < dims.PixelCount(); ++i) {
    if (i % 3 == 0) {
      EXPECT_EQ(f.labels.labels[i], Label(1000 + i));
      EXPECT_EQ(f.coords.coords[i], cloud.points[i / 3]);
    } else {
      EXPECT_FALSE(f.coords.IsValid(i));
    }
  }
}

// The cloud spacing sits just below the pixel footprint (about 0.74 m at
// 60 m for 512 columns): no holes, and the spacing dominates the error.
TEST(ProjectPointCloud, DenseCloudAgreesWithRaycast) {
  CityScene scene;
  Cuboid b;
  b.center = Vec3(0, 15, 0);
  b.half_extents = Vec3(12, 15, 8);
  b.yaw = 0.3;
  scene.buildings.push_back(b);
  const double step = 0.5;
  const ImageDims dims{512, 256};
  const LabeledCloud cloud = SampleSurfaceCloud(scene, step);
  int total = 0, good = 0;
  for (int k = 0; k < 8; ++k) {
    const double a = 2.0 * M_PI * k / 8 + 0.1;
    const Vec3 c(60.0 * std::sin(a), 2.0, 60.0 * std::cos(a));
    const Pose pose = Pose::FromCenter(UprightCameraRotation(std::atan2(-c.x(), -c.z())), c);
    const RenderedFrame ray = RaycastRender(scene, pose, dims);
    const RenderedFrame proj = ProjectPointCloud(cloud, pose, dims, &ray.labels);
    for (int i = 0; i < dims.PixelCount(); ++i) {
      if (!IsInstanceLabel(ray.labels.labels[i])) continue;
      ++total;
      good += proj.coords.IsValid(i) && (proj.coords.coords[i] - ray.coords.coords[i]).norm() < 2.0 * step;
    }
  }
  ASSERT_GT(total, 5000);
  EXPECT_GE(double(good) / total, 0.95);
}

InstanceMap MapFromScene(const CityScene& scene) {
  return BuildInstanceMap(SampleSurfaceCloud(scene, 2.0)).map;
}

TEST(SimulatePredictions, ZeroNoiseIsExactCopy) {
  const auto poses = SampleTrajectory(SmallCity(), 1, 14);
  const RenderedFrame gt = RaycastRender(SmallCity(), poses[0], kRenderDims);
  const RenderedFrame out =
      SimulatePredictions(gt, NoiseModel{}, MapFromScene(SmallCity()), SceneBounds(SmallCity()), 3);
  EXPECT_EQ(out.labels.labels, gt.labels.labels);
  for (int i = 0; i < kRenderDims.PixelCount(); ++i) {
    if (gt.coords.IsValid(i)) {
      EXPECT_EQ(out.coords.coords[i], gt.coords.coords[i]);
    } else {
      EXPECT_FALSE(out.coords.IsValid(i));
    }
  }
}

TEST(SimulatePredictions, GaussianRadiusMatchesChiCdf) {
  const ImageDims dims{1000, 1000};
  RenderedFrame gt{SceneCoordinateImage(dims), LabelImage(dims)};
  for (int i = 0; i < dims.PixelCount(); ++i) {
    gt.coords.coords[i] = Vec3(i % 1000, 0.0, i / 1000);
    gt.labels.labels[i] = kRoadLabel;
  }
  NoiseModel noise;
  noise.coord_sigma = 0.25;
  noise.seed = 15;
  const RenderedFrame out = SimulatePredictions(gt, noise, InstanceMap{}, Aabb{}, 0);
  int within = 0;
  for (int i = 0; i < dims.PixelCount(); ++i) within += (out.coords.coords[i] - gt.coords.coords[i]).norm() <= 0.5;
  // Chi distribution with 3 dof at r / sigma = 2.
  const double x = 2.0;
  const double expected = std::erf(x / std::sqrt(2.0)) - std::sqrt(2.0 / M_PI) * x * std::exp(-x * x / 2.0);
  EXPECT_NEAR(double(within) / dims.PixelCount(), expected, 0.02);
}

TEST(SimulatePredictions, LabelFlipRate) {
  const InstanceMap map = MapFromScene(SmallCity());
  NoiseModel noise;
  noise.label_flip_rate = 0.1;
  noise.seed = 16;
  const auto poses = SampleTrajectory(SmallCity(), 40, 16);
  long buildings = 0, flipped = 0;
  for (std::size_t k = 0; k < poses.size(); ++k) {
    const RenderedFrame gt = RaycastRender(SmallCity(), poses[k], kRenderDims);
    const RenderedFrame out = SimulatePredictions(gt, noise, map, SceneBounds(SmallCity()), k);
    for (int i = 0; i < kRenderDims.PixelCount(); ++i) {
      if (!IsInstanceLabel(gt.labels.labels[i])) {
        EXPECT_EQ(out.labels.labels[i], gt.labels.labels[i]);
        continue;
      }
      ++buildings;
      if (out.labels.labels[i] == gt.labels.labels[i]) continue;
      ++flipped;
      // Local coordinates survive the flip.
      const Vec3 c_true = map.Find(gt.labels.labels[i])->Whiten(gt.coords.coords[i]);
      const Vec3 c_pred = map.Find(out.labels.labels[i])->Whiten(out.coords.coords[i]);
      EXPECT_LT((c_true - c_pred).norm(), 1e-9);
    }
  }
  ASSERT_GT(buildings, 100000);
  EXPECT_NEAR(double(flipped) / buildings, 0.1, 0.01);
}

TEST(SimulatePredictions, OutliersStayInInflatedVolume) {
  const InstanceMap map = MapFromScene(SmallCity());
  NoiseModel noise;
  noise.outlier_rate = 1.0;
  noise.seed = 17;
  const Aabb bounds = SceneBounds(SmallCity());
  const Aabb box = bounds.Inflated(0.1);
  const auto poses = SampleTrajectory(SmallCity(), 1, 17);
  const RenderedFrame gt = RaycastRender(SmallCity(), poses[0], kRenderDims);
  const RenderedFrame out = SimulatePredictions(gt, noise, map, bounds, 0);
  for (int i = 0; i < kRenderDims.PixelCount(); ++i) {
    if (!gt.coords.IsValid(i)) continue;
    const Vec3& s = out.coords.coords[i];
    EXPECT_TRUE((s.array() >= box.min.array()).all() && (s.array() <= box.max.array()).all());
  }
  EXPECT_LT((box.max - box.min - 1.1 * (bounds.max - bounds.min)).norm(), 1e-9);
}

TEST(SimulatePredictions, DeterministicPerSeedAndStream) {
  const InstanceMap map = MapFromScene(SmallCity());
  const NoiseModel noise{0.3, 0.1, 0.05, 18};
  const auto poses = SampleTrajectory(SmallCity(), 1, 18);
  const RenderedFrame gt = RaycastRender(SmallCity(), poses[0], kRenderDims);
  const RenderedFrame a = SimulatePredictions(gt, noise, map, SceneBounds(SmallCity()), 4);
  const RenderedFrame b = SimulatePredictions(gt, noise, map, SceneBounds(SmallCity()), 4);
  const RenderedFrame c = SimulatePredictions(gt, noise, map, SceneBounds(SmallCity()), 5);
  EXPECT_EQ(a.labels.labels, b.labels.labels);
  bool differs = false;
  for (int i = 0; i < kRenderDims.PixelCount(); ++i) {
    if (!gt.coords.IsValid(i)) continue;
    EXPECT_EQ(a.coords.coords[i], b.coords.coords[i]);
    differs |= a.coords.coords[i] != c.coords.coords[i];
  }
  EXPECT_TRUE(differs);
}

TEST(NoiseModel, Validation) {
  EXPECT_NO_THROW(NoiseModel{}.Validate());
  EXPECT_ANY_THROW((NoiseModel{-0.1, 0, 0, 0}.Validate()));
  EXPECT_ANY_THROW((NoiseModel{0, 1.5, 0, 0}.Validate()));
  EXPECT_ANY_THROW((NoiseModel{0, 0, -0.2, 0}.Validate()));
}

TEST(LocalCoordinates, RoundTrip) {
  const InstanceMap map = MapFromScene(SmallCity());
  const auto poses = SampleTrajectory(SmallCity(), 1, 19);
  const RenderedFrame gt = RaycastRender(SmallCity(), poses[0], kRenderDims);
  const SceneCoordinateImage local = ToLocalCoordinates(gt.coords, gt.labels, map);
  const SceneCoordinateImage back = ToSceneCoordinates(local, gt.labels, map);
  for (int i = 0; i < kRenderDims.PixelCount(); ++i) {
    const bool building = IsInstanceLabel(gt.labels.labels[i]);
    EXPECT_EQ(local.IsValid(i), building);
    if (building) EXPECT_LT((back.coords[i] - gt.coords.coords[i]).norm(), 1e-9);
  }
}

TEST(RemoveBuildings, TwentyPercentOf102) {
  const CityScene reduced = RemoveBuildings(SmallCity(), 0.2, 20);
  EXPECT_EQ(reduced.buildings.size(), 82u);
  std::set<Label> removed;
  for (const Cuboid& c : SmallCity().buildings) removed.insert(c.label);
  for (const Cuboid& c : reduced.buildings) {
    const Cuboid* orig = SmallCity().FindBuilding(c.label);
    ASSERT_NE(orig, nullptr);
    EXPECT_TRUE(SameCuboid(*orig, c));
    removed.erase(c.label);
  }
  EXPECT_EQ(removed.size(), 20u);
  const CityScene again = RemoveBuildings(SmallCity(), 0.2, 20);
  ASSERT_EQ(again.buildings.size(), reduced.buildings.size());
  for (std::size_t i = 0; i < again.buildings.size(); ++i) {
    EXPECT_EQ(again.buildings[i].label, reduced.buildings[i].label);
  }
  // Removed instances never show up in renders.
  for (const Pose& pose : SampleTrajectory(reduced, 5, 20)) {
    const RenderedFrame f = RaycastRender(reduced, pose, kRenderDims);
    for (Label l : f.labels.labels) EXPECT_EQ(removed.count(l), 0u);
  }
}

TEST(RemoveBuildings, ZeroFractionIsIdentity) {
  const CityScene same = RemoveBuildings(SmallCity(), 0.0, 21);
  ASSERT_EQ(same.buildings.size(), SmallCity().buildings.size());
  for (std::size_t i = 0; i < same.buildings.size(); ++i) {
    EXPECT_TRUE(SameCuboid(same.buildings[i], SmallCity().buildings[i]));
  }
}

std::vector<Vec3> Corners(const Cuboid& c) {
  std::vector<Vec3> out;
  for (int i = 0; i < 8; ++i) {
    const Vec3 s(i & 1 ? 1 : -1, i & 2 ? 1 : -1, i & 4 ? 1 : -1);
    out.push_back(c.center + c.Rotation() * s.cwiseProduct(c.half_extents));
  }
  return out;
}

double YawGapMod90(double a, double b) {
  return std::abs(std::remainder(a - b, M_PI / 2.0));
}

TEST(CuboidApproximation, YawedBoxCorners) {
  Cuboid truth;
  truth.center = Vec3(12, 7, -4);
  truth.half_extents = Vec3(9, 7, 4);
  truth.yaw = 30.0 * M_PI / 180.0;
  const Cuboid fit = CuboidApproximation(Corners(truth), 1000);
  EXPECT_LT(YawGapMod90(fit.yaw, truth.yaw), 1e-6);
  EXPECT_LT((fit.center - truth.center).norm(), 1e-9);
  EXPECT_LT((fit.half_extents - truth.half_extents).norm(), 1e-9);
}

TEST(CuboidApproximation, AxisAlignedBox) {
  Cuboid truth;
  truth.center = Vec3(-3, 10, 8);
  truth.half_extents = Vec3(5, 10, 11);
  const Cuboid fit = CuboidApproximation(Corners(truth), 1000);
  EXPECT_LT(YawGapMod90(fit.yaw, 0.0), 1e-12);
  // Extents may come back with x and z swapped when the yaw lands on 90 deg.
  const Vec3 ext = fit.half_extents;
  EXPECT_NEAR(ext.y(), 10.0, 1e-12);
  EXPECT_NEAR(std::min(ext.x(), ext.z()), 5.0, 1e-12);
  EXPECT_NEAR(std::max(ext.x(), ext.z()), 11.0, 1e-12);
}

TEST(CuboidApproximation, SquareFootprintFallsBackToZeroYaw) {
  Cuboid truth;
  truth.center = Vec3(0, 4, 0);
  truth.half_extents = Vec3(3, 4, 3);
  truth.yaw = 0.3;
  // A square footprint has no principal axis.
  const Cuboid fit = CuboidApproximation(Corners(truth), 1000);
  EXPECT_EQ(fit.yaw, 0.0);
}

TEST(CuboidApproximation, TooFewPoints) {
  const std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  EXPECT_THROW(CuboidApproximation(pts, 1000), DegenerateError);
}

TEST(CuboidApproximation, NoisyScanWithinThreeSigma) {
  const double sigma = 0.05;
  for (int trial = 0; trial < 20; ++trial) {
    CityScene one;
    Cuboid truth;
    CounterRng rng(22, trial);
    truth.half_extents = Vec3(Quantize(8 + 6 * rng.Uniform(), 1e-3), Quantize(10 + 20 * rng.Uniform(), 1e-3),
                              Quantize(4 + 3 * rng.Uniform(), 1e-3));
    truth.center = Vec3(50 * rng.Uniform(), truth.half_extents.y(), 50 * rng.Uniform());
    truth.yaw = 0.5 * (rng.Uniform() - 0.5);
    one.buildings.push_back(truth);
    LabeledCloud cloud = SampleSurfaceCloud(one, 0.3);
    std::vector<Vec3> pts;
    for (Vec3 p : cloud.points) pts.push_back(p + sigma * testing::RandomVec(rng, 1.0));
    const Cuboid fit = CuboidApproximation(pts, truth.label);
    EXPECT_LT(YawGapMod90(fit.yaw, truth.yaw), 0.01) << trial;
    for (int k = 0; k < 3; ++k) {
      EXPECT_NEAR(fit.half_extents(k), truth.half_extents(k), 3 * sigma) << trial << " axis " << k;
    }
  }
}

TEST(ApproximateScene, ExactCuboidsRenderBitForBit) {
  CuboidFitOptions opts;
  opts.trim_fraction = 0.0;
  opts.length_quantum = kLengthQuantum;
  opts.yaw_quantum = kYawQuantum;
  const CityScene approx = ApproximateScene(SmallCity(), SampleSurfaceCloud(SmallCity(), 1.0), opts);
  ASSERT_EQ(approx.buildings.size(), SmallCity().buildings.size());
  for (std::size_t i = 0; i < approx.buildings.size(); ++i) {
    const Cuboid& a = approx.buildings[i];
    const Cuboid& b = *SmallCity().FindBuilding(a.label);
    EXPECT_EQ(a.center, b.center) << a.label;
    EXPECT_EQ(a.half_extents, b.half_extents) << a.label;
    EXPECT_EQ(a.yaw, b.yaw) << a.label;
  }
  for (const Pose& pose : SampleTrajectory(SmallCity(), 3, 23)) {
    const RenderedFrame exact = RaycastRender(SmallCity(), pose, kRenderDims);
    const RenderedFrame approx_gt = RenderApproximateGt(approx, pose, kRenderDims);
    EXPECT_EQ(exact.labels.labels, approx_gt.labels.labels);
    for (int i = 0; i < kRenderDims.PixelCount(); ++i) {
      if (exact.coords.IsValid(i)) EXPECT_EQ(exact.coords.coords[i], approx_gt.coords.coords[i]);
    }
  }
}

}  // namespace
}  // namespace instloc
