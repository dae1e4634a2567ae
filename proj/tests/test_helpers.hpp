#pragma once

#include <Eigen/Geometry>
#include <vector>

#include "instloc/geometry.hpp"
#include "instloc/pnp.hpp"
#include "instloc/random.hpp"

namespace instloc::testing {

inline Mat3 RandomRotation(CounterRng& rng) {
  Eigen::Quaterniond q(rng.Normal(), rng.Normal(), rng.Normal(), rng.Normal());
  return q.normalized().toRotationMatrix();
}

inline Vec3 RandomVec(CounterRng& rng, double scale) {
  return Vec3(rng.Normal(), rng.Normal(), rng.Normal()) * scale;
}

inline Pose RandomPose(CounterRng& rng, double translation_scale = 5.0) {
  return Pose(RandomRotation(rng), RandomVec(rng, translation_scale));
}

// World points around the camera at 2..40 m, bearings by forward projection.
inline std::vector<Correspondence> SynthesizeCorrespondences(const Pose& pose, int n, CounterRng& rng) {
  std::vector<Correspondence> out;
  for (int i = 0; i < n; ++i) {
    Vec3 dir = RandomVec(rng, 1.0).normalized();
    const double depth = 2.0 + 38.0 * rng.Uniform();
    const Vec3 world = pose.CameraToWorld(dir * depth);
    out.push_back({pose.WorldToCamera(world).normalized(), world, {}});
  }
  return out;
}

// Independent orientation error: angle between unit quaternions.
inline double QuaternionAngleDeg(const Mat3& a, const Mat3& b) {
  const Eigen::Quaterniond qa(a), qb(b);
  const double dot = std::min(1.0, std::abs(qa.normalized().dot(qb.normalized())));
  return 2.0 * std::acos(dot) * 180.0 / M_PI;
}

}  // namespace instloc::testing
