#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "instloc/geometry.hpp"

namespace instloc {

struct Correspondence {
  BearingVector bearing;  // unit, camera frame
  Vec3 world_point;       // scene coordinate S_p
  PixelCoord pixel;       // provenance only
};

// Angle in degrees between c.bearing and the direction of the world point
// seen from `pose`. A point at the camera center scores 180 (always outlier).
double AngularResidualDeg(const Pose& pose, const Correspondence& c);

// EPnP with the pinhole image constraints replaced by two tangent-plane
// constraints per bearing, so it works for any central camera including
// full panoramas. Throws std::invalid_argument for fewer than 4
// correspondences and DegenerateError for collinear world points.
Pose EpnpBearing(std::span<const Correspondence> corrs);

struct RansacConfig {
  int iterations = 1000;
  double inlier_threshold_deg = 0.22;
  int min_sample = 4;
  std::uint64_t seed = 0;
  bool refit_on_inliers = true;
  // Worker threads for hypothesis evaluation; results do not depend on it.
  int threads = 1;

  void Validate() const;
};

struct PoseEstimate {
  Pose pose;
  std::vector<int> inlier_indices;  // ascending
  double mean_inlier_angle_deg = 0.0;
  int iterations_used = 0;
  double inlier_threshold_deg = 0.0;
};

// Thrown when no hypothesis gathers min_sample + 1 inliers. Carries the best
// hypothesis found, if any.
class NoConsensusError : public std::runtime_error {
 public:
  NoConsensusError(const std::string& what, PoseEstimate best, bool has_estimate)
      : std::runtime_error(what), best_(std::move(best)), has_estimate_(has_estimate) {}
  const PoseEstimate& BestEffort() const { return best_; }
  bool HasEstimate() const { return has_estimate_; }

 private:
  PoseEstimate best_;
  bool has_estimate_;
};

PoseEstimate RansacPnp(std::span<const Correspondence> corrs, const RansacConfig& cfg);

}  // namespace instloc
