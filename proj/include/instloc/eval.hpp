#pragma once

#include <span>
#include <vector>

#include "instloc/geometry.hpp"
#include "instloc/image.hpp"

namespace instloc {

// Distance thresholds are inclusive (d <= t).
struct CoordMetrics {
  double pct_within_0_5m = 0.0;
  double pct_within_1m = 0.0;
  double pct_within_3m = 0.0;
  double mean_dist_within_3m = 0.0;  // 0 when no pixel is within 3 m
  long n_valid = 0;
};

// Percentages over pixels valid in `gt` (and, when `mask` is given, carrying
// an instance label there). Prediction-invalid pixels count as misses.
// Throws DomainError when no pixel qualifies.
CoordMetrics CoordAccuracy(const SceneCoordinateImage& pred, const SceneCoordinateImage& gt,
                           const LabelImage* instance_mask = nullptr);

// Per-pixel distances of the evaluated pixels; +inf where the prediction is
// invalid.
std::vector<double> CoordDistances(const SceneCoordinateImage& pred, const SceneCoordinateImage& gt,
                                   const LabelImage* instance_mask = nullptr);

// Same statistics over pooled distances from many images.
CoordMetrics CoordAccuracyFromDistances(std::span<const double> distances);

struct PercentileValue {
  double percentile = 0.0;
  double distance = 0.0;
  double angle_deg = 0.0;
};

struct PoseMetrics {
  double median_dist = 0.0;
  double p95_dist = 0.0;
  double median_angle = 0.0;
  double p95_angle = 0.0;
  std::vector<PercentileValue> extra_percentiles;
  long count = 0;
};

// Linear interpolation between closest ranks: position p/100 * (n - 1) in the
// ascending order. Throws std::invalid_argument on empty input.
double Percentile(std::span<const double> values, double percentile);

PoseMetrics ComputePoseMetrics(std::span<const PoseError> errors,
                               std::span<const double> extra_percentiles = {});

struct ErrorCurves {
  std::vector<double> distance;  // ascending
  std::vector<double> angle_deg; // ascending
};

ErrorCurves ComputeErrorCurves(std::span<const PoseError> errors);

struct RocPoint {
  double threshold = 0.0;
  double pct_within = 0.0;
};

// Cumulative share of evaluated pixels within each threshold.
std::vector<RocPoint> DistanceRoc(const SceneCoordinateImage& pred, const SceneCoordinateImage& gt,
                                  std::span<const double> thresholds,
                                  const LabelImage* instance_mask = nullptr);
std::vector<RocPoint> DistanceRocFromDistances(std::span<const double> distances,
                                               std::span<const double> thresholds);

}  // namespace instloc
