#include "instloc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "instloc/errors.hpp"
#include "instloc/numeric.hpp"

namespace instloc {

namespace {

double Pct(long count, long total) { return 100.0 * static_cast<double>(count) / static_cast<double>(total); }

}  // namespace

std::vector<double> CoordDistances(const SceneCoordinateImage& pred, const SceneCoordinateImage& gt,
                                   const LabelImage* instance_mask) {
  if (!(pred.dims == gt.dims)) throw DomainError("prediction and ground truth dims differ");
  if (instance_mask && !(instance_mask->dims == gt.dims)) throw DomainError("mask dims differ");
  std::vector<double> out;
  for (int i = 0; i < static_cast<int>(gt.coords.size()); ++i) {
    if (!gt.IsValid(i)) continue;
    if (instance_mask && !IsInstanceLabel(instance_mask->labels[i])) continue;
    out.push_back(pred.IsValid(i) ? (pred.coords[i] - gt.coords[i]).norm()
                                  : std::numeric_limits<double>::infinity());
  }
  return out;
}

CoordMetrics CoordAccuracyFromDistances(std::span<const double> distances) {
  if (distances.empty()) throw DomainError("no pixel is valid in both images");
  long n05 = 0, n1 = 0, n3 = 0;
  CompensatedSum within3;
  for (double d : distances) {
    n05 += d <= 0.5;
    n1 += d <= 1.0;
    if (d <= 3.0) {
      ++n3;
      within3 += d;
    }
  }
  CoordMetrics m;
  m.n_valid = static_cast<long>(distances.size());
  m.pct_within_0_5m = Pct(n05, m.n_valid);
  m.pct_within_1m = Pct(n1, m.n_valid);
  m.pct_within_3m = Pct(n3, m.n_valid);
  m.mean_dist_within_3m = n3 > 0 ? within3.Value() / static_cast<double>(n3) : 0.0;
  return m;
}

CoordMetrics CoordAccuracy(const SceneCoordinateImage& pred, const SceneCoordinateImage& gt,
                           const LabelImage* instance_mask) {
  return CoordAccuracyFromDistances(CoordDistances(pred, gt, instance_mask));
}

double Percentile(std::span<const double> values, double percentile) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty list");
  if (!(percentile >= 0.0 && percentile <= 100.0)) throw std::invalid_argument("percentile outside [0, 100]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double pos = percentile / 100.0 * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return v[lo];
  return v[lo] + frac * (v[hi] - v[lo]);
}

PoseMetrics ComputePoseMetrics(std::span<const PoseError> errors, std::span<const double> extra_percentiles) {
  if (errors.empty()) throw std::invalid_argument("pose metrics need at least one error");
  std::vector<double> dist, angle;
  for (const PoseError& e : errors) {
    dist.push_back(e.distance);
    angle.push_back(e.angle_deg);
  }
  PoseMetrics m;
  m.count = static_cast<long>(errors.size());
  m.median_dist = Percentile(dist, 50.0);
  m.p95_dist = Percentile(dist, 95.0);
  m.median_angle = Percentile(angle, 50.0);
  m.p95_angle = Percentile(angle, 95.0);
  for (double p : extra_percentiles) {
    m.extra_percentiles.push_back({p, Percentile(dist, p), Percentile(angle, p)});
  }
  return m;
}

ErrorCurves ComputeErrorCurves(std::span<const PoseError> errors) {
  ErrorCurves c;
  for (const PoseError& e : errors) {
    c.distance.push_back(e.distance);
    c.angle_deg.push_back(e.angle_deg);
  }
  std::stable_sort(c.distance.begin(), c.distance.end());
  std::stable_sort(c.angle_deg.begin(), c.angle_deg.end());
  return c;
}

std::vector<RocPoint> DistanceRocFromDistances(std::span<const double> distances,
                                               std::span<const double> thresholds) {
  if (distances.empty()) throw DomainError("no pixel is valid in both images");
  std::vector<double> sorted(distances.begin(), distances.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<RocPoint> out;
  for (double t : thresholds) {
    const long count = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    out.push_back({t, Pct(count, static_cast<long>(sorted.size()))});
  }
  return out;
}

std::vector<RocPoint> DistanceRoc(const SceneCoordinateImage& pred, const SceneCoordinateImage& gt,
                                  std::span<const double> thresholds, const LabelImage* instance_mask) {
  return DistanceRocFromDistances(CoordDistances(pred, gt, instance_mask), thresholds);
}

}  // namespace instloc
