#include "instloc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "instloc/errors.hpp"
#include "instloc/numeric.hpp"

namespace instloc {

namespace {

constexpr double kMinCameraNorm = 1e-12;

void CheckSameDims(const ImageDims& a, const ImageDims& b) {
  if (!(a == b)) throw DomainError("image dimensions differ");
}

// Sum of per-pixel distances with subgradient (a - b) / |a - b|.
LossResult DistanceSum(const SceneCoordinateImage& pred, const SceneCoordinateImage& gt,
                       const std::vector<bool>* include) {
  CheckSameDims(pred.dims, gt.dims);
  LossResult r;
  r.grad_coords.assign(pred.coords.size(), Vec3::Zero());
  CompensatedSum sum;
  for (int i = 0; i < static_cast<int>(pred.coords.size()); ++i) {
    if (!gt.IsValid(i) || !pred.IsValid(i)) continue;
    if (include && !(*include)[i]) continue;
    const Vec3 d = pred.coords[i] - gt.coords[i];
    const double n = d.norm();
    sum += n;
    if (n > 0.0) r.grad_coords[i] = d / n;
  }
  r.value = sum.Value();
  return r;
}

}  // namespace

void LossWeights::Validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (!(w_rec_global > 0.0) || !(w_rec_local > 0.0)) {
    throw std::invalid_argument("reconstruction weights must be positive");
  }
}

LabelChannels::LabelChannels(std::vector<Label> labels) : labels_(std::move(labels)) {
  std::sort(labels_.begin(), labels_.end());
  labels_.erase(std::unique(labels_.begin(), labels_.end()), labels_.end());
}

LabelChannels LabelChannels::FromInstanceMap(const InstanceMap& map) {
  std::vector<Label> labels;
  for (Label l = 0; l < kNumClassLabels; ++l) labels.push_back(l);
  for (Label l : map.InstanceLabels()) labels.push_back(l);
  return LabelChannels(std::move(labels));
}

int LabelChannels::Channel(Label label) const {
  auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
  if (it == labels_.end() || *it != label) {
    throw DomainError("label " + std::to_string(label) + " has no logit channel");
  }
  return static_cast<int>(it - labels_.begin());
}

LossResult LossL1Repr(const SceneCoordinateImage& pred, const Pose& pose,
                      std::span<const BearingVector> bearings) {
  if (bearings.size() != pred.coords.size()) throw DomainError("bearing count mismatch");
  LossResult r;
  r.grad_coords.assign(pred.coords.size(), Vec3::Zero());
  CompensatedSum sum;
  const Mat3& rot = pose.Rotation();
  for (int i = 0; i < static_cast<int>(pred.coords.size()); ++i) {
    if (!pred.IsValid(i)) continue;
    const Vec3 q = pose.WorldToCamera(pred.coords[i]);
    const double qn = q.norm();
    if (qn < kMinCameraNorm) {
      ++r.skipped_pixels;
      continue;
    }
    const Vec3 dir = q / qn;
    const Vec3 diff = dir - bearings[i];
    const double f = diff.norm();
    sum += f;
    if (f > 0.0) {
      const Vec3 d_dir = diff / f;
      const Vec3 d_q = (d_dir - dir * dir.dot(d_dir)) / qn;
      r.grad_coords[i] = rot * d_q;
    }
  }
  r.value = sum.Value();
  return r;
}

LossResult LossL2Rec(const SceneCoordinateImage& pred, const SceneCoordinateImage& gt) {
  return DistanceSum(pred, gt, nullptr);
}

LossResult LossL3(const SceneCoordinateImage& pred, const SceneCoordinateImage& gt,
                  const Pose& pose, std::span<const BearingVector> bearings,
                  const LossWeights& w) {
  const LossResult l1 = LossL1Repr(pred, pose, bearings);
  const LossResult l2 = LossL2Rec(pred, gt);
  LossResult r;
  r.value = w.alpha * l1.value + (1.0 - w.alpha) * l2.value;
  r.grad_coords.resize(pred.coords.size());
  for (std::size_t i = 0; i < r.grad_coords.size(); ++i) {
    r.grad_coords[i] = w.alpha * l1.grad_coords[i] + (1.0 - w.alpha) * l2.grad_coords[i];
  }
  r.skipped_pixels = l1.skipped_pixels;
  return r;
}

LossResult CrossEntropy(const LogitImage& logits, const LabelImage& labels,
                        const LabelChannels& channels) {
  CheckSameDims(logits.dims, labels.dims);
  const int pixels = logits.dims.PixelCount();
  if (logits.scores.rows() != channels.size() || logits.scores.cols() != pixels) {
    throw DomainError("logit image shape does not match the label channels");
  }
  LossResult r;
  r.grad_logits.resize(logits.scores.rows(), pixels);
  CompensatedSum sum;
  const double inv = 1.0 / pixels;
  for (int p = 0; p < pixels; ++p) {
    const int target = channels.Channel(labels.labels[p]);
    const auto z = logits.scores.col(p);
    const double peak = z.maxCoeff();
    const Eigen::VectorXd e = (z.array() - peak).exp();
    const double total = e.sum();
    sum += std::log(total) + peak - z(target);
    r.grad_logits.col(p) = e * (inv / total);
    r.grad_logits(target, p) -= inv;
  }
  r.value = sum.Value() * inv;
  return r;
}

LossResult LossL4(const SceneCoordinateImage& pred, const SceneCoordinateImage& gt,
                  const LogitImage& logits, const LabelImage& labels,
                  const LabelChannels& channels, const LossWeights& w) {
  LossResult ce = CrossEntropy(logits, labels, channels);
  const LossResult rec = LossL2Rec(pred, gt);
  LossResult r;
  r.value = ce.value + w.w_rec_global * rec.value;
  r.grad_logits = std::move(ce.grad_logits);
  r.grad_coords.resize(rec.grad_coords.size());
  for (std::size_t i = 0; i < r.grad_coords.size(); ++i) {
    r.grad_coords[i] = w.w_rec_global * rec.grad_coords[i];
  }
  return r;
}

LossResult LossL5(const SceneCoordinateImage& local_pred, const SceneCoordinateImage& local_gt,
                  const LogitImage& logits, const LabelImage& labels,
                  const LabelChannels& channels, const InstanceMap& map, const LossWeights& w) {
  CheckSameDims(local_gt.dims, labels.dims);
  LossResult ce = CrossEntropy(logits, labels, channels);
  std::vector<bool> include(labels.labels.size());
  for (std::size_t i = 0; i < include.size(); ++i) include[i] = map.Contains(labels.labels[i]);
  const LossResult rec = DistanceSum(local_pred, local_gt, &include);
  LossResult r;
  r.value = ce.value + w.w_rec_local * rec.value;
  r.grad_logits = std::move(ce.grad_logits);
  r.grad_coords.resize(rec.grad_coords.size());
  for (std::size_t i = 0; i < r.grad_coords.size(); ++i) {
    r.grad_coords[i] = w.w_rec_local * rec.grad_coords[i];
  }
  return r;
}

}  // namespace instloc
