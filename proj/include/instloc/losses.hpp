#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "instloc/geometry.hpp"
#include "instloc/image.hpp"
#include "instloc/instance_map.hpp"

namespace instloc {

struct LossWeights {
  double alpha = 0.02;        // L1 share in L3
  double w_rec_global = 0.1;  // reconstruction weight in L4
  double w_rec_local = 0.5;   // local reconstruction weight in L5

  void Validate() const;
};

// Maps panoptic label ids to logit channels: stuff classes first, then
// instance labels in ascending order.
class LabelChannels {
 public:
  explicit LabelChannels(std::vector<Label> labels);
  static LabelChannels FromInstanceMap(const InstanceMap& map);

  int Channel(Label label) const;  // throws DomainError when unmapped
  int size() const { return static_cast<int>(labels_.size()); }
  Label LabelAt(int channel) const { return labels_[channel]; }

 private:
  std::vector<Label> labels_;  // sorted
};

// Scores over all L panoptic labels; column p holds pixel p.
struct LogitImage {
  ImageDims dims;
  Eigen::MatrixXd scores;  // channels x pixels
};

struct LossResult {
  double value = 0.0;
  std::vector<Vec3> grad_coords;  // d/dS (or d/dC), zero for unused pixels
  Eigen::MatrixXd grad_logits;    // d/dlogits, empty when not applicable
  int skipped_pixels = 0;         // L1: camera-frame points at the origin
};

// Sum over valid pixels of |normalize(R^T S + T) - V|.
LossResult LossL1Repr(const SceneCoordinateImage& pred, const Pose& pose,
                      std::span<const BearingVector> bearings);

// Sum over pixels valid in the ground truth of |S - S_gt|.
LossResult LossL2Rec(const SceneCoordinateImage& pred, const SceneCoordinateImage& gt);

// alpha * L1 + (1 - alpha) * L2.
LossResult LossL3(const SceneCoordinateImage& pred, const SceneCoordinateImage& gt,
                  const Pose& pose, std::span<const BearingVector> bearings,
                  const LossWeights& w);

// Pixel-averaged softmax cross entropy.
LossResult CrossEntropy(const LogitImage& logits, const LabelImage& labels,
                        const LabelChannels& channels);

// CE + w_rec_global * L2.
LossResult LossL4(const SceneCoordinateImage& pred, const SceneCoordinateImage& gt,
                  const LogitImage& logits, const LabelImage& labels,
                  const LabelChannels& channels, const LossWeights& w);

// CE + w_rec_local * sum |C - C_gt| over pixels whose ground-truth label has
// a whitening transform in `map`.
LossResult LossL5(const SceneCoordinateImage& local_pred, const SceneCoordinateImage& local_gt,
                  const LogitImage& logits, const LabelImage& labels,
                  const LabelChannels& channels, const InstanceMap& map, const LossWeights& w);

}  // namespace instloc
