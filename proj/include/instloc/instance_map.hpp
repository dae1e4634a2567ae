#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "instloc/geometry.hpp"
#include "instloc/labels.hpp"

namespace instloc {

// Eigenvalue floor (m^2) keeping planar and degenerate instances invertible.
inline constexpr double kWhiteningEpsilon = 1e-8;

// PCA whitening of one instance's point set: S = W * C + M and C = W^-1 (S - M).
struct WhiteningTransform {
  Label label = 0;
  Vec3 mean = Vec3::Zero();
  Mat3 unwhiten = Mat3::Identity();
  Mat3 whiten = Mat3::Identity();
  long point_count = 0;

  Vec3 Unwhiten(const Vec3& local) const { return unwhiten * local + mean; }
  Vec3 Whiten(const Vec3& scene) const { return whiten * (scene - mean); }
};

// Fits mean and whitening matrix. Throws DegenerateError for fewer than four
// points. Result does not depend on input order.
WhiteningTransform FitWhitening(std::span<const Vec3> points, Label label);

// Rebuilds a transform from its stored mean and unwhitening matrix.
WhiteningTransform MakeWhiteningTransform(Label label, const Vec3& mean, const Mat3& unwhiten,
                                          long point_count);

inline Vec3 Unwhiten(const WhiteningTransform& t, const Vec3& local) { return t.Unwhiten(local); }
inline Vec3 Whiten(const WhiteningTransform& t, const Vec3& scene) { return t.Whiten(scene); }

struct LabeledCloud {
  std::vector<Vec3> points;
  std::vector<Label> labels;

  std::size_t size() const { return points.size(); }
  void Add(const Vec3& p, Label l) {
    points.push_back(p);
    labels.push_back(l);
  }
};

class InstanceMap {
 public:
  InstanceMap() = default;

  // Adds or replaces the transform for t.label.
  void Insert(const WhiteningTransform& t) { transforms_[t.label] = t; }

  const WhiteningTransform* Find(Label label) const {
    auto it = transforms_.find(label);
    return it == transforms_.end() ? nullptr : &it->second;
  }
  bool Contains(Label label) const { return transforms_.count(label) != 0; }

  const std::map<Label, WhiteningTransform>& Transforms() const { return transforms_; }
  std::vector<Label> InstanceLabels() const;
  std::size_t size() const { return transforms_.size(); }
  bool empty() const { return transforms_.empty(); }

  // Total panoptic label count L: stuff classes plus mapped instances.
  std::size_t LabelCount() const { return kNumClassLabels + transforms_.size(); }

 private:
  std::map<Label, WhiteningTransform> transforms_;
};

struct InstanceMapBuild {
  InstanceMap map;
  std::vector<Label> skipped_labels;  // instances with fewer than 4 points
};

// One transform per building instance label; stuff classes are ignored.
InstanceMapBuild BuildInstanceMap(const LabeledCloud& cloud);

}  // namespace instloc
