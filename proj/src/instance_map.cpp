#include "instloc/instance_map.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "instloc/errors.hpp"

namespace instloc {

WhiteningTransform FitWhitening(std::span<const Vec3> points, Label label) {
  if (points.size() < 4) {
    throw DegenerateError("instance " + std::to_string(label) + " has fewer than 4 points");
  }
  // Lexicographic order makes the floating-point sums permutation invariant.
  std::vector<Vec3> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(), [](const Vec3& a, const Vec3& b) {
    return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
  });

  const double n = static_cast<double>(sorted.size());
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : sorted) mean += p;
  mean /= n;

  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : sorted) {
    const Vec3 d = p - mean;
    cov.noalias() += d * d.transpose();
  }
  cov /= n;

  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  // Eigen returns ascending order.
  Mat3 axes;
  Vec3 variances;
  for (int k = 0; k < 3; ++k) {
    axes.col(k) = eig.eigenvectors().col(2 - k);
    variances(k) = std::max(eig.eigenvalues()(2 - k), 0.0);
  }
  for (int k = 0; k < 3; ++k) {
    Eigen::Index largest = 0;
    axes.col(k).cwiseAbs().maxCoeff(&largest);
    if (axes(largest, k) < 0.0) axes.col(k) *= -1.0;
  }
  if (axes.determinant() < 0.0) axes.col(2) *= -1.0;

  const Vec3 scale = (variances.array() + kWhiteningEpsilon).sqrt();
  WhiteningTransform t;
  t.label = label;
  t.mean = mean;
  t.unwhiten = axes * scale.asDiagonal();
  t.whiten = scale.cwiseInverse().asDiagonal() * axes.transpose();
  t.point_count = static_cast<long>(sorted.size());
  return t;
}

WhiteningTransform MakeWhiteningTransform(Label label, const Vec3& mean, const Mat3& unwhiten,
                                          long point_count) {
  WhiteningTransform t;
  t.label = label;
  t.mean = mean;
  t.unwhiten = unwhiten;
  Eigen::FullPivLU<Mat3> lu(unwhiten);
  if (!lu.isInvertible()) {
    throw DegenerateError("whitening matrix of instance " + std::to_string(label) +
                          " is singular");
  }
  t.whiten = lu.inverse();
  t.point_count = point_count;
  return t;
}

std::vector<Label> InstanceMap::InstanceLabels() const {
  std::vector<Label> out;
  out.reserve(transforms_.size());
  for (const auto& [label, t] : transforms_) out.push_back(label);
  return out;
}

InstanceMapBuild BuildInstanceMap(const LabeledCloud& cloud) {
  std::map<Label, std::vector<Vec3>> groups;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (IsInstanceLabel(cloud.labels[i])) groups[cloud.labels[i]].push_back(cloud.points[i]);
  }
  InstanceMapBuild out;
  for (const auto& [label, pts] : groups) {
    if (pts.size() < 4) {
      out.skipped_labels.push_back(label);
      continue;
    }
    out.map.Insert(FitWhitening(pts, label));
  }
  return out;
}

}  // namespace instloc
