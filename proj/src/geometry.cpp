#include "instloc/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "instloc/errors.hpp"
#include "instloc/image.hpp"

namespace instloc {

namespace {

void CheckDims(const ImageDims& dims) {
  if (!dims.IsEquirectangular()) {
    throw DomainError("equirectangular image needs width == 2 * height > 0");
  }
}

}  // namespace

BearingVector PixelToBearing(const PixelCoord& p, const ImageDims& dims) {
  CheckDims(dims);
  if (!(p.u >= -0.5 && p.u < dims.width - 0.5 && p.v >= -0.5 && p.v <= dims.height - 0.5)) {
    throw DomainError("pixel outside the panorama");
  }
  const double lon = 2.0 * M_PI * (p.u + 0.5) / dims.width - M_PI;
  const double lat = M_PI / 2.0 - M_PI * (p.v + 0.5) / dims.height;
  const double cos_lat = std::cos(lat);
  return {cos_lat * std::sin(lon), -std::sin(lat), cos_lat * std::cos(lon)};
}

PixelCoord BearingToPixel(const Vec3& bearing, const ImageDims& dims) {
  CheckDims(dims);
  const double norm = bearing.norm();
  if (!(norm > 1e-300) || !std::isfinite(norm)) {
    throw DomainError("bearing must be a finite nonzero vector");
  }
  const Vec3 b = bearing / norm;
  const double lon = std::atan2(b.x(), b.z());
  const double lat = std::asin(std::clamp(-b.y(), -1.0, 1.0));
  PixelCoord p;
  p.u = dims.width * (lon + M_PI) / (2.0 * M_PI) - 0.5;
  if (p.u >= dims.width - 0.5) p.u -= dims.width;
  p.v = dims.height * (M_PI / 2.0 - lat) / M_PI - 0.5;
  return p;
}

int BearingToPixelIndex(const Vec3& bearing, const ImageDims& dims) {
  const PixelCoord p = BearingToPixel(bearing, dims);
  int col = static_cast<int>(std::floor(p.u + 0.5));
  int row = static_cast<int>(std::floor(p.v + 0.5));
  col = std::clamp(col, 0, dims.width - 1);
  row = std::clamp(row, 0, dims.height - 1);
  return row * dims.width + col;
}

Eigen::Quaterniond Pose::Quaternion() const {
  Eigen::Quaterniond q(rotation_);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  return q;
}

Pose Pose::operator*(const Pose& other) const {
  // a(b(X)) = Ra^T (Rb^T X + Tb) + Ta
  return Pose(other.rotation_ * rotation_, rotation_.transpose() * other.translation_ + translation_);
}

bool Pose::IsValid(double tol) const {
  if (!rotation_.allFinite() || !translation_.allFinite()) return false;
  const double ortho = (rotation_.transpose() * rotation_ - Mat3::Identity()).norm();
  return ortho <= tol && std::abs(rotation_.determinant() - 1.0) <= tol;
}

double RotationAngleDeg(const Mat3& rotation) {
  // atan2 form keeps precision near 0 and 180 degrees where acos does not.
  const Vec3 axis(rotation(2, 1) - rotation(1, 2), rotation(0, 2) - rotation(2, 0),
                  rotation(1, 0) - rotation(0, 1));
  const double angle = std::atan2(0.5 * axis.norm(), 0.5 * (rotation.trace() - 1.0));
  return std::clamp(angle * 180.0 / M_PI, 0.0, 180.0);
}

PoseError RelativePoseErrors(const Pose& a, const Pose& b) {
  PoseError e;
  e.distance = (a.Center() - b.Center()).norm();
  e.angle_deg = RotationAngleDeg(a.Rotation().transpose() * b.Rotation());
  return e;
}

Mat3 UprightCameraRotation(double yaw, double pitch) {
  // Columns are the camera x (right), y (down), z (forward) axes in world
  // coordinates; world y points up.
  const Vec3 forward(std::sin(yaw), 0.0, std::cos(yaw));
  const Vec3 down(0.0, -1.0, 0.0);
  Mat3 level;
  level.col(0) = down.cross(forward);
  level.col(1) = down;
  level.col(2) = forward;
  // Pitch rotates about the camera x axis; positive looks up.
  const Mat3 tilt = Eigen::AngleAxisd(pitch, Vec3::UnitX()).toRotationMatrix();
  return level * tilt.transpose();
}

std::vector<BearingVector> PixelBearings(const ImageDims& dims) {
  std::vector<BearingVector> out;
  out.reserve(dims.PixelCount());
  for (int row = 0; row < dims.height; ++row) {
    for (int col = 0; col < dims.width; ++col) out.push_back(PixelToBearing({double(col), double(row)}, dims));
  }
  return out;
}

}  // namespace instloc
