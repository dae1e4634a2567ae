#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <utility>

namespace instloc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Unit direction in the camera frame (x right, y down, z forward).
using BearingVector = Eigen::Vector3d;

struct ImageDims {
  int width = 512;
  int height = 256;

  int PixelCount() const { return width * height; }
  bool IsEquirectangular() const { return width > 0 && height > 0 && width == 2 * height; }
  friend bool operator==(const ImageDims&, const ImageDims&) = default;
};

// Continuous pixel position. The center of pixel (col, row) has coordinates
// (col, row); the half-pixel offset is folded into the longitude/latitude
// mapping, so the image covers u in [-0.5, W - 0.5) and v in [-0.5, H - 0.5].
struct PixelCoord {
  double u = 0.0;  // column
  double v = 0.0;  // row
};

// Longitude/latitude equirectangular mapping. Throws DomainError for
// non-equirectangular dims or out-of-range pixels.
BearingVector PixelToBearing(const PixelCoord& p, const ImageDims& dims);
// Throws DomainError for a (near) zero vector. Input need not be normalized.
PixelCoord BearingToPixel(const Vec3& bearing, const ImageDims& dims);
// Integer pixel index (row-major) containing a bearing.
int BearingToPixelIndex(const Vec3& bearing, const ImageDims& dims);

// Rigid camera pose. Camera-frame coordinates of a world point X are
// R^T * X + T, so R rotates camera axes into the world and the camera center
// is -R * T.
class Pose {
 public:
  Pose() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  Pose(const Mat3& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {}

  static Pose Identity() { return Pose(); }
  // Pose whose camera sits at `center` with camera-to-world rotation R.
  static Pose FromCenter(const Mat3& rotation, const Vec3& center) {
    return Pose(rotation, -rotation.transpose() * center);
  }
  // Quaternion [w, x, y, z] of R.
  static Pose FromQuaternion(const Eigen::Quaterniond& q, const Vec3& translation) {
    return Pose(q.normalized().toRotationMatrix(), translation);
  }

  const Mat3& Rotation() const { return rotation_; }
  const Vec3& Translation() const { return translation_; }
  Vec3 Center() const { return -rotation_ * translation_; }
  // Sign-normalized so that w >= 0.
  Eigen::Quaterniond Quaternion() const;

  Vec3 WorldToCamera(const Vec3& world) const {
    return rotation_.transpose() * world + translation_;
  }
  Vec3 CameraToWorld(const Vec3& cam) const { return rotation_ * (cam - translation_); }

  // Composition of world-to-camera maps: (a * b)(X) = a(b(X)).
  Pose operator*(const Pose& other) const;

  // Frobenius deviation from orthonormality and determinant deviation from 1.
  bool IsValid(double tol = 1e-9) const;

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

inline Vec3 WorldToCamera(const Pose& pose, const Vec3& world) { return pose.WorldToCamera(world); }

struct PoseError {
  double distance = 0.0;   // meters between camera centers
  double angle_deg = 0.0;  // geodesic rotation angle
};

PoseError RelativePoseErrors(const Pose& a, const Pose& b);

// Rotation angle of R in degrees, clamped to [0, 180].
double RotationAngleDeg(const Mat3& rotation);

// Camera-to-world rotation of an upright camera (world y up) looking along
// heading `yaw` about the world vertical axis, then pitched by `pitch`.
Mat3 UprightCameraRotation(double yaw, double pitch = 0.0);

}  // namespace instloc
