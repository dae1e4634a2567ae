#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "instloc/geometry.hpp"
#include "instloc/labels.hpp"

namespace instloc {

// Per-pixel 3D coordinates, row-major. NaN marks pixels without a value, so
// the validity mask is implied by the data.
struct SceneCoordinateImage {
  ImageDims dims;
  std::vector<Vec3> coords;

  SceneCoordinateImage() = default;
  explicit SceneCoordinateImage(const ImageDims& d)
      : dims(d), coords(d.PixelCount(), Vec3::Constant(std::numeric_limits<double>::quiet_NaN())) {}

  bool IsValid(int i) const { return coords[i].allFinite(); }
  void Invalidate(int i) { coords[i].setConstant(std::numeric_limits<double>::quiet_NaN()); }
  int ValidCount() const {
    int n = 0;
    for (int i = 0; i < static_cast<int>(coords.size()); ++i) n += IsValid(i);
    return n;
  }
};

struct LabelImage {
  ImageDims dims;
  std::vector<Label> labels;

  LabelImage() = default;
  explicit LabelImage(const ImageDims& d) : dims(d), labels(d.PixelCount(), kVoidLabel) {}
};

// Bearing of every pixel center, row-major.
std::vector<BearingVector> PixelBearings(const ImageDims& dims);

}  // namespace instloc
