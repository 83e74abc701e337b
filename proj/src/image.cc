#include "mvslam/image.h"

#include <algorithm>
#include <cmath>

#include "mvslam/errors.h"

namespace mvslam {

GrayImage to_gray(const RgbImage& rgb) {
  GrayImage gray(rgb.width(), rgb.height());
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      if (rgb.channels() == 1) {
        gray.at(x, y) = rgb.at(x, y);
      } else {
        gray.at(x, y) = 0.299f * rgb.at(x, y, 0) + 0.587f * rgb.at(x, y, 1) + 0.114f * rgb.at(x, y, 2);
      }
    }
  }
  return gray;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidArgument("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InvalidArgument("image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw InvalidArgument("principal point outside the image");
  }
}

DepthMap::DepthMap(int width, int height)
    : width_(width),
      height_(height),
      values_(static_cast<std::size_t>(width) * height, 0.0),
      valid_(static_cast<std::size_t>(width) * height, 0) {}

void DepthMap::set(int x, int y, double depth) {
  const std::size_t i = index(x, y);
  if (std::isfinite(depth) && depth > 0.0) {
    values_[i] = depth;
    valid_[i] = 1;
  } else {
    values_[i] = 0.0;
    valid_[i] = 0;
  }
}

void DepthMap::invalidate(int x, int y) {
  values_[index(x, y)] = 0.0;
  valid_[index(x, y)] = 0;
}

std::size_t DepthMap::valid_count() const {
  return static_cast<std::size_t>(std::count(valid_.begin(), valid_.end(), std::uint8_t{1}));
}

}  // namespace mvslam
