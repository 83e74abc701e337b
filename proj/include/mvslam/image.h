#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mvslam {

// Dense row-major raster with interleaved channels.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, int channels = 1, T fill = T{})
      : width_(width),
        height_(height),
        channels_(channels),
        data_(static_cast<std::size_t>(width) * height * channels, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  bool operator==(const Raster&) const = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

// Single-channel intensity in [0, 255].
using GrayImage = Raster<float>;
// 8-bit RGB, three interleaved channels.
using RgbImage = Raster<std::uint8_t>;

GrayImage to_gray(const RgbImage& rgb);

// Pinhole intrinsics. Pixel (col, row) has image coordinates u = col, v = row.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  // Throws InvalidArgument unless fx, fy > 0 and the principal point lies in the image.
  void validate() const;
};

// Metric depth (z along the optical axis, meters) with a validity mask.
// Only finite, strictly positive values can be marked valid.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  // Marks the pixel valid iff `depth` is finite and > 0; otherwise invalid.
  void set(int x, int y, double depth);
  void invalidate(int x, int y);
  bool valid(int x, int y) const { return valid_[index(x, y)] != 0; }
  // Returns 0 for invalid pixels.
  double depth(int x, int y) const { return values_[index(x, y)]; }
  std::size_t valid_count() const;

  bool operator==(const DepthMap&) const = default;

 private:
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
  std::vector<std::uint8_t> valid_;
};

}  // namespace mvslam
