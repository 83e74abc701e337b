#pragma once

// Canonical on-disk sequence layout:
//
//   rgb/000000.png ...      8-bit RGB (gray and RGBA are accepted on read)
//   depth/000000.png ...    16-bit gray, millimeters, 0 = invalid
//   depth/000000.pfm ...    single-channel PFM, meters, non-positive = invalid
//   groundtruth.txt         TUM trajectory
//   calib.txt               "fx fy cx cy width height"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mvslam/image.h"
#include "mvslam/trajectory.h"

namespace mvslam {

enum class DepthFormat { kPng16, kPfm };

// Throws DataError when the file cannot be read and FormatError for
// unsupported contents (bit depth, channel count, malformed header).
RgbImage load_rgb_png(const std::string& path);
void save_rgb_png(const RgbImage& image, const std::string& path);

DepthMap load_depth(const std::string& path, DepthFormat format);
// Infers the format from the extension (.png or .pfm).
DepthMap load_depth(const std::string& path);
// PNG stores round(depth * 1000) millimeters; depths beyond 65.535 m throw
// InvalidArgument. PFM is written little-endian with invalid pixels as 0.
void save_depth(const DepthMap& depth, const std::string& path, DepthFormat format);

CameraIntrinsics load_calibration(const std::string& path);
void save_calibration(const CameraIntrinsics& k, const std::string& path);

std::string frame_name(std::int64_t index);

struct DatasetInfo {
  std::string root;
  CameraIntrinsics intrinsics;
  std::size_t frame_count = 0;
  bool has_depth = false;
  DepthFormat depth_format = DepthFormat::kPng16;
  std::optional<Trajectory> groundtruth;
};

// Scans a dataset directory. Frames are rgb/%06d.png numbered from 0 without
// gaps. Throws ConfigError when the directory or calib.txt is missing or no
// frame exists, and DataError for depth/ground-truth counts that disagree
// with the frame count.
DatasetInfo inspect_dataset(const std::string& root);

RgbImage load_frame_rgb(const DatasetInfo& info, std::int64_t index);
DepthMap load_frame_depth(const DatasetInfo& info, std::int64_t index);

}  // namespace mvslam
