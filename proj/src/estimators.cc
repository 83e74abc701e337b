#include "mvslam/estimators.h"

#include <filesystem>
#include <utility>

#include "mvslam/dataset.h"
#include "mvslam/errors.h"

namespace mvslam {

Pose to_unscaled(const Pose& relative) {
  Pose out = relative;
  out.scaled = false;
  const double n = relative.translation.norm();
  out.translation = n > 0.0 ? Vec3(relative.translation / n) : Vec3::Zero();
  return out;
}

OraclePoseEstimator::OraclePoseEstimator(Trajectory groundtruth, PoseNoise noise, std::uint64_t seed)
    : groundtruth_(std::move(groundtruth)), noise_(noise), seed_(seed) {}

Pose OraclePoseEstimator::relative_motion(const FrameView& previous, const FrameView& current) {
  const auto i = groundtruth_.find(previous.index);
  if (!i || *i + 1 >= groundtruth_.size() || groundtruth_[*i + 1].frame_id != current.index) {
    throw DataError("no ground-truth motion from frame " + std::to_string(previous.index) + " to " +
                    std::to_string(current.index));
  }
  return oracle_pose(groundtruth_, *i, noise_, seed_);
}

OracleDepthEstimator::OracleDepthEstimator(std::vector<DepthMap> groundtruth, DepthNoise noise,
                                           std::uint64_t seed)
    : groundtruth_(std::move(groundtruth)), noise_(noise), seed_(seed) {}

DepthMap OracleDepthEstimator::estimate(const FrameView& frame) {
  if (frame.index < 0 || static_cast<std::size_t>(frame.index) >= groundtruth_.size()) {
    throw DataError("no ground-truth depth for frame " + std::to_string(frame.index));
  }
  const std::uint64_t frame_seed = (seed_ * 0x9e3779b97f4a7c15ULL) ^ static_cast<std::uint64_t>(frame.index);
  return oracle_depth(groundtruth_[frame.index], noise_, frame_seed);
}

ImportedPoseEstimator::ImportedPoseEstimator(Trajectory poses) : poses_(std::move(poses)) {}

Pose ImportedPoseEstimator::relative_motion(const FrameView& previous, const FrameView& current) {
  const auto i = poses_.find(previous.index);
  const auto j = poses_.find(current.index);
  if (!i || !j) {
    throw DataError("imported trajectory lacks frame " +
                    std::to_string(i ? current.index : previous.index));
  }
  return to_unscaled(compose(inverse(poses_[*i].pose), poses_[*j].pose));
}

ImportedDepthEstimator::ImportedDepthEstimator(std::string directory) : directory_(std::move(directory)) {}

DepthMap ImportedDepthEstimator::estimate(const FrameView& frame) {
  const std::filesystem::path base = std::filesystem::path(directory_) / frame_name(frame.index);
  const std::filesystem::path pfm = base.string() + ".pfm";
  if (std::filesystem::exists(pfm)) return load_depth(pfm.string(), DepthFormat::kPfm);
  return load_depth(base.string() + ".png", DepthFormat::kPng16);
}

}  // namespace mvslam
