#pragma once

// Pluggable frame-to-frame pose and per-frame depth estimators.
//
// A pose estimator sees two consecutive frames and returns the motion of the
// current camera expressed in the previous camera frame, with a unit-norm
// (or zero) translation and the scaled flag cleared: monocular estimates
// carry direction only. A depth estimator returns a metric depth map.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mvslam/geometry.h"
#include "mvslam/image.h"
#include "mvslam/synth.h"
#include "mvslam/trajectory.h"

namespace mvslam {

struct FrameView {
  std::int64_t index = 0;
  const RgbImage* rgb = nullptr;
};

class PoseEstimator {
 public:
  virtual ~PoseEstimator() = default;
  virtual Pose relative_motion(const FrameView& previous, const FrameView& current) = 0;
};

class DepthEstimator {
 public:
  virtual ~DepthEstimator() = default;
  virtual DepthMap estimate(const FrameView& frame) = 0;
};

// Forces the estimator contract onto an arbitrary relative motion:
// translation rescaled to unit norm, scaled flag cleared.
Pose to_unscaled(const Pose& relative);

// Ground-truth relative motions perturbed per oracle_pose. Frame indices
// address entries of `groundtruth`, which must be consecutive.
class OraclePoseEstimator : public PoseEstimator {
 public:
  OraclePoseEstimator(Trajectory groundtruth, PoseNoise noise, std::uint64_t seed);
  Pose relative_motion(const FrameView& previous, const FrameView& current) override;

 private:
  Trajectory groundtruth_;
  PoseNoise noise_;
  std::uint64_t seed_;
};

// Ground-truth depth perturbed per oracle_depth; each frame uses its own
// derived seed so results do not depend on call order.
class OracleDepthEstimator : public DepthEstimator {
 public:
  OracleDepthEstimator(std::vector<DepthMap> groundtruth, DepthNoise noise, std::uint64_t seed);
  DepthMap estimate(const FrameView& frame) override;

 private:
  std::vector<DepthMap> groundtruth_;
  DepthNoise noise_;
  std::uint64_t seed_;
};

// Relative motions read from an externally produced trajectory (any scale).
class ImportedPoseEstimator : public PoseEstimator {
 public:
  explicit ImportedPoseEstimator(Trajectory poses);
  Pose relative_motion(const FrameView& previous, const FrameView& current) override;

 private:
  Trajectory poses_;
};

// Depth maps loaded on demand from a directory of %06d.png / %06d.pfm files.
class ImportedDepthEstimator : public DepthEstimator {
 public:
  explicit ImportedDepthEstimator(std::string directory);
  DepthMap estimate(const FrameView& frame) override;

 private:
  std::string directory_;
};

}  // namespace mvslam
