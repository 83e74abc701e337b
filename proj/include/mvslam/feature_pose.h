#pragma once

// Metric relative motion from two pseudo-RGBD frames: features are matched,
// lifted to 3D with the depth maps, and a rigid transform is fitted with
// RANSAC over 3-point Kabsch solutions.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mvslam/features.h"
#include "mvslam/geometry.h"
#include "mvslam/image.h"

namespace mvslam {

// Throws InvalidArgument for depth <= 0 or non-finite depth.
Vec3 back_project(double u, double v, double depth, const CameraIntrinsics& k);
// (u, v, z) of a camera-frame point; z must be positive.
Eigen::Vector2d project(const Vec3& p, const CameraIntrinsics& k);

// The same scene point seen from camera a and from camera b, in each camera's frame.
struct Correspondence3D {
  Vec3 p_a;
  Vec3 p_b;
};

struct RansacOptions {
  // Inlier distance in meters.
  double threshold = 0.005;
  int max_iterations = 1000;
  double confidence = 0.99;
  std::uint64_t seed = 42;
};

struct RigidEstimate {
  // Pose of camera b in camera a: p_a = R * p_b + t. Always flagged scaled.
  Pose motion;
  std::vector<bool> inliers;
  int inlier_count = 0;
};

// Least-squares rotation and translation with p_a ~ R * p_b + t over the
// given correspondences. Returns nullopt for fewer than 3 points or a
// collinear configuration. The reflection case is corrected so det(R) = +1.
std::optional<Pose> kabsch(std::span<const Correspondence3D> corrs);

// RANSAC over minimal 3-point samples, then a Kabsch refit on the inlier set.
// nullopt signals estimation failure (too few or degenerate inliers).
std::optional<RigidEstimate> estimate_rigid_transform(std::span<const Correspondence3D> corrs,
                                                      const RansacOptions& ransac);

struct FeaturePoseOptions {
  FeatureOptions features;
  int max_features = 1000;
  double match_ratio = 0.8;
  RansacOptions ransac;
  int min_inliers = 12;
};

struct FrameMotionEstimate {
  RigidEstimate rigid;
  int keypoints_a = 0;
  int keypoints_b = 0;
  int matches = 0;
};

// Motion of frame b relative to frame a from two pseudo-RGBD frames.
// nullopt when too few matches or inliers survive.
std::optional<FrameMotionEstimate> estimate_frame_motion(const GrayImage& image_a,
                                                         const DepthMap& depth_a,
                                                         const GrayImage& image_b,
                                                         const DepthMap& depth_b,
                                                         const CameraIntrinsics& k,
                                                         const FeaturePoseOptions& options);

}  // namespace mvslam
