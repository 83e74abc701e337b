#include "mvslam/feature_pose.h"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/SVD>

#include "mvslam/errors.h"

namespace mvslam {

Vec3 back_project(double u, double v, double depth, const CameraIntrinsics& k) {
  if (!(depth > 0.0) || !std::isfinite(depth)) throw InvalidArgument("back_project: depth must be positive");
  return {(u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth};
}

Eigen::Vector2d project(const Vec3& p, const CameraIntrinsics& k) {
  if (!(p.z() > 0.0)) throw InvalidArgument("project: point behind the camera");
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

std::optional<Pose> kabsch(std::span<const Correspondence3D> corrs) {
  if (corrs.size() < 3) return std::nullopt;
  Vec3 mean_a = Vec3::Zero(), mean_b = Vec3::Zero();
  for (const auto& c : corrs) {
    mean_a += c.p_a;
    mean_b += c.p_b;
  }
  mean_a /= static_cast<double>(corrs.size());
  mean_b /= static_cast<double>(corrs.size());

  Mat3 h = Mat3::Zero();
  for (const auto& c : corrs) h += (c.p_b - mean_b) * (c.p_a - mean_a).transpose();

  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  // Rank < 2 means the points are collinear (or coincident).
  if (!(sv(0) > 0.0) || sv(1) < 1e-9 * sv(0)) return std::nullopt;

  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  if ((v * u.transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Mat3 r = v * d * u.transpose();
  return Pose{r, mean_a - r * mean_b, true};
}

namespace {

int mark_inliers(std::span<const Correspondence3D> corrs, const Pose& model, double threshold,
                 std::vector<bool>& mask) {
  mask.assign(corrs.size(), false);
  int count = 0;
  const double t2 = threshold * threshold;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const Vec3 r = model.rotation * corrs[i].p_b + model.translation - corrs[i].p_a;
    if (r.squaredNorm() < t2) {
      mask[i] = true;
      ++count;
    }
  }
  return count;
}

std::vector<Correspondence3D> select(std::span<const Correspondence3D> corrs,
                                     const std::vector<bool>& mask) {
  std::vector<Correspondence3D> out;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    if (mask[i]) out.push_back(corrs[i]);
  }
  return out;
}

bool degenerate_triplet(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a;
  return ab.cross(ac).norm() <= 1e-9 * ab.norm() * ac.norm() || ab.norm() == 0.0 || ac.norm() == 0.0;
}

}  // namespace

std::optional<RigidEstimate> estimate_rigid_transform(std::span<const Correspondence3D> corrs,
                                                      const RansacOptions& ransac) {
  if (corrs.size() < 3) return std::nullopt;
  const int n = static_cast<int>(corrs.size());

  std::mt19937_64 rng(ransac.seed);
  std::uniform_int_distribution<int> pick(0, n - 1);

  std::optional<Pose> best_model;
  int best_count = 0;
  std::vector<bool> mask;
  double required = ransac.max_iterations;
  for (int iter = 0; iter < ransac.max_iterations && iter < required; ++iter) {
    int i0 = pick(rng), i1 = pick(rng), i2 = pick(rng);
    if (i0 == i1 || i0 == i2 || i1 == i2) continue;
    if (degenerate_triplet(corrs[i0].p_b, corrs[i1].p_b, corrs[i2].p_b)) continue;
    const std::array<Correspondence3D, 3> sample{corrs[i0], corrs[i1], corrs[i2]};
    const std::optional<Pose> model = kabsch(sample);
    if (!model) continue;
    const int count = mark_inliers(corrs, *model, ransac.threshold, mask);
    if (count > best_count) {
      best_count = count;
      best_model = model;
      const double w = static_cast<double>(count) / n;
      const double p_fail = 1.0 - w * w * w;
      if (p_fail <= 0.0) {
        required = 0.0;
      } else {
        required = std::log(1.0 - ransac.confidence) / std::log(p_fail);
      }
    }
  }
  if (!best_model || best_count < 3) return std::nullopt;

  // Refit on the consensus set until it stops changing.
  std::vector<bool> inliers;
  int count = mark_inliers(corrs, *best_model, ransac.threshold, inliers);
  std::optional<Pose> model = best_model;
  for (int round = 0; round < 10; ++round) {
    const std::vector<Correspondence3D> subset = select(corrs, inliers);
    model = kabsch(subset);
    if (!model) return std::nullopt;
    std::vector<bool> next;
    const int next_count = mark_inliers(corrs, *model, ransac.threshold, next);
    if (next == inliers) break;
    if (next_count < 3) return std::nullopt;
    inliers = std::move(next);
    count = next_count;
  }
  return RigidEstimate{*model, std::move(inliers), count};
}

namespace {

// Bilinear depth when all four neighbours are valid, else the nearest valid pixel.
std::optional<double> sample_depth(const DepthMap& depth, double u, double v) {
  const int x0 = static_cast<int>(std::floor(u)), y0 = static_cast<int>(std::floor(v));
  if (depth.contains(x0, y0) && depth.contains(x0 + 1, y0 + 1) && depth.valid(x0, y0) &&
      depth.valid(x0 + 1, y0) && depth.valid(x0, y0 + 1) && depth.valid(x0 + 1, y0 + 1)) {
    const double fx = u - x0, fy = v - y0;
    return (1 - fx) * (1 - fy) * depth.depth(x0, y0) + fx * (1 - fy) * depth.depth(x0 + 1, y0) +
           (1 - fx) * fy * depth.depth(x0, y0 + 1) + fx * fy * depth.depth(x0 + 1, y0 + 1);
  }
  const int x = static_cast<int>(std::lround(u)), y = static_cast<int>(std::lround(v));
  if (depth.contains(x, y) && depth.valid(x, y)) return depth.depth(x, y);
  return std::nullopt;
}

}  // namespace

std::optional<FrameMotionEstimate> estimate_frame_motion(const GrayImage& image_a,
                                                         const DepthMap& depth_a,
                                                         const GrayImage& image_b,
                                                         const DepthMap& depth_b,
                                                         const CameraIntrinsics& k,
                                                         const FeaturePoseOptions& options) {
  const std::vector<Keypoint> kp_a = detect_features(image_a, options.max_features, options.features);
  const std::vector<Keypoint> kp_b = detect_features(image_b, options.max_features, options.features);
  const std::vector<FeatureMatch> matches = match_features(kp_a, kp_b, options.match_ratio);

  std::vector<Correspondence3D> corrs;
  corrs.reserve(matches.size());
  for (const FeatureMatch& m : matches) {
    const Keypoint& a = kp_a[m.index_a];
    const Keypoint& b = kp_b[m.index_b];
    const std::optional<double> da = sample_depth(depth_a, a.u, a.v);
    const std::optional<double> db = sample_depth(depth_b, b.u, b.v);
    if (!da || !db) continue;
    corrs.push_back({back_project(a.u, a.v, *da, k), back_project(b.u, b.v, *db, k)});
  }
  if (static_cast<int>(corrs.size()) < options.min_inliers) return std::nullopt;

  std::optional<RigidEstimate> rigid = estimate_rigid_transform(corrs, options.ransac);
  if (!rigid || rigid->inlier_count < options.min_inliers) return std::nullopt;
  return FrameMotionEstimate{std::move(*rigid), static_cast<int>(kp_a.size()),
                             static_cast<int>(kp_b.size()), static_cast<int>(matches.size())};
}

}  // namespace mvslam
