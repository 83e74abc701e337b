#pragma once

// Analytic synthetic scenes: a camera moving inside a textured primitive,
// rendered with exact z-depth, plus noisy "oracle" pose and depth estimates
// derived from the ground truth.

#include <cstdint>
#include <optional>
#include <vector>

#include "mvslam/geometry.h"
#include "mvslam/image.h"
#include "mvslam/trajectory.h"

namespace mvslam {

enum class PrimitiveType { kSphere, kBox, kPlane };

struct SceneGeometry {
  PrimitiveType type = PrimitiveType::kSphere;
  // Sphere interior.
  Vec3 center = Vec3::Zero();
  double radius = 0.06;
  // Axis-aligned box interior.
  Vec3 box_min = Vec3::Constant(-0.05);
  Vec3 box_max = Vec3::Constant(0.05);
  // Plane through plane_point; the camera must lie on the side plane_normal points to.
  Vec3 plane_point = Vec3(0.0, 0.0, 0.1);
  Vec3 plane_normal = Vec3(0.0, 0.0, -1.0);
};

struct TextureParams {
  // Edge length of the 3D checker cells, meters.
  double cell_size = 0.006;
  // Width of the smooth transition across checker edges, meters; 0 gives
  // hard edges. A band-limited edge keeps sub-pixel corner positions stable.
  double edge_width = 0.0004;
  // Lattice spacing of the multiplicative value noise, meters.
  double noise_scale = 0.002;
  // Value noise modulates albedo by a factor in [1 - amplitude, 1 + amplitude].
  double noise_amplitude = 0.35;
  // Samples per pixel along each axis for the color image.
  int supersample = 3;
};

enum class PathType { kArc, kHelix, kRandomWalk };

// kForward looks along the direction of travel; kTarget looks at `target`.
enum class ViewMode { kForward, kTarget };

struct PathParams {
  PathType type = PathType::kArc;
  ViewMode view = ViewMode::kForward;
  Vec3 target = Vec3::Zero();
  int frames = 120;
  double frame_rate = 30.0;
  // Arc and helix: circle of `radius` about `center` in the world x-z plane,
  // swept through `span` radians starting at angle 0.
  Vec3 center = Vec3::Zero();
  double radius = 0.015;
  double span = 3.14159265358979323846;
  // Helix rise along world y over the full span, meters.
  double rise = 0.01;
  // Random walk: constant step length and a per-step heading/roll change
  // bounded by max_turn_deg; the walk turns back toward `center` once it
  // leaves a ball of `radius`.
  double step = 0.0005;
  double max_turn_deg = 3.0;
};

struct SyntheticScene {
  SceneGeometry geometry;
  TextureParams texture;
  PathParams path;
  CameraIntrinsics intrinsics{260.0, 260.0, 159.5, 119.5, 320, 240};

  // Throws InvalidArgument for non-physical parameters.
  void validate() const;
};

struct SyntheticSequence {
  std::vector<RgbImage> rgb;
  std::vector<DepthMap> depth;
  Trajectory groundtruth;
  CameraIntrinsics intrinsics;
};

// Distance along `dir` (not necessarily unit) from `origin` to the visible
// surface, i.e. the smallest t > 0 with origin + t * dir on the primitive.
std::optional<double> intersect(const SceneGeometry& g, const Vec3& origin, const Vec3& dir);

// Signed distance of p to the primitive surface, positive on the camera side.
double signed_distance(const SceneGeometry& g, const Vec3& p);

// Camera path only (no rendering).
Trajectory generate_trajectory(const SyntheticScene& scene, std::uint64_t seed);

// Renders one frame. Depth is z along the optical axis; color is the
// value-noise checker texture under a headlight Lambertian shade.
void render_frame(const SyntheticScene& scene, const Pose& camera_to_world, std::uint64_t seed,
                  RgbImage* rgb, DepthMap* depth);

// Throws InvalidArgument when the scene is invalid, a camera center lies
// outside the primitive, or some pixel ray misses the surface.
SyntheticSequence generate_sequence(const SyntheticScene& scene, std::uint64_t seed);

struct PoseNoise {
  // Per-axis standard deviation of the rotation-vector perturbation.
  double rot_sigma_deg = 0.0;
  // Per-axis standard deviation of the translation direction perturbation,
  // expressed as tangent-plane angles.
  double dir_sigma_deg = 0.0;
};

struct DepthNoise {
  // Standard deviation of log(depth) perturbation.
  double mult_sigma = 0.0;
  // Probability that a valid pixel is dropped.
  double dropout_frac = 0.0;
};

// Relative motion from frame i to i + 1 (camera i+1 in camera i), rotation
// perturbed as exp(w) R with w ~ N(0, rot_sigma^2 I), translation reduced to
// a perturbed unit direction and flagged unscaled. A zero true translation
// yields a zero translation. Throws std::out_of_range unless i + 1 < size.
Pose oracle_pose(const Trajectory& gt, std::size_t i, const PoseNoise& noise, std::uint64_t seed);

// depth * exp(n), n ~ N(0, mult_sigma^2), then each valid pixel is dropped
// with probability dropout_frac.
DepthMap oracle_depth(const DepthMap& gt, const DepthNoise& noise, std::uint64_t seed);

}  // namespace mvslam
