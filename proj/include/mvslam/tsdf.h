#pragma once

// Dense truncated signed distance volume fused by per-voxel running averages
// (projective voxel traversal), with trilinear queries and zero-crossing
// surface readout.
//
// Voxel (i, j, k) has its center at origin + (i + 0.5, j + 0.5, k + 0.5) * voxel_size.
// Stored distances are normalized by the truncation distance and lie in
// [-1, 1]; positive values are in front of the surface (camera side).

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mvslam/geometry.h"
#include "mvslam/image.h"

namespace mvslam {

using Rgb8 = std::array<std::uint8_t, 3>;

struct PointCloud {
  std::vector<Vec3> points;
  // Empty, or one color per point.
  std::vector<Rgb8> colors;
};

struct IntegrationStats {
  std::size_t updated_voxels = 0;
  // Valid depth pixels whose surface point falls outside the volume.
  std::size_t clipped_pixels = 0;
};

struct SdfSample {
  double tsdf = 0.0;
  double weight = 0.0;
};

inline constexpr int kMaxVolumeDim = 512;

class TsdfVolume {
 public:
  // Throws InvalidArgument for non-positive voxel size, any dimension outside
  // [1, 512], truncation < 2 * voxel_size, or max_weight <= 0.
  TsdfVolume(const Vec3& origin, double voxel_size, std::array<int, 3> dims, double truncation,
             float max_weight = 64.0f, bool with_color = false);

  const Vec3& origin() const { return origin_; }
  double voxel_size() const { return voxel_size_; }
  const std::array<int, 3>& dims() const { return dims_; }
  double truncation() const { return truncation_; }
  float max_weight() const { return max_weight_; }
  bool has_color() const { return !color_.empty(); }
  std::size_t voxel_count() const { return tsdf_.size(); }

  Vec3 voxel_center(int i, int j, int k) const;
  float tsdf(int i, int j, int k) const { return tsdf_[index(i, j, k)]; }
  float weight(int i, int j, int k) const { return weight_[index(i, j, k)]; }
  Rgb8 color(int i, int j, int k) const;
  // Direct write, for analytic fields. tsdf is clamped to [-1, 1], weight to [0, max_weight].
  void set_voxel(int i, int j, int k, float tsdf, float weight);

  // Fuses one depth map taken from `camera_to_world`. Each voxel that projects
  // onto a valid pixel with d = depth - z_cam >= -truncation is averaged with
  // weight 1: D <- (W D + d) / (W + 1), W <- min(W + 1, max_weight).
  // Voxels more than one truncation behind the surface are left untouched.
  // Throws InvalidArgument if the pose is not flagged scaled.
  IntegrationStats integrate(const DepthMap& depth, const Pose& camera_to_world,
                             const CameraIntrinsics& k, const RgbImage* color = nullptr);

  // Trilinear interpolation between voxel centers; the weight is the minimum
  // of the 8 corners. nullopt outside the span of voxel centers.
  std::optional<SdfSample> query_sdf(const Vec3& p) const;

  // One point per voxel-grid edge whose endpoints both have weight >= max(min_weight, >0)
  // and opposite signs, placed by linear interpolation of the stored values.
  PointCloud extract_surface(float min_weight = 1.0f) const;

  // "TSDF1" binary format; see README.
  void save(std::ostream& out) const;
  void save(const std::string& path) const;
  static TsdfVolume load(std::istream& in);
  static TsdfVolume load(const std::string& path);

  bool operator==(const TsdfVolume&) const = default;

 private:
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims_[1] + j) * dims_[0] + i;
  }

  Vec3 origin_;
  double voxel_size_;
  std::array<int, 3> dims_;
  double truncation_;
  float max_weight_;
  std::vector<float> tsdf_;
  std::vector<float> weight_;
  std::vector<std::uint8_t> color_;
};

// Binary little-endian PLY: float x, y, z and, when colors are present,
// uchar red, green, blue per vertex.
void write_ply(const PointCloud& cloud, std::ostream& out);
void write_ply(const PointCloud& cloud, const std::string& path);
PointCloud read_ply(std::istream& in);
PointCloud read_ply(const std::string& path);

}  // namespace mvslam
