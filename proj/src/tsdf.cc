#include "mvslam/tsdf.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "mvslam/binary_io.h"
#include "mvslam/errors.h"

namespace mvslam {

TsdfVolume::TsdfVolume(const Vec3& origin, double voxel_size, std::array<int, 3> dims,
                       double truncation, float max_weight, bool with_color)
    : origin_(origin),
      voxel_size_(voxel_size),
      dims_(dims),
      truncation_(truncation),
      max_weight_(max_weight) {
  if (!(voxel_size > 0.0) || !origin.allFinite()) throw InvalidArgument("invalid voxel size or origin");
  for (int d : dims) {
    if (d < 1 || d > kMaxVolumeDim) throw InvalidArgument("volume dimension outside [1, 512]");
  }
  if (!(truncation >= 2.0 * voxel_size)) throw InvalidArgument("truncation must be >= 2 voxel sizes");
  if (!(max_weight > 0.0f)) throw InvalidArgument("max weight must be positive");
  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  tsdf_.assign(n, 0.0f);
  weight_.assign(n, 0.0f);
  if (with_color) color_.assign(3 * n, 0);
}

Vec3 TsdfVolume::voxel_center(int i, int j, int k) const {
  return origin_ + voxel_size_ * Vec3(i + 0.5, j + 0.5, k + 0.5);
}

Rgb8 TsdfVolume::color(int i, int j, int k) const {
  if (color_.empty()) return {0, 0, 0};
  const std::size_t c = 3 * index(i, j, k);
  return {color_[c], color_[c + 1], color_[c + 2]};
}

void TsdfVolume::set_voxel(int i, int j, int k, float tsdf, float weight) {
  const std::size_t n = index(i, j, k);
  tsdf_[n] = std::clamp(tsdf, -1.0f, 1.0f);
  weight_[n] = std::clamp(weight, 0.0f, max_weight_);
}

IntegrationStats TsdfVolume::integrate(const DepthMap& depth, const Pose& camera_to_world,
                                       const CameraIntrinsics& k, const RgbImage* color) {
  if (!camera_to_world.scaled) {
    throw InvalidArgument("refusing to integrate with an unscaled pose");
  }
  if (depth.width() != k.width || depth.height() != k.height) {
    throw InvalidArgument("depth map size does not match intrinsics");
  }
  const bool use_color = has_color() && color != nullptr && color->width() == k.width &&
                         color->height() == k.height && color->channels() == 3;
  IntegrationStats stats;

  const Vec3 upper = origin_ + voxel_size_ * Vec3(dims_[0], dims_[1], dims_[2]);
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      if (!depth.valid(x, y)) continue;
      const double d = depth.depth(x, y);
      const Vec3 pc((x - k.cx) * d / k.fx, (y - k.cy) * d / k.fy, d);
      const Vec3 pw = camera_to_world.rotation * pc + camera_to_world.translation;
      if ((pw.array() < origin_.array()).any() || (pw.array() >= upper.array()).any()) {
        ++stats.clipped_pixels;
      }
    }
  }

  const Mat3 rt = camera_to_world.rotation.transpose();
  const Vec3 cam_origin = -(rt * camera_to_world.translation);
  const Vec3 step_i = rt.col(0) * voxel_size_;
  const Vec3 step_j = rt.col(1) * voxel_size_;
  const Vec3 step_k = rt.col(2) * voxel_size_;
  const Vec3 base = rt * (origin_ + 0.5 * voxel_size_ * Vec3::Ones()) + cam_origin;
  const double inv_trunc = 1.0 / truncation_;

  for (int kz = 0; kz < dims_[2]; ++kz) {
    for (int jy = 0; jy < dims_[1]; ++jy) {
      Vec3 pc = base + kz * step_k + jy * step_j;
      for (int ix = 0; ix < dims_[0]; ++ix, pc += step_i) {
        if (pc.z() <= 0.0) continue;
        const double u = k.fx * pc.x() / pc.z() + k.cx;
        const double v = k.fy * pc.y() / pc.z() + k.cy;
        const long px = std::lround(u), py = std::lround(v);
        if (px < 0 || py < 0 || px >= depth.width() || py >= depth.height()) continue;
        const int x = static_cast<int>(px), y = static_cast<int>(py);
        if (!depth.valid(x, y)) continue;
        const double sdf = depth.depth(x, y) - pc.z();
        if (sdf < -truncation_) continue;
        const float observed = static_cast<float>(std::min(sdf, truncation_) * inv_trunc);

        const std::size_t n = index(ix, jy, kz);
        const double w_old = weight_[n];
        const double w_new = w_old + 1.0;
        tsdf_[n] = static_cast<float>((w_old * tsdf_[n] + observed) / w_new);
        weight_[n] = static_cast<float>(std::min<double>(w_new, max_weight_));
        if (use_color) {
          for (int c = 0; c < 3; ++c) {
            const double blended = (w_old * color_[3 * n + c] + color->at(x, y, c)) / w_new;
            color_[3 * n + c] = static_cast<std::uint8_t>(std::lround(std::clamp(blended, 0.0, 255.0)));
          }
        }
        ++stats.updated_voxels;
      }
    }
  }
  return stats;
}

std::optional<SdfSample> TsdfVolume::query_sdf(const Vec3& p) const {
  const Vec3 g = (p - origin_) / voxel_size_ - 0.5 * Vec3::Ones();
  std::array<int, 3> base{};
  std::array<double, 3> frac{};
  for (int a = 0; a < 3; ++a) {
    // Points on the outermost centers may land a rounding error outside.
    constexpr double kSlack = 1e-9;
    if (!(g[a] >= -kSlack) || g[a] > dims_[a] - 1 + kSlack) return std::nullopt;
    const double c = std::clamp(g[a], 0.0, static_cast<double>(dims_[a] - 1));
    base[a] = std::min(static_cast<int>(std::floor(c)), std::max(dims_[a] - 2, 0));
    frac[a] = c - base[a];
  }
  SdfSample out{0.0, std::numeric_limits<double>::infinity()};
  for (int c = 0; c < 8; ++c) {
    const std::array<int, 3> off{c & 1, (c >> 1) & 1, (c >> 2) & 1};
    double w = 1.0;
    std::array<int, 3> idx{};
    for (int a = 0; a < 3; ++a) {
      w *= off[a] ? frac[a] : 1.0 - frac[a];
      idx[a] = std::min(base[a] + off[a], dims_[a] - 1);
    }
    const std::size_t n = index(idx[0], idx[1], idx[2]);
    out.tsdf += w * tsdf_[n];
    out.weight = std::min<double>(out.weight, weight_[n]);
  }
  return out;
}

PointCloud TsdfVolume::extract_surface(float min_weight) const {
  PointCloud cloud;
  const float threshold = std::max(min_weight, std::numeric_limits<float>::min());
  for (int kz = 0; kz < dims_[2]; ++kz) {
    for (int jy = 0; jy < dims_[1]; ++jy) {
      for (int ix = 0; ix < dims_[0]; ++ix) {
        const std::size_t n = index(ix, jy, kz);
        if (weight_[n] < threshold) continue;
        const float a = tsdf_[n];
        const std::array<std::array<int, 3>, 3> neighbours{{{ix + 1, jy, kz}, {ix, jy + 1, kz}, {ix, jy, kz + 1}}};
        for (const auto& nb : neighbours) {
          if (nb[0] >= dims_[0] || nb[1] >= dims_[1] || nb[2] >= dims_[2]) continue;
          const std::size_t m = index(nb[0], nb[1], nb[2]);
          if (weight_[m] < threshold) continue;
          const float b = tsdf_[m];
          if ((a >= 0.0f) == (b >= 0.0f)) continue;
          const double t = static_cast<double>(a) / (static_cast<double>(a) - b);
          const Vec3 pa = voxel_center(ix, jy, kz);
          const Vec3 pb = voxel_center(nb[0], nb[1], nb[2]);
          cloud.points.push_back(pa + t * (pb - pa));
          if (has_color()) {
            Rgb8 rgb{};
            for (int c = 0; c < 3; ++c) {
              rgb[c] = static_cast<std::uint8_t>(
                  std::lround((1.0 - t) * color_[3 * n + c] + t * color_[3 * m + c]));
            }
            cloud.colors.push_back(rgb);
          }
        }
      }
    }
  }
  return cloud;
}

namespace {
constexpr char kTsdfMagic[5] = {'T', 'S', 'D', 'F', '1'};
}

void TsdfVolume::save(std::ostream& out) const {
  out.write(kTsdfMagic, sizeof(kTsdfMagic));
  write_le<std::uint8_t>(out, has_color() ? 1 : 0);
  for (int d : dims_) write_le<std::int32_t>(out, d);
  for (int a = 0; a < 3; ++a) write_le<double>(out, origin_[a]);
  write_le<double>(out, voxel_size_);
  write_le<double>(out, truncation_);
  write_le<float>(out, max_weight_);
  for (float v : tsdf_) write_le<float>(out, v);
  for (float v : weight_) write_le<float>(out, v);
  out.write(reinterpret_cast<const char*>(color_.data()), static_cast<std::streamsize>(color_.size()));
  if (!out) throw DataError("failed writing TSDF volume");
}

void TsdfVolume::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  save(out);
}

TsdfVolume TsdfVolume::load(std::istream& in) {
  char magic[5];
  if (!in.read(magic, 5) || std::memcmp(magic, kTsdfMagic, 5) != 0) {
    throw FormatError("not a TSDF1 volume");
  }
  const auto flags = read_le<std::uint8_t>(in);
  std::array<int, 3> dims{};
  for (int& d : dims) d = read_le<std::int32_t>(in);
  Vec3 origin;
  for (int a = 0; a < 3; ++a) origin[a] = read_le<double>(in);
  const double voxel = read_le<double>(in);
  const double trunc = read_le<double>(in);
  const float w_max = read_le<float>(in);
  TsdfVolume v = [&] {
    try {
      return TsdfVolume(origin, voxel, dims, trunc, w_max, (flags & 1) != 0);
    } catch (const InvalidArgument& e) {
      throw FormatError(std::string("corrupt TSDF1 header: ") + e.what());
    }
  }();
  for (float& x : v.tsdf_) x = read_le<float>(in);
  for (float& x : v.weight_) x = read_le<float>(in);
  if (!v.color_.empty() &&
      !in.read(reinterpret_cast<char*>(v.color_.data()), static_cast<std::streamsize>(v.color_.size()))) {
    throw FormatError("truncated TSDF1 color block");
  }
  return v;
}

TsdfVolume TsdfVolume::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return load(in);
}

}  // namespace mvslam
