#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "mvslam/errors.h"
#include "mvslam/synth.h"
#include "mvslam/tsdf.h"
#include "test_util.h"

namespace mvslam {
namespace {

CameraIntrinsics intrinsics() { return {260.0, 260.0, 159.5, 119.5, 320, 240}; }

DepthMap constant_depth(const CameraIntrinsics& k, double z) {
  DepthMap d(k.width, k.height);
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) d.set(x, y, z);
  }
  return d;
}

DepthMap render_depth(const SyntheticScene& scene, const Pose& pose) {
  DepthMap depth;
  render_frame(scene, pose, 1, nullptr, &depth);
  return depth;
}

// Camera at `eye` looking at `target`, y roughly down.
Pose look_at(const Vec3& eye, const Vec3& target) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = Vec3(0, 1, 0).cross(z);
  if (x.norm() < 1e-6) x = Vec3(1, 0, 0).cross(z);
  x.normalize();
  Pose p;
  p.rotation.col(0) = x;
  p.rotation.col(1) = z.cross(x);
  p.rotation.col(2) = z;
  p.translation = eye;
  return p;
}

TsdfVolume box_volume() { return TsdfVolume(Vec3::Constant(-0.056), 0.004, {28, 28, 28}, 0.016); }

SyntheticScene box_scene() {
  SyntheticScene scene;
  scene.geometry.type = PrimitiveType::kBox;
  return scene;
}

TEST(TsdfVolume, ConstructorValidation) {
  const Vec3 o = Vec3::Zero();
  EXPECT_THROW(TsdfVolume(o, 0.0, {4, 4, 4}, 0.1), InvalidArgument);
  EXPECT_THROW(TsdfVolume(o, 0.01, {0, 4, 4}, 0.1), InvalidArgument);
  EXPECT_THROW(TsdfVolume(o, 0.01, {4, 513, 4}, 0.1), InvalidArgument);
  EXPECT_THROW(TsdfVolume(o, 0.01, {4, 4, 4}, 0.019), InvalidArgument);
  EXPECT_THROW(TsdfVolume(o, 0.01, {4, 4, 4}, 0.02, 0.0f), InvalidArgument);
  const TsdfVolume v(o, 0.01, {4, 5, 6}, 0.02);
  EXPECT_EQ(v.voxel_count(), 120u);
  EXPECT_EQ(v.weight(3, 4, 5), 0.0f);
  EXPECT_LT((v.voxel_center(0, 0, 0) - Vec3(0.005, 0.005, 0.005)).norm(), 1e-15);
}

TEST(TsdfVolume, SetVoxelClamps) {
  TsdfVolume v(Vec3::Zero(), 0.01, {2, 2, 2}, 0.02, 4.0f);
  v.set_voxel(1, 1, 1, 3.0f, 10.0f);
  EXPECT_EQ(v.tsdf(1, 1, 1), 1.0f);
  EXPECT_EQ(v.weight(1, 1, 1), 4.0f);
  v.set_voxel(0, 0, 0, -2.0f, -1.0f);
  EXPECT_EQ(v.tsdf(0, 0, 0), -1.0f);
  EXPECT_EQ(v.weight(0, 0, 0), 0.0f);
}

TEST(Integrate, RejectsUnscaledPose) {
  TsdfVolume v(Vec3::Constant(-0.05), 0.004, {25, 25, 25}, 0.016);
  Pose p;
  p.scaled = false;
  EXPECT_THROW(v.integrate(constant_depth(intrinsics(), 0.5), p, intrinsics()), InvalidArgument);
}

TEST(Integrate, FrontoParallelPlaneZeroCrossing) {
  const CameraIntrinsics k = intrinsics();
  const double voxel = 0.004, z0 = 0.5;
  // Offset the grid so the plane does not sit on voxel centers.
  TsdfVolume v(Vec3(-0.05, -0.05, 0.4513), voxel, {25, 25, 25}, 4 * voxel);
  const auto stats = v.integrate(constant_depth(k, z0), Pose{}, k);
  EXPECT_GT(stats.updated_voxels, 0u);
  // Walk every voxel column along z and find the sign change.
  int columns = 0;
  for (int j = 0; j < 25; ++j) {
    for (int i = 0; i < 25; ++i) {
      for (int kz = 0; kz + 1 < 25; ++kz) {
        if (v.weight(i, j, kz) <= 0 || v.weight(i, j, kz + 1) <= 0) continue;
        const float a = v.tsdf(i, j, kz), b = v.tsdf(i, j, kz + 1);
        if ((a >= 0) == (b >= 0)) continue;
        const double za = v.voxel_center(i, j, kz).z(), zb = v.voxel_center(i, j, kz + 1).z();
        const double zc = za + a / (a - b) * (zb - za);
        EXPECT_NEAR(zc, z0, voxel / 2);
        ++columns;
      }
    }
  }
  EXPECT_EQ(columns, 25 * 25);
  const PointCloud cloud = v.extract_surface();
  ASSERT_FALSE(cloud.points.empty());
  for (const Vec3& p : cloud.points) EXPECT_NEAR(p.z(), z0, voxel / 2);
}

TEST(Integrate, SameMapTwiceIsIdempotent) {
  const SyntheticScene scene;
  const Trajectory gt = generate_trajectory(scene, 3);
  const DepthMap depth = render_depth(scene, gt[0].pose);
  TsdfVolume once(Vec3::Constant(-0.064), 0.004, {32, 32, 32}, 0.016, 64.0f);
  once.integrate(depth, gt[0].pose, scene.intrinsics);
  TsdfVolume twice = once;
  twice.integrate(depth, gt[0].pose, scene.intrinsics);
  int observed = 0;
  for (int kz = 0; kz < 32; ++kz) {
    for (int j = 0; j < 32; ++j) {
      for (int i = 0; i < 32; ++i) {
        EXPECT_EQ(twice.tsdf(i, j, kz), once.tsdf(i, j, kz));
        EXPECT_EQ(twice.weight(i, j, kz), 2.0f * once.weight(i, j, kz));
        observed += once.weight(i, j, kz) > 0 ? 1 : 0;
      }
    }
  }
  EXPECT_GT(observed, 1000);
}

TEST(Integrate, WeightCapped) {
  const CameraIntrinsics k = intrinsics();
  TsdfVolume v(Vec3(-0.05, -0.05, 0.45), 0.004, {25, 25, 25}, 0.016, 2.5f);
  const DepthMap d = constant_depth(k, 0.5);
  for (int n = 0; n < 5; ++n) v.integrate(d, Pose{}, k);
  EXPECT_EQ(v.weight(12, 12, 12), 2.5f);
}

TEST(Integrate, OrderInvariantAtEqualWeights) {
  const SyntheticScene scene;
  const Trajectory gt = generate_trajectory(scene, 4);
  const DepthMap a = render_depth(scene, gt[0].pose), b = render_depth(scene, gt[60].pose);
  TsdfVolume ab(Vec3::Constant(-0.064), 0.004, {32, 32, 32}, 0.016);
  TsdfVolume ba = ab;
  ab.integrate(a, gt[0].pose, scene.intrinsics);
  ab.integrate(b, gt[60].pose, scene.intrinsics);
  ba.integrate(b, gt[60].pose, scene.intrinsics);
  ba.integrate(a, gt[0].pose, scene.intrinsics);
  for (int kz = 0; kz < 32; ++kz) {
    for (int j = 0; j < 32; ++j) {
      for (int i = 0; i < 32; ++i) {
        EXPECT_NEAR(ab.tsdf(i, j, kz), ba.tsdf(i, j, kz), 1e-6);
        EXPECT_EQ(ab.weight(i, j, kz), ba.weight(i, j, kz));
      }
    }
  }
}

TEST(Integrate, ValuesStayBounded) {
  const SyntheticScene scene;
  const Trajectory gt = generate_trajectory(scene, 5);
  TsdfVolume v(Vec3::Constant(-0.064), 0.004, {32, 32, 32}, 0.016, 8.0f);
  for (std::size_t f = 0; f < gt.size(); f += 10) {
    v.integrate(oracle_depth(render_depth(scene, gt[f].pose), DepthNoise{0.05, 0.2}, f), gt[f].pose,
                scene.intrinsics);
  }
  for (int kz = 0; kz < 32; ++kz) {
    for (int j = 0; j < 32; ++j) {
      for (int i = 0; i < 32; ++i) {
        EXPECT_LE(std::abs(v.tsdf(i, j, kz)), 1.0f);
        EXPECT_GE(v.weight(i, j, kz), 0.0f);
        EXPECT_LE(v.weight(i, j, kz), 8.0f);
      }
    }
  }
}

TEST(Integrate, CountsClippedPixels) {
  const CameraIntrinsics k = intrinsics();
  // The volume only covers the middle of the view at z = 0.5.
  TsdfVolume v(Vec3(-0.02, -0.02, 0.48), 0.004, {10, 10, 10}, 0.016);
  const auto stats = v.integrate(constant_depth(k, 0.5), Pose{}, k);
  EXPECT_GT(stats.clipped_pixels, 0u);
  EXPECT_LT(stats.clipped_pixels, static_cast<std::size_t>(k.width * k.height));
  TsdfVolume all(Vec3(-0.5, -0.5, 0.4), 0.01, {100, 100, 20}, 0.04);
  EXPECT_EQ(all.integrate(constant_depth(k, 0.5), Pose{}, k).clipped_pixels, 0u);
}

TEST(Integrate, BoxWallsFromTwoViews) {
  const SyntheticScene scene = box_scene();
  TsdfVolume v = box_volume();
  const Pose p1 = look_at(Vec3(0, 0, -0.02), Vec3(0, 0, 1));
  const Pose p2 = look_at(Vec3(-0.02, 0, 0), Vec3(1, 0, 0));
  v.integrate(render_depth(scene, p1), p1, scene.intrinsics);
  v.integrate(render_depth(scene, p2), p2, scene.intrinsics);
  const PointCloud cloud = v.extract_surface();
  ASSERT_GT(cloud.points.size(), 500u);
  std::size_t near = 0;
  for (const Vec3& p : cloud.points) near += std::abs(signed_distance(scene.geometry, p)) <= v.voxel_size() ? 1 : 0;
  EXPECT_GE(static_cast<double>(near), 0.99 * cloud.points.size());
}

TEST(QuerySdf, VoxelCenterIsExact) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  TsdfVolume v(Vec3(0.1, -0.2, 0.3), 0.01, {6, 7, 8}, 0.03);
  for (int kz = 0; kz < 8; ++kz) {
    for (int j = 0; j < 7; ++j) {
      for (int i = 0; i < 6; ++i) v.set_voxel(i, j, kz, u(rng), 1.0f + (i + j + kz) % 3);
    }
  }
  for (int kz = 0; kz < 8; ++kz) {
    for (int j = 0; j < 7; ++j) {
      for (int i = 0; i < 6; ++i) {
        const auto s = v.query_sdf(v.voxel_center(i, j, kz));
        ASSERT_TRUE(s);
        EXPECT_NEAR(s->tsdf, v.tsdf(i, j, kz), 1e-12);
      }
    }
  }
}

TEST(QuerySdf, MidpointOfOppositeValuesIsZero) {
  TsdfVolume v(Vec3::Zero(), 0.01, {2, 1, 1}, 0.02);
  v.set_voxel(0, 0, 0, 0.37f, 1.0f);
  v.set_voxel(1, 0, 0, -0.37f, 3.0f);
  const auto s = v.query_sdf(0.5 * (v.voxel_center(0, 0, 0) + v.voxel_center(1, 0, 0)));
  ASSERT_TRUE(s);
  EXPECT_NEAR(s->tsdf, 0.0, 1e-12);
  EXPECT_EQ(s->weight, 1.0);
}

TEST(QuerySdf, MatchesEightCornerOracle) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f), w(0.5f, 10.0f);
  const Vec3 origin(-0.1, 0.05, 0.2);
  const double h = 0.02;
  TsdfVolume v(origin, h, {5, 6, 7}, 0.05);
  for (int kz = 0; kz < 7; ++kz) {
    for (int j = 0; j < 6; ++j) {
      for (int i = 0; i < 5; ++i) v.set_voxel(i, j, kz, u(rng), w(rng));
    }
  }
  std::uniform_real_distribution<double> gx(0.0, 4.0), gy(0.0, 5.0), gz(0.0, 6.0);
  for (int n = 0; n < 1000; ++n) {
    const double fx = gx(rng), fy = gy(rng), fz = gz(rng);
    const Vec3 p = origin + h * Vec3(fx + 0.5, fy + 0.5, fz + 0.5);
    const int i0 = std::min(static_cast<int>(fx), 3), j0 = std::min(static_cast<int>(fy), 4),
              k0 = std::min(static_cast<int>(fz), 5);
    const double tx = fx - i0, ty = fy - j0, tz = fz - k0;
    double expect = 0.0, wmin = 1e300;
    for (int c = 0; c < 8; ++c) {
      const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
      const double cw = (di ? tx : 1 - tx) * (dj ? ty : 1 - ty) * (dk ? tz : 1 - tz);
      expect += cw * v.tsdf(i0 + di, j0 + dj, k0 + dk);
      wmin = std::min<double>(wmin, v.weight(i0 + di, j0 + dj, k0 + dk));
    }
    const auto s = v.query_sdf(p);
    ASSERT_TRUE(s);
    EXPECT_NEAR(s->tsdf, expect, 1e-12);
    EXPECT_EQ(s->weight, wmin);
  }
}

TEST(QuerySdf, OutOfBounds) {
  const TsdfVolume v(Vec3::Zero(), 0.01, {4, 4, 4}, 0.02);
  EXPECT_FALSE(v.query_sdf(Vec3(0.001, 0.02, 0.02)));
  EXPECT_FALSE(v.query_sdf(Vec3(0.02, 0.02, 0.0399)));
  EXPECT_FALSE(v.query_sdf(Vec3(std::nan(""), 0.02, 0.02)));
  EXPECT_TRUE(v.query_sdf(Vec3(0.005, 0.035, 0.02)));
}

TEST(ExtractSurface, EmptyVolumeGivesEmptyCloud) {
  const TsdfVolume v(Vec3::Zero(), 0.01, {8, 8, 8}, 0.02);
  EXPECT_TRUE(v.extract_surface().points.empty());
  EXPECT_TRUE(v.extract_surface(0.0f).points.empty());
}

TEST(ExtractSurface, DirectWriteSphereWithinHalfVoxel) {
  const double voxel = 0.002, radius = 0.03, trunc = 4 * voxel;
  const int n = 40;
  const Vec3 origin = Vec3::Constant(-0.0403);
  TsdfVolume v(origin, voxel, {n, n, n}, trunc);
  const Vec3 center(0.0011, -0.0007, 0.0004);
  for (int kz = 0; kz < n; ++kz) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        // Positive inside: the camera views the sphere from its interior.
        const double d = radius - (v.voxel_center(i, j, kz) - center).norm();
        v.set_voxel(i, j, kz, static_cast<float>(std::clamp(d / trunc, -1.0, 1.0)), 1.0f);
      }
    }
  }
  const PointCloud cloud = v.extract_surface();
  ASSERT_GT(cloud.points.size(), 1000u);
  double sq = 0.0;
  for (const Vec3& p : cloud.points) sq += std::pow((p - center).norm() - radius, 2);
  EXPECT_LE(std::sqrt(sq / cloud.points.size()), voxel / 2);
}

TEST(ExtractSurface, MinWeightMonotone) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f), w(0.0f, 5.0f);
  TsdfVolume v(Vec3::Zero(), 0.01, {12, 12, 12}, 0.02);
  for (int kz = 0; kz < 12; ++kz) {
    for (int j = 0; j < 12; ++j) {
      for (int i = 0; i < 12; ++i) v.set_voxel(i, j, kz, u(rng), w(rng));
    }
  }
  std::size_t prev = v.extract_surface(0.0f).points.size();
  EXPECT_GT(prev, 0u);
  for (float m : {0.5f, 1.0f, 2.0f, 3.0f, 4.5f, 6.0f}) {
    const std::size_t now = v.extract_surface(m).points.size();
    EXPECT_LE(now, prev);
    prev = now;
  }
  EXPECT_EQ(prev, 0u);
}

TEST(ExtractSurface, ColorsFollowPoints) {
  const SyntheticScene scene = box_scene();
  TsdfVolume v(Vec3::Constant(-0.056), 0.004, {28, 28, 28}, 0.016, 64.0f, true);
  const Pose p = look_at(Vec3(0, 0, -0.02), Vec3(0, 0, 1));
  RgbImage rgb;
  DepthMap depth;
  render_frame(scene, p, 1, &rgb, &depth);
  v.integrate(depth, p, scene.intrinsics, &rgb);
  const PointCloud cloud = v.extract_surface();
  ASSERT_FALSE(cloud.points.empty());
  EXPECT_EQ(cloud.colors.size(), cloud.points.size());
}

TEST(TsdfIo, SaveLoadRoundTrip) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (bool color : {false, true}) {
    TsdfVolume v(Vec3(0.1, 0.2, -0.3), 0.005, {3, 4, 5}, 0.02, 16.0f, color);
    for (int kz = 0; kz < 5; ++kz) {
      for (int j = 0; j < 4; ++j) {
        for (int i = 0; i < 3; ++i) v.set_voxel(i, j, kz, u(rng), 3.0f);
      }
    }
    std::stringstream buf;
    v.save(buf);
    EXPECT_EQ(buf.str().substr(0, 5), "TSDF1");
    EXPECT_EQ(TsdfVolume::load(buf), v);
  }
  testing::TempDir dir("tsdf");
  const TsdfVolume v(Vec3::Zero(), 0.01, {2, 2, 2}, 0.02);
  v.save(dir.str("vol.tsdf"));
  EXPECT_EQ(TsdfVolume::load(dir.str("vol.tsdf")), v);
}

TEST(TsdfIo, RejectsCorruptInput) {
  std::stringstream bad("TSDF2 garbage");
  EXPECT_THROW(TsdfVolume::load(bad), FormatError);
  std::stringstream buf;
  TsdfVolume(Vec3::Zero(), 0.01, {4, 4, 4}, 0.02).save(buf);
  std::string bytes = buf.str();
  bytes.resize(bytes.size() - 10);
  std::stringstream truncated(bytes);
  EXPECT_ANY_THROW(TsdfVolume::load(truncated));
  EXPECT_THROW(TsdfVolume::load(std::string("/nonexistent/vol.tsdf")), DataError);
}

TEST(Ply, RoundTripWithAndWithoutColor) {
  PointCloud cloud;
  cloud.points = {Vec3(0.25, -1.5, 3.0), Vec3(0, 0, 0), Vec3(1e-3, 2e-3, -4e-3)};
  std::stringstream plain;
  write_ply(cloud, plain);
  EXPECT_EQ(plain.str().rfind("ply\nformat binary_little_endian 1.0\nelement vertex 3\n", 0), 0u);
  const PointCloud back = read_ply(plain);
  ASSERT_EQ(back.points.size(), 3u);
  EXPECT_TRUE(back.colors.empty());
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_LT((back.points[i] - cloud.points[i]).norm(), 1e-6);
  }
  cloud.colors = {{1, 2, 3}, {255, 0, 128}, {9, 9, 9}};
  std::stringstream colored;
  write_ply(cloud, colored);
  const std::string header_end = "end_header\n";
  const std::size_t body = colored.str().find(header_end) + header_end.size();
  EXPECT_EQ(colored.str().size() - body, 3u * (12 + 3));
  EXPECT_EQ(read_ply(colored).colors, cloud.colors);
  cloud.colors.pop_back();
  std::stringstream mismatch;
  EXPECT_THROW(write_ply(cloud, mismatch), InvalidArgument);
}

TEST(Ply, RejectsNonPly) {
  std::stringstream in("obj\n");
  EXPECT_THROW(read_ply(in), FormatError);
  std::stringstream ascii("ply\nformat ascii 1.0\nelement vertex 0\nend_header\n");
  EXPECT_THROW(read_ply(ascii), FormatError);
}

}  // namespace
}  // namespace mvslam
