#include "mvslam/synth.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <exception>
#include <vector>

#include "mvslam/errors.h"

namespace mvslam {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double lattice_value(std::int64_t i, std::int64_t j, std::int64_t k, std::uint64_t seed) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(i));
  h = splitmix64(h ^ static_cast<std::uint64_t>(j));
  h = splitmix64(h ^ static_cast<std::uint64_t>(k));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Smoothly interpolated lattice noise in [0, 1).
double value_noise(const Vec3& p, double scale, std::uint64_t seed) {
  const Vec3 q = p / scale;
  const Vec3 f = q.array().floor();
  const std::int64_t i0 = static_cast<std::int64_t>(f.x());
  const std::int64_t j0 = static_cast<std::int64_t>(f.y());
  const std::int64_t k0 = static_cast<std::int64_t>(f.z());
  const double sx = smoothstep(q.x() - f.x());
  const double sy = smoothstep(q.y() - f.y());
  const double sz = smoothstep(q.z() - f.z());
  double out = 0.0;
  for (int c = 0; c < 8; ++c) {
    const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
    const double w = (di ? sx : 1.0 - sx) * (dj ? sy : 1.0 - sy) * (dk ? sz : 1.0 - sz);
    out += w * lattice_value(i0 + di, j0 + dj, k0 + dk, seed);
  }
  return out;
}

// Inward (camera-side) unit normal at surface point p.
Vec3 surface_normal(const SceneGeometry& g, const Vec3& p) {
  switch (g.type) {
    case PrimitiveType::kSphere:
      return (g.center - p).normalized();
    case PrimitiveType::kBox: {
      int best_axis = 0;
      double best = std::numeric_limits<double>::infinity();
      double sign = 1.0;
      for (int a = 0; a < 3; ++a) {
        const double to_min = std::abs(p[a] - g.box_min[a]);
        const double to_max = std::abs(g.box_max[a] - p[a]);
        if (to_min < best) {
          best = to_min;
          best_axis = a;
          sign = 1.0;
        }
        if (to_max < best) {
          best = to_max;
          best_axis = a;
          sign = -1.0;
        }
      }
      Vec3 n = Vec3::Zero();
      n[best_axis] = sign;
      return n;
    }
    case PrimitiveType::kPlane:
      return g.plane_normal.normalized();
  }
  return Vec3::UnitZ();
}

std::array<double, 3> shade_point(const SceneGeometry& g, const TextureParams& tex, const Vec3& p,
                                  const Vec3& view_dir, std::uint64_t seed) {
  static constexpr std::array<double, 3> kLight{205.0, 120.0, 110.0};
  static constexpr std::array<double, 3> kDark{95.0, 40.0, 45.0};
  // Product of per-axis signs is +1 on cells with even index sum.
  double sign = 1.0;
  for (int a = 0; a < 3; ++a) {
    const double d = tex.cell_size / std::numbers::pi * std::sin(std::numbers::pi * p[a] / tex.cell_size);
    if (tex.edge_width > 0.0) {
      const double t = std::clamp(d / tex.edge_width, -1.0, 1.0);
      sign *= 0.5 * t * (3.0 - t * t);
    } else {
      sign *= d >= 0.0 ? 1.0 : -1.0;
    }
  }
  const double mix = 0.5 + 0.5 * sign;
  std::array<double, 3> albedo{};
  for (int c = 0; c < 3; ++c) albedo[c] = mix * kLight[c] + (1.0 - mix) * kDark[c];
  const double noise = 1.0 + tex.noise_amplitude * (2.0 * value_noise(p, tex.noise_scale, seed) - 1.0);
  const double cos_term = std::abs(surface_normal(g, p).dot(view_dir));
  const double shade = 0.25 + 0.75 * cos_term;
  std::array<double, 3> rgb{};
  for (int c = 0; c < 3; ++c) rgb[c] = albedo[c] * noise * shade;
  return rgb;
}

Mat3 look_rotation(const Vec3& forward, const Vec3& up_hint) {
  const Vec3 z = forward.normalized();
  Vec3 y = up_hint - up_hint.dot(z) * z;
  if (y.norm() < 1e-9) {
    const Vec3 alt = std::abs(z.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
    y = alt - alt.dot(z) * z;
  }
  y.normalize();
  Mat3 r;
  r.col(0) = y.cross(z);
  r.col(1) = y;
  r.col(2) = z;
  return r;
}

}  // namespace

void SyntheticScene::validate() const {
  intrinsics.validate();
  const auto& g = geometry;
  switch (g.type) {
    case PrimitiveType::kSphere:
      if (!(g.radius > 0.0) || !g.center.allFinite()) throw InvalidArgument("sphere radius must be > 0");
      break;
    case PrimitiveType::kBox:
      if (!((g.box_max - g.box_min).array() > 0.0).all()) throw InvalidArgument("empty box");
      break;
    case PrimitiveType::kPlane:
      if (!(g.plane_normal.norm() > 0.0) || !g.plane_point.allFinite()) {
        throw InvalidArgument("plane normal must be non-zero");
      }
      break;
  }
  if (!(texture.cell_size > 0.0) || !(texture.noise_scale > 0.0) || texture.supersample < 1 ||
      !(texture.edge_width >= 0.0) ||
      texture.noise_amplitude < 0.0 || texture.noise_amplitude >= 1.0) {
    throw InvalidArgument("invalid texture parameters");
  }
  if (path.frames < 2) throw InvalidArgument("a sequence needs at least 2 frames");
  if (!(path.frame_rate > 0.0)) throw InvalidArgument("frame rate must be > 0");
  if (path.type == PathType::kRandomWalk) {
    if (!(path.step > 0.0) || !(path.max_turn_deg >= 0.0)) throw InvalidArgument("invalid random walk");
  } else if (!(path.radius >= 0.0) || !std::isfinite(path.span)) {
    throw InvalidArgument("invalid arc parameters");
  }
}

std::optional<double> intersect(const SceneGeometry& g, const Vec3& o, const Vec3& d) {
  switch (g.type) {
    case PrimitiveType::kSphere: {
      const Vec3 oc = o - g.center;
      const double a = d.squaredNorm();
      const double b = d.dot(oc);
      const double c = oc.squaredNorm() - g.radius * g.radius;
      const double disc = b * b - a * c;
      if (!(a > 0.0) || disc < 0.0) return std::nullopt;
      const double sq = std::sqrt(disc);
      // Far root, or near root if the origin is outside and in front.
      const double t_far = (-b + sq) / a;
      const double t_near = c > 0.0 ? c / (-b + sq) : -1.0;
      if (t_near > 0.0) return t_near;
      if (t_far > 0.0) return t_far;
      return std::nullopt;
    }
    case PrimitiveType::kBox: {
      double t_exit = std::numeric_limits<double>::infinity();
      for (int a = 0; a < 3; ++a) {
        if (d[a] > 0.0) {
          t_exit = std::min(t_exit, (g.box_max[a] - o[a]) / d[a]);
        } else if (d[a] < 0.0) {
          t_exit = std::min(t_exit, (g.box_min[a] - o[a]) / d[a]);
        }
      }
      if (!(t_exit > 0.0) || !std::isfinite(t_exit)) return std::nullopt;
      return t_exit;
    }
    case PrimitiveType::kPlane: {
      const Vec3 n = g.plane_normal.normalized();
      const double denom = n.dot(d);
      if (denom == 0.0) return std::nullopt;
      const double t = n.dot(g.plane_point - o) / denom;
      if (!(t > 0.0)) return std::nullopt;
      return t;
    }
  }
  return std::nullopt;
}

double signed_distance(const SceneGeometry& g, const Vec3& p) {
  switch (g.type) {
    case PrimitiveType::kSphere:
      return g.radius - (p - g.center).norm();
    case PrimitiveType::kBox: {
      const Vec3 lo = p - g.box_min;
      const Vec3 hi = g.box_max - p;
      const Vec3 inner = lo.cwiseMin(hi);
      if ((inner.array() >= 0.0).all()) return inner.minCoeff();
      return -inner.cwiseMin(0.0).norm();
    }
    case PrimitiveType::kPlane:
      return g.plane_normal.normalized().dot(p - g.plane_point);
  }
  return 0.0;
}

Trajectory generate_trajectory(const SyntheticScene& scene, std::uint64_t seed) {
  scene.validate();
  const PathParams& path = scene.path;
  const int n = path.frames;
  Trajectory traj;

  auto orient = [&](const Vec3& position, const Vec3& travel, const Vec3& up) {
    const Vec3 forward = path.view == ViewMode::kTarget ? Vec3(path.target - position) : travel;
    if (!(forward.norm() > 0.0)) throw InvalidArgument("camera view direction is undefined");
    return look_rotation(forward, up);
  };

  if (path.type == PathType::kRandomWalk) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> turn(-path.max_turn_deg * kDegToRad, path.max_turn_deg * kDegToRad);
    Vec3 p = path.center;
    Mat3 heading = Mat3::Identity();
    for (int i = 0; i < n; ++i) {
      traj.push_back(i, i / path.frame_rate, Pose{orient(p, heading.col(2), heading.col(1)), p, true});
      Vec3 w(turn(rng), turn(rng), turn(rng));
      const Vec3 to_center = path.center - p;
      if ((p - path.center).norm() > path.radius) {
        // Steer back: rotate the heading toward the center by the turn bound.
        const Vec3 axis = heading.col(2).cross(to_center.normalized());
        if (axis.norm() > 1e-12) w = axis.normalized() * path.max_turn_deg * kDegToRad;
      }
      heading = orthonormalize(so3_exp(w) * heading);
      p += path.step * heading.col(2);
    }
    return traj;
  }

  for (int i = 0; i < n; ++i) {
    const double phi = path.span * i / (n - 1);
    const double rise = path.type == PathType::kHelix ? path.rise : 0.0;
    const Vec3 p = path.center + Vec3(path.radius * std::cos(phi), rise * i / (n - 1), path.radius * std::sin(phi));
    Vec3 travel(-path.radius * std::sin(phi) * path.span, rise, path.radius * std::cos(phi) * path.span);
    if (travel.norm() == 0.0) travel = Vec3::UnitZ();
    traj.push_back(i, i / path.frame_rate, Pose{orient(p, travel, Vec3::UnitY()), p, true});
  }
  return traj;
}

void render_frame(const SyntheticScene& scene, const Pose& pose, std::uint64_t seed, RgbImage* rgb,
                  DepthMap* depth) {
  const CameraIntrinsics& k = scene.intrinsics;
  const int ss = scene.texture.supersample;
  if (rgb) *rgb = RgbImage(k.width, k.height, 3);
  if (depth) *depth = DepthMap(k.width, k.height);
  const Vec3& o = pose.translation;
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      if (depth) {
        const Vec3 dc((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
        const auto t = intersect(scene.geometry, o, pose.rotation * dc);
        // With an unnormalized ray whose camera-frame z is 1, t is the z-depth.
        if (t) depth->set(x, y, *t);
      }
      if (rgb) {
        std::array<double, 3> acc{};
        for (int sy = 0; sy < ss; ++sy) {
          for (int sx = 0; sx < ss; ++sx) {
            const double u = x - 0.5 + (sx + 0.5) / ss;
            const double v = y - 0.5 + (sy + 0.5) / ss;
            const Vec3 dw = pose.rotation * Vec3((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
            const auto t = intersect(scene.geometry, o, dw);
            if (!t) continue;
            const auto c = shade_point(scene.geometry, scene.texture, o + *t * dw, dw.normalized(), seed);
            for (int ch = 0; ch < 3; ++ch) acc[ch] += c[ch];
          }
        }
        for (int ch = 0; ch < 3; ++ch) {
          rgb->at(x, y, ch) = static_cast<std::uint8_t>(std::lround(std::clamp(acc[ch] / (ss * ss), 0.0, 255.0)));
        }
      }
    }
  }
}

SyntheticSequence generate_sequence(const SyntheticScene& scene, std::uint64_t seed) {
  SyntheticSequence seq;
  seq.intrinsics = scene.intrinsics;
  seq.groundtruth = generate_trajectory(scene, seed);
  for (const auto& entry : seq.groundtruth) {
    if (!(signed_distance(scene.geometry, entry.pose.translation) > 0.0)) {
      throw InvalidArgument("camera " + std::to_string(entry.frame_id) + " lies outside the scene geometry");
    }
  }
  seq.rgb.resize(seq.groundtruth.size());
  seq.depth.resize(seq.groundtruth.size());
  // Frames are independent; each worker renders a strided subset.
  const std::size_t n = seq.groundtruth.size();
  const std::size_t workers = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, std::max<std::size_t>(n, 1));
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) {
            render_frame(scene, seq.groundtruth[i].pose, seed, &seq.rgb[i], &seq.depth[i]);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  const auto pixels = static_cast<std::size_t>(scene.intrinsics.width) * scene.intrinsics.height;
  for (std::size_t i = 0; i < n; ++i) {
    if (seq.depth[i].valid_count() != pixels) {
      throw InvalidArgument("frame " + std::to_string(i) + " has pixels that miss the scene surface");
    }
  }
  return seq;
}

Pose oracle_pose(const Trajectory& gt, std::size_t i, const PoseNoise& noise, std::uint64_t seed) {
  if (i + 1 >= gt.size()) throw std::out_of_range("oracle_pose: frame index out of range");
  const Pose rel = compose(inverse(gt[i].pose), gt[i + 1].pose);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Pose out;
  out.scaled = false;
  const Vec3 w(gauss(rng), gauss(rng), gauss(rng));
  out.rotation = noise.rot_sigma_deg > 0.0 ? Mat3(so3_exp(Vec3(w * noise.rot_sigma_deg * kDegToRad)) * rel.rotation)
                                           : rel.rotation;
  const double norm = rel.translation.norm();
  if (norm == 0.0) {
    out.translation = Vec3::Zero();
    return out;
  }
  Vec3 dir = rel.translation / norm;
  const double n1 = gauss(rng), n2 = gauss(rng);
  if (noise.dir_sigma_deg > 0.0) {
    const Vec3 helper = std::abs(dir.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 e1 = dir.cross(helper).normalized();
    const Vec3 e2 = dir.cross(e1);
    const Vec3 tilt = noise.dir_sigma_deg * kDegToRad * (n1 * e1 + n2 * e2);
    dir = (so3_exp(tilt) * dir).normalized();
  }
  out.translation = dir;
  return out;
}

DepthMap oracle_depth(const DepthMap& gt, const DepthNoise& noise, std::uint64_t seed) {
  if (noise.mult_sigma < 0.0 || noise.dropout_frac < 0.0 || noise.dropout_frac > 1.0) {
    throw InvalidArgument("invalid depth noise parameters");
  }
  DepthMap out(gt.width(), gt.height());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!gt.valid(x, y)) continue;
      const double n = gauss(rng);
      const double u = uniform(rng);
      if (u < noise.dropout_frac) continue;
      out.set(x, y, noise.mult_sigma > 0.0 ? gt.depth(x, y) * std::exp(noise.mult_sigma * n) : gt.depth(x, y));
    }
  }
  return out;
}

}  // namespace mvslam
