#include "mvslam/features.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Dense>

#include "mvslam/errors.h"

namespace mvslam {
namespace {

constexpr int kOrientationRadius = 15;
constexpr int kPatternRadius = 13;
constexpr int kDescriptorBits = 256;

struct PointPair {
  int x1, y1, x2, y2;
};

// Fixed sampling pattern; generated from raw mt19937 output so it is the
// same on every standard library.
const std::array<PointPair, kDescriptorBits>& sampling_pattern() {
  static const std::array<PointPair, kDescriptorBits> pattern = [] {
    std::array<PointPair, kDescriptorBits> p{};
    std::mt19937 gen(0x5eed1234u);
    auto draw = [&gen](int& x, int& y) {
      do {
        x = static_cast<int>(gen() % (2 * kPatternRadius + 1)) - kPatternRadius;
        y = static_cast<int>(gen() % (2 * kPatternRadius + 1)) - kPatternRadius;
      } while (x * x + y * y > kPatternRadius * kPatternRadius);
    };
    for (auto& pair : p) {
      do {
        draw(pair.x1, pair.y1);
        draw(pair.x2, pair.y2);
      } while (pair.x1 == pair.x2 && pair.y1 == pair.y2);
    }
    return p;
  }();
  return pattern;
}

std::vector<float> gaussian_kernel(double sigma, int radius) {
  std::vector<float> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[i + radius] = static_cast<float>(v);
    sum += v;
  }
  for (float& v : k) v = static_cast<float>(v / sum);
  return k;
}

// Separable convolution with clamped borders.
GrayImage blur(const GrayImage& in, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  const std::vector<float> k = gaussian_kernel(sigma, radius);
  const int w = in.width(), h = in.height();
  GrayImage tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * in.at(std::clamp(x + i, 0, w - 1), y);
      tmp.at(x, y) = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp.at(x, std::clamp(y + i, 0, h - 1));
      out.at(x, y) = acc;
    }
  }
  return out;
}

struct Candidate {
  int x, y;
  float score;
};

// Sub-pixel offset of a 1-D parabola through (-1, a), (0, b), (1, c).
double parabola_peak(double a, double b, double c) {
  const double denom = a - 2.0 * b + c;
  if (denom >= 0.0) return 0.0;
  return std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
}

float bilinear(const GrayImage& img, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  return static_cast<float>((1 - fx) * (1 - fy) * img.at(x0, y0) + fx * (1 - fy) * img.at(x0 + 1, y0) +
                            (1 - fx) * fy * img.at(x0, y0 + 1) + fx * fy * img.at(x0 + 1, y0 + 1));
}

// Iterative corner refinement: the corner q is the point that every
// gradient in the window is orthogonal to, sum g g^T (q - p) = 0.
// Returns the start point when the system is degenerate or the estimate
// wanders more than a pixel and a half.
Eigen::Vector2d refine_corner(const GrayImage& img, Eigen::Vector2d start) {
  constexpr int kHalf = 5;
  constexpr double kSigma = 3.0;
  Eigen::Vector2d q = start;
  for (int iter = 0; iter < 20; ++iter) {
    Eigen::Matrix2d a = Eigen::Matrix2d::Zero();
    Eigen::Vector2d b = Eigen::Vector2d::Zero();
    for (int dy = -kHalf; dy <= kHalf; ++dy) {
      for (int dx = -kHalf; dx <= kHalf; ++dx) {
        const double px = q.x() + dx, py = q.y() + dy;
        const double gx = 0.5 * (bilinear(img, px + 1, py) - bilinear(img, px - 1, py));
        const double gy = 0.5 * (bilinear(img, px, py + 1) - bilinear(img, px, py - 1));
        const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
        const double gxx = w * gx * gx, gxy = w * gx * gy, gyy = w * gy * gy;
        a(0, 0) += gxx;
        a(0, 1) += gxy;
        a(1, 1) += gyy;
        b.x() += gxx * px + gxy * py;
        b.y() += gxy * px + gyy * py;
      }
    }
    a(1, 0) = a(0, 1);
    const double det = a.determinant();
    if (!(det > 1e-9 * a.trace() * a.trace())) return start;
    const Eigen::Vector2d next = a.inverse() * b;
    const double step = (next - q).norm();
    q = next;
    if ((q - start).norm() > 1.5) return start;
    if (step < 1e-4) break;
  }
  return q;
}

std::vector<Candidate> local_maxima(const GrayImage& score, int radius, float min_score) {
  std::vector<Candidate> out;
  const int w = score.width(), h = score.height();
  for (int y = kDescriptorBorder; y < h - kDescriptorBorder; ++y) {
    for (int x = kDescriptorBorder; x < w - kDescriptorBorder; ++x) {
      const float s = score.at(x, y);
      if (!(s > min_score)) continue;
      bool is_max = true;
      for (int dy = -radius; dy <= radius && is_max; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const float o = score.at(x + dx, y + dy);
          // Ties go to the first pixel in raster order.
          if (o > s || (o == s && (dy < 0 || (dy == 0 && dx < 0)))) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) out.push_back({x, y, s});
    }
  }
  return out;
}

GrayImage harris_response(const GrayImage& img, double k) {
  const int w = img.width(), h = img.height();
  GrayImage ixx(w, h), iyy(w, h), ixy(w, h);
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const float gx = (img.at(x + 1, y - 1) + 2.0f * img.at(x + 1, y) + img.at(x + 1, y + 1)) -
                       (img.at(x - 1, y - 1) + 2.0f * img.at(x - 1, y) + img.at(x - 1, y + 1));
      const float gy = (img.at(x - 1, y + 1) + 2.0f * img.at(x, y + 1) + img.at(x + 1, y + 1)) -
                       (img.at(x - 1, y - 1) + 2.0f * img.at(x, y - 1) + img.at(x + 1, y - 1));
      ixx.at(x, y) = gx * gx / 64.0f;
      iyy.at(x, y) = gy * gy / 64.0f;
      ixy.at(x, y) = gx * gy / 64.0f;
    }
  }
  ixx = blur(ixx, 1.5);
  iyy = blur(iyy, 1.5);
  ixy = blur(ixy, 1.5);
  GrayImage r(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double a = ixx.at(x, y), b = iyy.at(x, y), c = ixy.at(x, y);
      r.at(x, y) = static_cast<float>(a * b - c * c - k * (a + b) * (a + b));
    }
  }
  return r;
}

// Bresenham circle of radius 3, clockwise from 12 o'clock.
constexpr std::array<std::array<int, 2>, 16> kCircle = {{{0, -3}, {1, -3}, {2, -2}, {3, -1},
                                                         {3, 0}, {3, 1}, {2, 2}, {1, 3},
                                                         {0, 3}, {-1, 3}, {-2, 2}, {-3, 1},
                                                         {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}}};

GrayImage fast_score(const GrayImage& img, float threshold) {
  const int w = img.width(), h = img.height();
  GrayImage score(w, h);
  for (int y = 3; y < h - 3; ++y) {
    for (int x = 3; x < w - 3; ++x) {
      const float p = img.at(x, y);
      std::array<int, 16> state{};  // +1 brighter, -1 darker, 0 similar
      for (int i = 0; i < 16; ++i) {
        const float q = img.at(x + kCircle[i][0], y + kCircle[i][1]);
        state[i] = q > p + threshold ? 1 : (q < p - threshold ? -1 : 0);
      }
      for (int sign : {1, -1}) {
        int run = 0, best = 0;
        for (int i = 0; i < 32; ++i) {
          run = state[i % 16] == sign ? run + 1 : 0;
          best = std::max(best, std::min(run, 16));
        }
        if (best >= 9) {
          float sad = 0.0f;
          for (int i = 0; i < 16; ++i) {
            if (state[i] == sign) {
              sad += std::abs(img.at(x + kCircle[i][0], y + kCircle[i][1]) - p) - threshold;
            }
          }
          score.at(x, y) = std::max(score.at(x, y), sad);
        }
      }
    }
  }
  return score;
}

double patch_orientation(const GrayImage& img, int cx, int cy) {
  double m01 = 0.0, m10 = 0.0;
  const int r2 = kOrientationRadius * kOrientationRadius;
  for (int dy = -kOrientationRadius; dy <= kOrientationRadius; ++dy) {
    for (int dx = -kOrientationRadius; dx <= kOrientationRadius; ++dx) {
      if (dx * dx + dy * dy > r2) continue;
      const double v = img.at(cx + dx, cy + dy);
      m10 += dx * v;
      m01 += dy * v;
    }
  }
  return std::atan2(m01, m10);
}

Descriptor describe(const GrayImage& smooth, int cx, int cy, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  auto sample = [&](int x, int y) {
    const int rx = static_cast<int>(std::lround(c * x - s * y));
    const int ry = static_cast<int>(std::lround(s * x + c * y));
    return smooth.at(cx + rx, cy + ry);
  };
  Descriptor d{};
  const auto& pattern = sampling_pattern();
  for (int i = 0; i < kDescriptorBits; ++i) {
    const PointPair& p = pattern[i];
    if (sample(p.x1, p.y1) < sample(p.x2, p.y2)) d[i / 64] |= std::uint64_t{1} << (i % 64);
  }
  return d;
}

}  // namespace

std::vector<Keypoint> detect_features(const GrayImage& image, int max_n,
                                      const FeatureOptions& options) {
  if (image.empty()) throw InvalidArgument("detect_features: empty image");
  if (max_n <= 0 || image.width() <= 2 * kDescriptorBorder || image.height() <= 2 * kDescriptorBorder) {
    return {};
  }

  GrayImage score;
  float min_score = 0.0f;
  int nms_radius = 2;
  if (options.detector == DetectorType::kHarris) {
    score = harris_response(image, options.harris_k);
    const auto data = score.data();
    const float max_r = *std::max_element(data.begin(), data.end());
    min_score = std::max(static_cast<float>(options.harris_quality) * max_r, 1e-3f);
    nms_radius = 3;
  } else {
    score = fast_score(image, options.fast_threshold);
  }
  std::vector<Candidate> candidates = local_maxima(score, nms_radius, min_score);

  // Bucket into a grid so a few highly textured regions cannot take every slot.
  const int cells = std::max(1, options.grid_cells);
  const int per_cell = std::max(1, 2 * ((max_n + cells * cells - 1) / (cells * cells)));
  std::vector<std::vector<Candidate>> buckets(static_cast<std::size_t>(cells) * cells);
  for (const Candidate& c : candidates) {
    const int gx = std::min(cells - 1, c.x * cells / image.width());
    const int gy = std::min(cells - 1, c.y * cells / image.height());
    buckets[static_cast<std::size_t>(gy) * cells + gx].push_back(c);
  }
  auto stronger = [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  };
  std::vector<Candidate> kept;
  for (auto& bucket : buckets) {
    std::sort(bucket.begin(), bucket.end(), stronger);
    if (bucket.size() > static_cast<std::size_t>(per_cell)) bucket.resize(per_cell);
    kept.insert(kept.end(), bucket.begin(), bucket.end());
  }
  std::sort(kept.begin(), kept.end(), stronger);
  if (kept.size() > static_cast<std::size_t>(max_n)) kept.resize(max_n);

  const GrayImage smooth = blur(image, 2.0);
  const GrayImage fine = blur(image, 1.0);
  std::vector<Keypoint> out;
  out.reserve(kept.size());
  for (const Candidate& c : kept) {
    Keypoint kp;
    const Eigen::Vector2d p = refine_corner(fine, Eigen::Vector2d(c.x + parabola_peak(score.at(c.x - 1, c.y), c.score, score.at(c.x + 1, c.y)),
                                             c.y + parabola_peak(score.at(c.x, c.y - 1), c.score, score.at(c.x, c.y + 1))));
    kp.u = p.x();
    kp.v = p.y();
    kp.response = c.score;
    kp.angle = patch_orientation(smooth, c.x, c.y);
    kp.descriptor = describe(smooth, c.x, c.y, kp.angle);
    out.push_back(kp);
  }
  return out;
}

int hamming_distance(const Descriptor& a, const Descriptor& b) {
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::popcount(a[i] ^ b[i]);
  return d;
}

std::vector<FeatureMatch> match_features(std::span<const Keypoint> a, std::span<const Keypoint> b,
                                         double ratio) {
  std::vector<FeatureMatch> out;
  if (a.empty() || b.empty()) return out;

  struct Best {
    int index = -1;
    int first = std::numeric_limits<int>::max();
    int second = std::numeric_limits<int>::max();
  };
  std::vector<Best> best_ab(a.size()), best_ba(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      const int d = hamming_distance(a[i].descriptor, b[j].descriptor);
      Best& fa = best_ab[i];
      if (d < fa.first) {
        fa.second = fa.first;
        fa.first = d;
        fa.index = static_cast<int>(j);
      } else if (d < fa.second) {
        fa.second = d;
      }
      Best& fb = best_ba[j];
      if (d < fb.first) {
        fb.second = fb.first;
        fb.first = d;
        fb.index = static_cast<int>(i);
      } else if (d < fb.second) {
        fb.second = d;
      }
    }
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Best& fa = best_ab[i];
    if (fa.index < 0 || best_ba[fa.index].index != static_cast<int>(i)) continue;
    if (fa.second != std::numeric_limits<int>::max() &&
        !(fa.first < ratio * fa.second)) {
      continue;
    }
    out.push_back({static_cast<int>(i), fa.index, fa.first});
  }
  return out;
}

}  // namespace mvslam
