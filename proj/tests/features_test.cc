#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include <Eigen/Core>
#include <gtest/gtest.h>

#include "mvslam/errors.h"
#include "mvslam/features.h"

namespace mvslam {
namespace {

// 8x8 board of `cell` pixel squares, anti-aliased by supersampling, with its
// top-left corner at (ox, oy). Pixel (x, y) covers [x - 0.5, x + 0.5].
GrayImage checkerboard(int size, double ox, double oy, double cell, double angle = 0.0) {
  constexpr int kSs = 8;
  GrayImage img(size, size, 1, 128.0f);
  const double c = std::cos(angle), s = std::sin(angle);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double acc = 0.0;
      for (int j = 0; j < kSs; ++j) {
        for (int i = 0; i < kSs; ++i) {
          const double px = x - 0.5 + (i + 0.5) / kSs - ox, py = y - 0.5 + (j + 0.5) / kSs - oy;
          const double u = (c * px + s * py) / cell, v = (-s * px + c * py) / cell;
          if (u < 0 || v < 0 || u >= 8 || v >= 8) {
            acc += 128.0;
          } else {
            acc += (static_cast<int>(u) + static_cast<int>(v)) % 2 == 0 ? 220.0 : 30.0;
          }
        }
      }
      img.at(x, y) = static_cast<float>(acc / (kSs * kSs));
    }
  }
  return img;
}

// Interior corners (7 x 7) of the board above.
std::vector<Eigen::Vector2d> board_corners(double ox, double oy, double cell, double angle = 0.0) {
  std::vector<Eigen::Vector2d> out;
  const double c = std::cos(angle), s = std::sin(angle);
  for (int j = 1; j < 8; ++j) {
    for (int i = 1; i < 8; ++i) {
      const double u = i * cell, v = j * cell;
      out.emplace_back(ox + c * u - s * v, oy + s * u + c * v);
    }
  }
  return out;
}

int corners_within(const std::vector<Keypoint>& kps, const std::vector<Eigen::Vector2d>& truth, double tol) {
  int hit = 0;
  for (const auto& t : truth) {
    const bool found = std::any_of(kps.begin(), kps.end(), [&](const Keypoint& k) {
      return std::hypot(k.u - t.x(), k.v - t.y()) <= tol;
    });
    hit += found ? 1 : 0;
  }
  return hit;
}

Keypoint random_keypoint(std::mt19937_64& rng) {
  Keypoint k;
  for (auto& w : k.descriptor) w = rng();
  return k;
}

TEST(DetectFeatures, UniformImageIsEmpty) {
  EXPECT_TRUE(detect_features(GrayImage(200, 160, 1, 90.0f), 500).empty());
  FeatureOptions fast;
  fast.detector = DetectorType::kFast;
  EXPECT_TRUE(detect_features(GrayImage(200, 160, 1, 90.0f), 500, fast).empty());
}

TEST(DetectFeatures, EmptyImageThrows) {
  EXPECT_THROW(detect_features(GrayImage(), 10), InvalidArgument);
}

TEST(DetectFeatures, CheckerboardCornersNearAnalytic) {
  const GrayImage img = checkerboard(400, 40.37, 41.81, 40.0);
  const auto kps = detect_features(img, 1000);
  EXPECT_GE(corners_within(kps, board_corners(40.37, 41.81, 40.0), 1.5), 40);
}

TEST(DetectFeatures, RotatedCheckerboardSubPixel) {
  const double angle = 0.3;
  const GrayImage img = checkerboard(420, 120.2, 30.6, 30.0, angle);
  const auto truth = board_corners(120.2, 30.6, 30.0, angle);
  const auto kps = detect_features(img, 1000);
  EXPECT_GE(corners_within(kps, truth, 1.5), 40);
  // The corner refinement should do far better than the 1.5 px bound.
  EXPECT_GE(corners_within(kps, truth, 0.1), 40);
}

TEST(DetectFeatures, ResponseOrderAndBounds) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(0.0f, 255.0f);
  GrayImage img(160, 120);
  for (auto& p : img.data()) p = u(rng);
  for (DetectorType type : {DetectorType::kHarris, DetectorType::kFast}) {
    FeatureOptions opt;
    opt.detector = type;
    const auto kps = detect_features(img, 150, opt);
    ASSERT_FALSE(kps.empty());
    EXPECT_LE(kps.size(), 150u);
    for (std::size_t i = 1; i < kps.size(); ++i) EXPECT_LE(kps[i].response, kps[i - 1].response);
    for (const auto& k : kps) {
      EXPECT_GE(k.u, 0.0);
      EXPECT_GE(k.v, 0.0);
      EXPECT_LT(k.u, img.width());
      EXPECT_LT(k.v, img.height());
    }
  }
}

TEST(DetectFeatures, MaxCountRespected) {
  const GrayImage img = checkerboard(400, 40.0, 40.0, 40.0);
  EXPECT_EQ(detect_features(img, 7).size(), 7u);
  EXPECT_TRUE(detect_features(img, 0).empty());
}

TEST(DetectFeatures, FastFiresOnLCorners) {
  // A bright square on a dark field has four L corners, which pass the arc test.
  GrayImage img(120, 120, 1, 20.0f);
  for (int y = 40; y < 80; ++y) {
    for (int x = 40; x < 80; ++x) img.at(x, y) = 200.0f;
  }
  FeatureOptions opt;
  opt.detector = DetectorType::kFast;
  const auto kps = detect_features(img, 10, opt);
  const std::vector<Eigen::Vector2d> truth{{39.5, 39.5}, {79.5, 39.5}, {39.5, 79.5}, {79.5, 79.5}};
  EXPECT_EQ(corners_within(kps, truth, 1.5), 4);
}

TEST(DetectFeatures, Deterministic) {
  const GrayImage img = checkerboard(300, 20.5, 22.5, 30.0, 0.2);
  const auto a = detect_features(img, 100), b = detect_features(img, 100);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].u, b[i].u);
    EXPECT_EQ(a[i].descriptor, b[i].descriptor);
  }
}

TEST(HammingDistance, CountsBits) {
  Descriptor a{}, b{};
  EXPECT_EQ(hamming_distance(a, b), 0);
  b[0] = 0b1011;
  b[3] = std::uint64_t{1} << 63;
  EXPECT_EQ(hamming_distance(a, b), 4);
  b = {~0ull, ~0ull, ~0ull, ~0ull};
  EXPECT_EQ(hamming_distance(a, b), 256);
}

TEST(MatchFeatures, IdenticalSetsMatchIdentically) {
  std::mt19937_64 rng(2);
  std::vector<Keypoint> kps;
  for (int i = 0; i < 100; ++i) kps.push_back(random_keypoint(rng));
  const auto m = match_features(kps, kps, 0.8);
  ASSERT_EQ(m.size(), kps.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_EQ(m[i].index_a, static_cast<int>(i));
    EXPECT_EQ(m[i].index_b, static_cast<int>(i));
    EXPECT_EQ(m[i].distance, 0);
  }
}

TEST(MatchFeatures, DisjointRandomDescriptorsRarelyMatch) {
  // Distances between independent 256-bit strings are Binomial(256, 1/2):
  // mean 128, sd 8. Passing 0.7 needs best < 0.7 * second, i.e. a gap of
  // about 40 bits between two draws from the same distribution, which is
  // a many-sigma event.
  std::mt19937_64 rng(3);
  int total = 0;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Keypoint> a, b;
    for (int i = 0; i < 200; ++i) a.push_back(random_keypoint(rng));
    for (int i = 0; i < 200; ++i) b.push_back(random_keypoint(rng));
    total += static_cast<int>(match_features(a, b, 0.7).size());
  }
  EXPECT_LE(total, 1);
}

TEST(MatchFeatures, OneToOne) {
  std::mt19937_64 rng(4);
  // Few distinct descriptors so that many keypoints collide.
  std::vector<Keypoint> pool;
  for (int i = 0; i < 5; ++i) pool.push_back(random_keypoint(rng));
  std::uniform_int_distribution<int> pick(0, 4);
  std::vector<Keypoint> a, b;
  for (int i = 0; i < 60; ++i) a.push_back(pool[pick(rng)]);
  for (int i = 0; i < 60; ++i) b.push_back(pool[pick(rng)]);
  for (double ratio : {0.5, 0.8, 1.0}) {
    const auto m = match_features(a, b, ratio);
    std::set<int> ia, ib;
    for (const auto& x : m) {
      EXPECT_TRUE(ia.insert(x.index_a).second);
      EXPECT_TRUE(ib.insert(x.index_b).second);
    }
  }
}

TEST(MatchFeatures, RatioRejectsAmbiguous) {
  std::mt19937_64 rng(5);
  Keypoint q = random_keypoint(rng);
  Keypoint near1 = q, near2 = q;
  near1.descriptor[0] ^= 0b1;
  near2.descriptor[1] ^= 0b11;
  const std::vector<Keypoint> a{q};
  // best 1, second 2: passes at 0.8, fails at 0.5.
  const std::vector<Keypoint> b{near1, near2};
  EXPECT_EQ(match_features(a, b, 0.8).size(), 1u);
  EXPECT_TRUE(match_features(a, b, 0.5).empty());
  EXPECT_TRUE(match_features(a, std::vector<Keypoint>{}, 0.8).empty());
}

}  // namespace
}  // namespace mvslam
