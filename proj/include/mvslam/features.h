#pragma once

// Sparse corners with oriented 256-bit binary descriptors, and mutual
// nearest-neighbour matching under a Hamming ratio test.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "mvslam/image.h"

namespace mvslam {

using Descriptor = std::array<std::uint64_t, 4>;

struct Keypoint {
  double u = 0.0;
  double v = 0.0;
  double response = 0.0;
  // Patch orientation in radians (intensity centroid).
  double angle = 0.0;
  Descriptor descriptor{};
};

enum class DetectorType {
  // Harris-Stephens corner response; also fires on X-junctions.
  kHarris,
  // 9-of-16 contiguous-arc segment test.
  kFast,
};

struct FeatureOptions {
  DetectorType detector = DetectorType::kHarris;
  // Intensity threshold of the segment test (0..255 scale).
  float fast_threshold = 20.0f;
  double harris_k = 0.04;
  // Harris responses below quality * max response are rejected.
  double harris_quality = 0.01;
  // The image is bucketed into grid_cells x grid_cells cells.
  int grid_cells = 8;
};

// Keypoints closer than this to the image border are not reported; the
// descriptor patch needs the margin.
inline constexpr int kDescriptorBorder = 18;

// At most max_n keypoints sorted by non-increasing response, each with its
// descriptor filled in.
std::vector<Keypoint> detect_features(const GrayImage& image, int max_n,
                                      const FeatureOptions& options = {});

int hamming_distance(const Descriptor& a, const Descriptor& b);

struct FeatureMatch {
  int index_a = 0;
  int index_b = 0;
  int distance = 0;
};

// Mutual nearest neighbours whose best distance is below ratio times the
// second best. One-to-one by construction; ordered by index_a.
std::vector<FeatureMatch> match_features(std::span<const Keypoint> a, std::span<const Keypoint> b,
                                         double ratio);

}  // namespace mvslam
