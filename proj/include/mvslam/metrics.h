#pragma once

// Trajectory and depth evaluation.
//
// Trajectory errors use E = gt^-1 * est (ATE, after alignment) and
// E_ij = (gt_i^-1 gt_j)^-1 (est_i^-1 est_j) for j = i + delta (RPE).
// Depth errors follow the usual monocular-depth suite: AbsRel, SqRel, RMSE,
// RMSE-log and the delta < 1.25^k accuracies.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvslam/geometry.h"
#include "mvslam/image.h"
#include "mvslam/trajectory.h"

namespace mvslam {

struct MetricSummary {
  std::string name;
  std::vector<double> samples;
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
  double rmse = 0.0;
  double std_dev = 0.0;
  double min = 0.0;
  double max = 0.0;

  std::size_t count() const { return samples.size(); }
  // Throws InsufficientData for an empty sample set.
  static MetricSummary from_samples(std::string name, std::vector<double> samples);
};

struct MetricReport {
  // Free-form run metadata (alignment mode, scaling, ...), emitted first.
  std::vector<std::pair<std::string, std::string>> header;
  // Identifier of each sample (frame id), shared by all metrics.
  std::vector<std::int64_t> sample_ids;
  std::vector<MetricSummary> metrics;

  // Throws std::out_of_range for unknown names.
  const MetricSummary& get(const std::string& name) const;
};

// "key=value" lines: header entries, then <metric>.<stat> for count, mean,
// median, q1, q3, iqr, rmse, std, min, max.
void write_report(const MetricReport& report, std::ostream& out);
// Header row "id,<metric>,..." then one row per sample.
void write_samples_csv(const MetricReport& report, std::ostream& out);

struct Sim3 {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
  // Similarity acting on a camera-to-world pose; the result is flagged scaled.
  Pose apply(const Pose& p) const;
};

// Closed-form least squares dst ~ s R src + t (s = 1 unless with_scale).
// Throws AlignmentFailed for fewer than 3 points or collinear sources.
Sim3 umeyama(std::span<const Vec3> src, std::span<const Vec3> dst, bool with_scale);

// Similarity by which the estimate differs from ground truth, i.e. the least
// squares fit est ~ s R gt + t over positions associated by frame id (an
// estimate at twice the true scale yields s = 2). ate() applies the fit in
// the opposite direction, est onto gt.
Sim3 align_umeyama(const Trajectory& est, const Trajectory& gt, bool with_scale);

enum class AlignMode { kNone, kSe3, kSim3 };
const char* to_string(AlignMode mode);
// Accepts "none", "se3", "sim3"; throws InvalidArgument otherwise.
AlignMode parse_align_mode(const std::string& s);

// Per-frame |trans(gt^-1 * aligned est)| in meters, metric name "ate".
// Throws InsufficientData for fewer than 2 associated frames.
MetricReport ate(const Trajectory& est, const Trajectory& gt, AlignMode align = AlignMode::kSim3);

struct RpeReport {
  // |trans(E_ij)| in meters, metric "rte".
  MetricReport rte;
  // Rotation angle of E_ij in degrees, metric "rre".
  MetricReport rre;
};

// Throws InvalidArgument for delta < 1 and InsufficientData when no pair exists.
RpeReport rpe(const Trajectory& est, const Trajectory& gt, int delta = 1);

enum class DepthScaling {
  kNone,
  // pred *= median(gt) / median(pred) over the joint valid mask.
  kMedian,
};
const char* to_string(DepthScaling scaling);
DepthScaling parse_depth_scaling(const std::string& s);

struct DepthErrors {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  double a3 = 0.0;
  std::size_t pixels = 0;
  double scale = 1.0;
};

inline constexpr const char* kDepthMetricNames[7] = {"abs_rel", "sq_rel", "rmse", "rmse_log",
                                                     "a1", "a2", "a3"};

// Errors over the joint valid mask. Throws InvalidArgument for mismatched
// sizes and InsufficientData for an empty joint mask.
DepthErrors compute_depth_errors(const DepthMap& pred, const DepthMap& gt, DepthScaling scaling);

// Single-frame report with one sample per depth metric.
MetricReport depth_metrics(const DepthMap& pred, const DepthMap& gt, DepthScaling scaling);

// Multi-frame report; ids label the frames.
MetricReport summarize_depth(std::span<const DepthErrors> frames, std::span<const std::int64_t> ids,
                             DepthScaling scaling);

}  // namespace mvslam
