#pragma once

// Sequential frame loop: monocular relative motion -> classical metric
// translation -> UKF scale correction -> trajectory accumulation ->
// periodic pose-graph optimization -> TSDF fusion.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "mvslam/config.h"
#include "mvslam/dataset.h"
#include "mvslam/estimators.h"
#include "mvslam/trajectory.h"
#include "mvslam/tsdf.h"

namespace mvslam {

struct RunStats {
  std::size_t frames = 0;
  // Frames whose classical estimate failed, so the filter only predicted.
  int frames_predict_only = 0;
  int filter_resets = 0;
  std::uint32_t regularized_updates = 0;
  int pose_graph_runs = 0;
  int loop_edges = 0;
  double pose_graph_initial_cost = 0.0;
  double pose_graph_final_cost = 0.0;
  std::size_t integrated_frames = 0;
  std::size_t tsdf_updated_voxels = 0;
  std::size_t tsdf_clipped_pixels = 0;
  std::size_t cloud_points = 0;
  // Mean RANSAC inliers over frames with a metric translation.
  double mean_inliers = 0.0;
  // Wall-clock seconds per stage.
  std::map<std::string, double> timings;
};

// key=value lines. Timings are the only non-deterministic entries.
void write_stats(const RunStats& stats, std::ostream& out);

struct RunResult {
  Trajectory trajectory;
  std::optional<TsdfVolume> volume;
  PointCloud cloud;
  RunStats stats;
};

// Builds the estimators named by the configuration. Oracle estimators need
// the dataset's ground truth and depth; their absence is a ConfigError.
std::unique_ptr<PoseEstimator> make_pose_estimator(const PipelineConfig& config, const DatasetInfo& info);
std::unique_ptr<DepthEstimator> make_depth_estimator(const PipelineConfig& config, const DatasetInfo& info);

// The first camera defines the world frame (identity pose). Throws
// ConfigError for an invalid configuration or unusable dataset and
// DataError, naming the frame, when a frame cannot be read.
RunResult run_slam(const PipelineConfig& config);
RunResult run_slam(const PipelineConfig& config, const DatasetInfo& info, PoseEstimator& poses,
                   DepthEstimator& depths);

}  // namespace mvslam
