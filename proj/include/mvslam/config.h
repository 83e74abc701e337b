#pragma once

// Pipeline configuration as flat "key = value" text. '#' starts a comment;
// unknown keys and out-of-range values are ConfigErrors. `describe_config`
// lists every key with its default and meaning.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mvslam/feature_pose.h"
#include "mvslam/metrics.h"
#include "mvslam/pose_graph.h"
#include "mvslam/scale_fusion.h"
#include "mvslam/synth.h"

namespace mvslam {

enum class EstimatorSource { kOracle, kImport };

struct PipelineConfig {
  std::string dataset;
  std::string output;
  std::uint64_t seed = 1;

  EstimatorSource pose_source = EstimatorSource::kOracle;
  EstimatorSource depth_source = EstimatorSource::kOracle;
  // Trajectory file (TUM) for imported poses; directory of depth files for imported depth.
  std::string pose_import;
  std::string depth_import;
  PoseNoise pose_noise;
  DepthNoise depth_noise;

  UkfParams ukf;
  int ukf_reset_after = 5;

  FeaturePoseOptions features;

  bool pose_graph_enabled = true;
  int pose_graph_cadence = 30;
  int pose_graph_window = 100;
  double pose_graph_sigma_rot = 0.01;
  double pose_graph_sigma_trans = 0.001;
  OptimizeOptions pose_graph_optimizer;
  // Optional g2o file whose EDGE_SE3:QUAT lines add loop constraints between frame indices.
  std::string pose_graph_loop_edges;

  bool tsdf_enabled = true;
  double tsdf_voxel_size = 0.004;
  double tsdf_truncation = 0.016;
  float tsdf_max_weight = 64.0f;
  // dims of 0 select automatic bounds from the first integrated frames.
  Vec3 tsdf_origin = Vec3::Zero();
  std::array<int, 3> tsdf_dims{0, 0, 0};
  bool tsdf_color = true;
  float tsdf_min_weight = 1.0f;
  // Re-fuse every frame with its final pose instead of fusing frames as
  // their poses are settled by each optimization.
  bool tsdf_refuse_all = false;

  AlignMode metrics_align = AlignMode::kSim3;
  int metrics_rpe_delta = 1;
  DepthScaling metrics_depth_scaling = DepthScaling::kMedian;

  // Throws ConfigError for out-of-range values.
  void validate() const;
};

struct ConfigKey {
  std::string name;
  std::string description;
};

// Every recognized key, in dump order.
const std::vector<ConfigKey>& config_keys();

// Applies one assignment; throws ConfigError for unknown keys or bad values.
void set_config_value(PipelineConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const PipelineConfig& config, const std::string& key);

// Parses "key = value" lines onto `config`. Errors carry the line number.
void load_config(std::istream& in, PipelineConfig& config);
void load_config(const std::string& path, PipelineConfig& config);

// "key = value" for every key, each preceded by its description as a comment.
void dump_config(const PipelineConfig& config, std::ostream& out);

}  // namespace mvslam
