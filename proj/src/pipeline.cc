#include "mvslam/pipeline.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "mvslam/errors.h"
#include "mvslam/feature_pose.h"
#include "mvslam/pose_graph.h"
#include "mvslam/pose_graph_io.h"
#include "mvslam/scale_fusion.h"

namespace mvslam {
namespace {

class StageTimer {
 public:
  StageTimer(RunStats& stats, const char* stage)
      : stats_(stats), stage_(stage), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start_;
    stats_.timings[stage_] += d.count();
  }

 private:
  RunStats& stats_;
  const char* stage_;
  std::chrono::steady_clock::time_point start_;
};

struct PendingFrame {
  std::int64_t index = 0;
  RgbImage rgb;
  DepthMap depth;
};

RgbImage read_frame(const DatasetInfo& info, std::int64_t i) {
  try {
    return load_frame_rgb(info, i);
  } catch (const std::exception& e) {
    throw DataError("frame " + std::to_string(i) + ": " + e.what());
  }
}

DepthMap estimate_depth(DepthEstimator& depths, std::int64_t i, const RgbImage& rgb, const CameraIntrinsics& k) {
  DepthMap d;
  try {
    d = depths.estimate({i, &rgb});
  } catch (const DataError& e) {
    throw DataError("frame " + std::to_string(i) + ": " + e.what());
  } catch (const FormatError& e) {
    throw DataError("frame " + std::to_string(i) + ": " + e.what());
  }
  if (d.width() != k.width || d.height() != k.height) {
    throw DataError("frame " + std::to_string(i) + ": depth size does not match the calibration");
  }
  return d;
}

// Bounds enclosing the given frames' surface points and camera centers,
// padded on every side by the largest extent.
TsdfVolume make_auto_volume(const PipelineConfig& config, const std::vector<PendingFrame>& frames,
                            const PoseGraph& graph, const CameraIntrinsics& k) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& f : frames) {
    const Pose& pose = graph.node(static_cast<int>(f.index));
    lo = lo.cwiseMin(pose.translation);
    hi = hi.cwiseMax(pose.translation);
    for (int y = 0; y < f.depth.height(); y += 4) {
      for (int x = 0; x < f.depth.width(); x += 4) {
        if (!f.depth.valid(x, y)) continue;
        const double d = f.depth.depth(x, y);
        const Vec3 pw = pose.rotation * Vec3((x - k.cx) * d / k.fx, (y - k.cy) * d / k.fy, d) + pose.translation;
        lo = lo.cwiseMin(pw);
        hi = hi.cwiseMax(pw);
      }
    }
  }
  const double vs = config.tsdf_voxel_size;
  const double pad = std::max((hi - lo).maxCoeff(), 2.0 * config.tsdf_truncation);
  const Vec3 origin = lo - Vec3::Constant(pad);
  std::array<int, 3> dims{};
  for (int a = 0; a < 3; ++a) {
    const double cells = std::ceil((hi[a] - lo[a] + 2.0 * pad) / vs);
    dims[a] = static_cast<int>(std::clamp(cells, 1.0, static_cast<double>(kMaxVolumeDim)));
  }
  return TsdfVolume(origin, vs, dims, config.tsdf_truncation, config.tsdf_max_weight, config.tsdf_color);
}

class Fuser {
 public:
  Fuser(const PipelineConfig& config, const CameraIntrinsics& k, RunStats& stats)
      : config_(config), k_(k), stats_(stats) {}

  void add(PendingFrame frame) { pending_.push_back(std::move(frame)); }

  void flush(const PoseGraph& graph) {
    if (!config_.tsdf_enabled || pending_.empty()) {
      pending_.clear();
      return;
    }
    StageTimer timer(stats_, "tsdf");
    if (!volume_) {
      if (config_.tsdf_dims == std::array<int, 3>{0, 0, 0}) {
        volume_.emplace(make_auto_volume(config_, pending_, graph, k_));
      } else {
        volume_.emplace(config_.tsdf_origin, config_.tsdf_voxel_size, config_.tsdf_dims, config_.tsdf_truncation,
                        config_.tsdf_max_weight, config_.tsdf_color);
      }
    }
    for (const auto& f : pending_) integrate(f, graph.node(static_cast<int>(f.index)));
    pending_.clear();
  }

  void integrate(const PendingFrame& f, const Pose& pose) {
    const IntegrationStats s = volume_->integrate(f.depth, pose, k_, &f.rgb);
    ++stats_.integrated_frames;
    stats_.tsdf_updated_voxels += s.updated_voxels;
    stats_.tsdf_clipped_pixels += s.clipped_pixels;
  }

  // Discards fused data but keeps the volume bounds.
  void reset_volume() {
    if (volume_) {
      volume_.emplace(volume_->origin(), volume_->voxel_size(), volume_->dims(), volume_->truncation(),
                      volume_->max_weight(), volume_->has_color());
    }
    stats_.integrated_frames = 0;
    stats_.tsdf_updated_voxels = 0;
    stats_.tsdf_clipped_pixels = 0;
  }

  std::optional<TsdfVolume>& volume() { return volume_; }

 private:
  const PipelineConfig& config_;
  const CameraIntrinsics& k_;
  RunStats& stats_;
  std::vector<PendingFrame> pending_;
  std::optional<TsdfVolume> volume_;
};

// Optimizes the most recent `window` nodes. Nodes outside the window that
// are reached by an edge join as fixed anchors, as does the window's first node.
void optimize_window(PoseGraph& graph, const PipelineConfig& config, RunStats& stats) {
  const int n = graph.node_count();
  const int start = std::max(0, n - config.pose_graph_window);
  PoseGraph local;
  std::map<int, int> to_local;
  std::vector<int> to_global;
  auto add = [&](int g, bool fixed) {
    const auto it = to_local.find(g);
    if (it != to_local.end()) return it->second;
    const int l = local.add_node(graph.node(g), fixed || graph.is_fixed(g));
    to_local.emplace(g, l);
    to_global.push_back(g);
    return l;
  };
  for (int g = start; g < n; ++g) add(g, g == start);
  for (const auto& e : graph.edges()) {
    if (e.from < start && e.to < start) continue;
    const int a = add(e.from, e.from < start);
    const int b = add(e.to, e.to < start);
    local.add_edge(a, b, e.measurement, e.information);
  }
  const OptimizeResult r = optimize(local, config.pose_graph_optimizer);
  for (int l = 0; l < r.graph.node_count(); ++l) {
    if (!r.graph.is_fixed(l)) graph.set_node(to_global[l], r.graph.node(l));
  }
  ++stats.pose_graph_runs;
  stats.pose_graph_initial_cost = r.stats.initial_cost;
  stats.pose_graph_final_cost = r.stats.final_cost;
}

}  // namespace

void write_stats(const RunStats& s, std::ostream& out) {
  const auto precision = out.precision();
  out << std::setprecision(12);
  out << "frames=" << s.frames << '\n'
      << "frames_predict_only=" << s.frames_predict_only << '\n'
      << "filter_resets=" << s.filter_resets << '\n'
      << "regularized_updates=" << s.regularized_updates << '\n'
      << "mean_inliers=" << s.mean_inliers << '\n'
      << "pose_graph_runs=" << s.pose_graph_runs << '\n'
      << "loop_edges=" << s.loop_edges << '\n'
      << "pose_graph_initial_cost=" << s.pose_graph_initial_cost << '\n'
      << "pose_graph_final_cost=" << s.pose_graph_final_cost << '\n'
      << "integrated_frames=" << s.integrated_frames << '\n'
      << "tsdf_updated_voxels=" << s.tsdf_updated_voxels << '\n'
      << "tsdf_clipped_pixels=" << s.tsdf_clipped_pixels << '\n'
      << "cloud_points=" << s.cloud_points << '\n';
  for (const auto& [stage, seconds] : s.timings) out << "time." << stage << '=' << seconds << '\n';
  out.precision(precision);
}

std::unique_ptr<PoseEstimator> make_pose_estimator(const PipelineConfig& config, const DatasetInfo& info) {
  if (config.pose_source == EstimatorSource::kImport) {
    try {
      return std::make_unique<ImportedPoseEstimator>(load_trajectory(config.pose_import));
    } catch (const ParseError& e) {
      throw ConfigError(config.pose_import + ": " + e.what());
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
  }
  if (!info.groundtruth) throw ConfigError("the oracle pose estimator needs " + info.root + "/groundtruth.txt");
  return std::make_unique<OraclePoseEstimator>(*info.groundtruth, config.pose_noise, config.seed);
}

std::unique_ptr<DepthEstimator> make_depth_estimator(const PipelineConfig& config, const DatasetInfo& info) {
  if (config.depth_source == EstimatorSource::kImport) {
    return std::make_unique<ImportedDepthEstimator>(config.depth_import);
  }
  if (!info.has_depth) throw ConfigError("the oracle depth estimator needs depth maps in " + info.root + "/depth");
  std::vector<DepthMap> gt;
  gt.reserve(info.frame_count);
  for (std::size_t i = 0; i < info.frame_count; ++i) {
    try {
      gt.push_back(load_frame_depth(info, static_cast<std::int64_t>(i)));
    } catch (const std::exception& e) {
      throw DataError("frame " + std::to_string(i) + ": " + e.what());
    }
  }
  return std::make_unique<OracleDepthEstimator>(std::move(gt), config.depth_noise, config.seed + 1);
}

RunResult run_slam(const PipelineConfig& config) {
  config.validate();
  if (config.dataset.empty()) throw ConfigError("no dataset given");
  const DatasetInfo info = inspect_dataset(config.dataset);
  auto poses = make_pose_estimator(config, info);
  auto depths = make_depth_estimator(config, info);
  return run_slam(config, info, *poses, *depths);
}

RunResult run_slam(const PipelineConfig& config, const DatasetInfo& info, PoseEstimator& poses,
                   DepthEstimator& depths) {
  config.validate();
  const CameraIntrinsics& k = info.intrinsics;
  const auto n = static_cast<std::int64_t>(info.frame_count);
  if (n == 0) throw ConfigError("dataset contains no frames");

  std::vector<PoseGraphEdge> loops;
  if (!config.pose_graph_loop_edges.empty()) {
    try {
      loops = read_g2o_edges(config.pose_graph_loop_edges);
    } catch (const ParseError& e) {
      throw ConfigError(config.pose_graph_loop_edges + ": " + e.what());
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
    for (const auto& e : loops) {
      if (e.from >= n || e.to >= n || e.from == e.to) {
        throw ConfigError("loop edge " + std::to_string(e.from) + "-" + std::to_string(e.to) + " is not between frames");
      }
    }
  }

  RunResult result;
  RunStats& stats = result.stats;
  ScaleCorrector corrector(config.ukf, config.ukf_reset_after);
  const Mat6 odometry_info = odometry_information(config.pose_graph_sigma_rot, config.pose_graph_sigma_trans);
  PoseGraph graph;
  Fuser fuser(config, k, stats);
  std::size_t measured_frames = 0;
  double inlier_sum = 0.0;

  RgbImage prev_rgb;
  DepthMap prev_depth;
  {
    StageTimer timer(stats, "load");
    prev_rgb = read_frame(info, 0);
  }
  {
    StageTimer timer(stats, "depth");
    prev_depth = estimate_depth(depths, 0, prev_rgb, k);
  }
  GrayImage prev_gray = to_gray(prev_rgb);
  graph.add_node(Pose::identity(), true);
  fuser.add({0, prev_rgb, prev_depth});
  int since_optimization = 0;

  for (std::int64_t i = 1; i < n; ++i) {
    RgbImage rgb;
    DepthMap depth;
    {
      StageTimer timer(stats, "load");
      rgb = read_frame(info, i);
    }
    {
      StageTimer timer(stats, "depth");
      depth = estimate_depth(depths, i, rgb, k);
    }
    Pose motion;
    {
      StageTimer timer(stats, "pose");
      try {
        motion = to_unscaled(poses.relative_motion({i - 1, &prev_rgb}, {i, &rgb}));
      } catch (const DataError& e) {
        throw DataError("frame " + std::to_string(i) + ": " + e.what());
      }
    }
    const GrayImage gray = to_gray(rgb);
    std::optional<Vec3> t_scaled;
    {
      StageTimer timer(stats, "features");
      const auto est = estimate_frame_motion(prev_gray, prev_depth, gray, depth, k, config.features);
      if (est) {
        t_scaled = est->rigid.motion.translation;
        ++measured_frames;
        inlier_sum += est->rigid.inlier_count;
      }
    }
    Pose corrected;
    {
      StageTimer timer(stats, "ukf");
      corrected = corrector.process(motion, t_scaled);
    }
    const int node = graph.add_node(compose(graph.node(static_cast<int>(i - 1)), corrected));
    graph.add_edge(node - 1, node, corrected, odometry_info);
    for (const auto& e : loops) {
      if (std::max(e.from, e.to) == node) {
        graph.add_edge(e.from, e.to, e.measurement, e.information);
        ++stats.loop_edges;
      }
    }
    fuser.add({i, rgb, depth});
    ++since_optimization;

    if (config.pose_graph_enabled && i % config.pose_graph_cadence == 0) {
      {
        StageTimer timer(stats, "pose_graph");
        optimize_window(graph, config, stats);
      }
      since_optimization = 0;
      fuser.flush(graph);
    } else if (!config.pose_graph_enabled) {
      fuser.flush(graph);
    }

    prev_rgb = std::move(rgb);
    prev_depth = std::move(depth);
    prev_gray = gray;
  }

  if (config.pose_graph_enabled && since_optimization > 0) {
    StageTimer timer(stats, "pose_graph");
    optimize_window(graph, config, stats);
  }
  fuser.flush(graph);

  if (config.tsdf_enabled && config.tsdf_refuse_all && fuser.volume()) {
    StageTimer timer(stats, "tsdf");
    fuser.reset_volume();
    for (std::int64_t i = 0; i < n; ++i) {
      PendingFrame f{i, read_frame(info, i), {}};
      f.depth = estimate_depth(depths, i, f.rgb, k);
      fuser.integrate(f, graph.node(static_cast<int>(i)));
    }
  }

  for (std::int64_t i = 0; i < n; ++i) {
    const double t = info.groundtruth ? (*info.groundtruth)[i].timestamp : i / 30.0;
    result.trajectory.push_back(i, t, graph.node(static_cast<int>(i)));
  }
  stats.frames = info.frame_count;
  stats.frames_predict_only = corrector.frames_predict_only();
  stats.filter_resets = corrector.filter_resets();
  stats.regularized_updates = corrector.state().regularized_updates;
  stats.mean_inliers = measured_frames > 0 ? inlier_sum / measured_frames : 0.0;
  result.volume = std::move(fuser.volume());
  if (result.volume) {
    StageTimer timer(stats, "extract");
    result.cloud = result.volume->extract_surface(config.tsdf_min_weight);
    stats.cloud_points = result.cloud.points.size();
  }
  return result;
}

}  // namespace mvslam
