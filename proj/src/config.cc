#include "mvslam/config.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "mvslam/errors.h"
#include "mvslam/tsdf.h"

namespace mvslam {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ConfigError(key + ": expected a number, got '" + s + "'");
  }
  return v;
}

long long parse_int(const std::string& key, const std::string& s) {
  long long v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw ConfigError(key + ": expected an integer, got '" + s + "'");
  }
  return v;
}

std::uint64_t parse_uint(const std::string& key, const std::string& s) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + s + "'");
}

std::vector<double> parse_list(const std::string& key, std::string s) {
  for (char& c : s) {
    if (c == ',') c = ' ';
  }
  std::istringstream ss(s);
  std::vector<double> out;
  std::string tok;
  while (ss >> tok) out.push_back(parse_double(key, tok));
  return out;
}

// One value (isotropic) or three (diagonal).
Mat3 parse_diag(const std::string& key, const std::string& s) {
  const auto v = parse_list(key, s);
  if (v.size() == 1) return Mat3::Identity() * v[0];
  if (v.size() == 3) return Vec3(v[0], v[1], v[2]).asDiagonal();
  throw ConfigError(key + ": expected 1 or 3 values");
}

std::string format_diag(const Mat3& m) {
  const Vec3 d = m.diagonal();
  if (d.x() == d.y() && d.y() == d.z()) return format_double(d.x());
  return format_double(d.x()) + ' ' + format_double(d.y()) + ' ' + format_double(d.z());
}

EstimatorSource parse_source(const std::string& key, const std::string& s) {
  if (s == "oracle") return EstimatorSource::kOracle;
  if (s == "import") return EstimatorSource::kImport;
  throw ConfigError(key + ": expected oracle or import, got '" + s + "'");
}

std::string format_source(EstimatorSource s) { return s == EstimatorSource::kOracle ? "oracle" : "import"; }

struct Entry {
  ConfigKey key;
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

#define MV_DOUBLE(name, desc, field)                                                              \
  Entry {                                                                                         \
    {name, desc}, [](PipelineConfig& c, const std::string& k, const std::string& v) {             \
      c.field = parse_double(k, v);                                                               \
    },                                                                                            \
        [](const PipelineConfig& c) { return format_double(c.field); }                            \
  }
#define MV_INT(name, desc, field)                                                                 \
  Entry {                                                                                         \
    {name, desc}, [](PipelineConfig& c, const std::string& k, const std::string& v) {             \
      c.field = static_cast<decltype(c.field)>(parse_int(k, v));                                  \
    },                                                                                            \
        [](const PipelineConfig& c) { return std::to_string(c.field); }                           \
  }
#define MV_BOOL(name, desc, field)                                                                \
  Entry {                                                                                         \
    {name, desc}, [](PipelineConfig& c, const std::string& k, const std::string& v) {             \
      c.field = parse_bool(k, v);                                                                 \
    },                                                                                            \
        [](const PipelineConfig& c) { return std::string(c.field ? "true" : "false"); }           \
  }
#define MV_STRING(name, desc, field)                                                              \
  Entry {                                                                                         \
    {name, desc}, [](PipelineConfig& c, const std::string&, const std::string& v) { c.field = v; }, \
        [](const PipelineConfig& c) { return c.field; }                                           \
  }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      MV_STRING("dataset", "input dataset directory", dataset),
      MV_STRING("output", "output directory for trajectory, cloud, volume and stats", output),
      Entry{{"seed", "seed of the oracle estimators"},
            [](PipelineConfig& c, const std::string& k, const std::string& v) { c.seed = parse_uint(k, v); },
            [](const PipelineConfig& c) { return std::to_string(c.seed); }},
      Entry{{"estimator.pose", "frame-to-frame pose source: oracle | import"},
            [](PipelineConfig& c, const std::string& k, const std::string& v) { c.pose_source = parse_source(k, v); },
            [](const PipelineConfig& c) { return format_source(c.pose_source); }},
      Entry{{"estimator.depth", "per-frame depth source: oracle | import"},
            [](PipelineConfig& c, const std::string& k, const std::string& v) { c.depth_source = parse_source(k, v); },
            [](const PipelineConfig& c) { return format_source(c.depth_source); }},
      MV_STRING("estimator.pose_import", "TUM trajectory providing imported relative motions", pose_import),
      MV_STRING("estimator.depth_import", "directory of imported %06d.png / %06d.pfm depth maps", depth_import),
      MV_DOUBLE("oracle.rot_sigma_deg", "oracle pose rotation noise, degrees per axis", pose_noise.rot_sigma_deg),
      MV_DOUBLE("oracle.dir_sigma_deg", "oracle translation direction noise, degrees per axis", pose_noise.dir_sigma_deg),
      MV_DOUBLE("oracle.depth_sigma", "oracle depth log-normal sigma", depth_noise.mult_sigma),
      MV_DOUBLE("oracle.depth_dropout", "oracle depth dropout fraction", depth_noise.dropout_frac),
      MV_DOUBLE("ukf.alpha", "sigma point spread, (0, 1]", ukf.alpha),
      MV_DOUBLE("ukf.beta", "prior distribution weight (2 is optimal for Gaussians)", ukf.beta),
      MV_DOUBLE("ukf.kappa", "secondary spread parameter", ukf.kappa),
      Entry{{"ukf.q_diag", "process noise variance, 1 or 3 values (m^2)"},
            [](PipelineConfig& c, const std::string& k, const std::string& v) { c.ukf.process_noise = parse_diag(k, v); },
            [](const PipelineConfig& c) { return format_diag(c.ukf.process_noise); }},
      Entry{{"ukf.r_diag", "measurement noise variance, 1 or 3 values (m^2)"},
            [](PipelineConfig& c, const std::string& k, const std::string& v) {
              c.ukf.measurement_noise = parse_diag(k, v);
            },
            [](const PipelineConfig& c) { return format_diag(c.ukf.measurement_noise); }},
      MV_DOUBLE("ukf.prior_variance", "initial and reset state variance (m^2)", ukf.prior_variance),
      Entry{{"ukf.measurement", "measurement model: vector | scale"},
            [](PipelineConfig& c, const std::string& k, const std::string& v) {
              if (v == "vector") {
                c.ukf.measurement = MeasurementMode::kVector;
              } else if (v == "scale") {
                c.ukf.measurement = MeasurementMode::kScaleOnly;
              } else {
                throw ConfigError(k + ": expected vector or scale, got '" + v + "'");
              }
            },
            [](const PipelineConfig& c) {
              return std::string(c.ukf.measurement == MeasurementMode::kVector ? "vector" : "scale");
            }},
      MV_INT("ukf.reset_after", "consecutive predict-only frames tolerated before a covariance reset", ukf_reset_after),
      MV_INT("features.max_n", "keypoints per frame", features.max_features),
      Entry{{"features.detector", "corner detector: harris | fast"},
            [](PipelineConfig& c, const std::string& k, const std::string& v) {
              if (v == "harris") {
                c.features.features.detector = DetectorType::kHarris;
              } else if (v == "fast") {
                c.features.features.detector = DetectorType::kFast;
              } else {
                throw ConfigError(k + ": expected harris or fast, got '" + v + "'");
              }
            },
            [](const PipelineConfig& c) {
              return std::string(c.features.features.detector == DetectorType::kHarris ? "harris" : "fast");
            }},
      MV_DOUBLE("features.fast_threshold", "segment test intensity threshold (0..255)", features.features.fast_threshold),
      MV_DOUBLE("features.harris_k", "Harris trace weight", features.features.harris_k),
      MV_DOUBLE("features.harris_quality", "Harris response floor relative to the frame maximum",
                features.features.harris_quality),
      MV_INT("features.grid_cells", "bucketing grid cells per side", features.features.grid_cells),
      MV_DOUBLE("features.match_ratio", "Lowe ratio for descriptor matching", features.match_ratio),
      MV_INT("features.min_inliers", "RANSAC inliers required to accept a metric translation", features.min_inliers),
      MV_DOUBLE("ransac.threshold_m", "RANSAC inlier distance (m)", features.ransac.threshold),
      MV_INT("ransac.max_iterations", "RANSAC iteration cap", features.ransac.max_iterations),
      MV_DOUBLE("ransac.confidence", "RANSAC early-exit confidence", features.ransac.confidence),
      Entry{{"ransac.seed", "RANSAC sampling seed"},
            [](PipelineConfig& c, const std::string& k, const std::string& v) {
              c.features.ransac.seed = parse_uint(k, v);
            },
            [](const PipelineConfig& c) { return std::to_string(c.features.ransac.seed); }},
      MV_BOOL("pose_graph.enabled", "run periodic pose-graph optimization", pose_graph_enabled),
      MV_INT("pose_graph.cadence", "frames between optimizations", pose_graph_cadence),
      MV_INT("pose_graph.window", "most recent nodes optimized each time", pose_graph_window),
      MV_DOUBLE("pose_graph.sigma_rot", "odometry edge rotation sigma (rad)", pose_graph_sigma_rot),
      MV_DOUBLE("pose_graph.sigma_trans", "odometry edge translation sigma (m)", pose_graph_sigma_trans),
      MV_INT("pose_graph.max_iterations", "Levenberg-Marquardt iteration cap", pose_graph_optimizer.max_iterations),
      MV_DOUBLE("pose_graph.lambda0", "initial damping", pose_graph_optimizer.lambda0),
      MV_DOUBLE("pose_graph.tolerance", "relative cost decrease that ends optimization", pose_graph_optimizer.tolerance),
      MV_DOUBLE("pose_graph.huber_delta", "Huber threshold on whitened residuals, 0 = off", pose_graph_optimizer.huber_delta),
      MV_STRING("pose_graph.loop_edges", "g2o file of extra EDGE_SE3:QUAT constraints between frame indices",
                pose_graph_loop_edges),
      MV_BOOL("tsdf.enabled", "fuse depth into a TSDF volume", tsdf_enabled),
      MV_DOUBLE("tsdf.voxel_size", "voxel edge (m)", tsdf_voxel_size),
      MV_DOUBLE("tsdf.truncation", "truncation distance (m), >= 2 voxels", tsdf_truncation),
      MV_DOUBLE("tsdf.max_weight", "weight cap", tsdf_max_weight),
      Entry{{"tsdf.origin", "volume corner x y z (m); used when tsdf.dims is set"},
            [](PipelineConfig& c, const std::string& k, const std::string& v) {
              const auto l = parse_list(k, v);
              if (l.size() != 3) throw ConfigError(k + ": expected 3 values");
              c.tsdf_origin = Vec3(l[0], l[1], l[2]);
            },
            [](const PipelineConfig& c) {
              return format_double(c.tsdf_origin.x()) + ' ' + format_double(c.tsdf_origin.y()) + ' ' +
                     format_double(c.tsdf_origin.z());
            }},
      Entry{{"tsdf.dims", "voxels per axis; 0 0 0 = bounds from the first fused frames"},
            [](PipelineConfig& c, const std::string& k, const std::string& v) {
              const auto l = parse_list(k, v);
              if (l.size() != 3) throw ConfigError(k + ": expected 3 values");
              for (int a = 0; a < 3; ++a) {
                if (l[a] != std::floor(l[a])) throw ConfigError(k + ": expected integers");
                c.tsdf_dims[a] = static_cast<int>(l[a]);
              }
            },
            [](const PipelineConfig& c) {
              return std::to_string(c.tsdf_dims[0]) + ' ' + std::to_string(c.tsdf_dims[1]) + ' ' +
                     std::to_string(c.tsdf_dims[2]);
            }},
      MV_BOOL("tsdf.color", "store per-voxel color", tsdf_color),
      MV_DOUBLE("tsdf.min_weight", "weight required for surface extraction", tsdf_min_weight),
      MV_BOOL("tsdf.refuse_all", "re-fuse all frames with final poses at the end of the run", tsdf_refuse_all),
      Entry{{"metrics.align", "trajectory alignment before ATE: none | se3 | sim3"},
            [](PipelineConfig& c, const std::string& k, const std::string& v) {
              try {
                c.metrics_align = parse_align_mode(v);
              } catch (const InvalidArgument& e) {
                throw ConfigError(k + ": " + e.what());
              }
            },
            [](const PipelineConfig& c) { return std::string(to_string(c.metrics_align)); }},
      MV_INT("metrics.rpe_delta", "frame offset of relative pose errors", metrics_rpe_delta),
      Entry{{"metrics.depth_scaling", "depth evaluation scaling: none | median"},
            [](PipelineConfig& c, const std::string& k, const std::string& v) {
              try {
                c.metrics_depth_scaling = parse_depth_scaling(v);
              } catch (const InvalidArgument& e) {
                throw ConfigError(k + ": " + e.what());
              }
            },
            [](const PipelineConfig& c) { return std::string(to_string(c.metrics_depth_scaling)); }},
  };
  return table;
}

#undef MV_DOUBLE
#undef MV_INT
#undef MV_BOOL
#undef MV_STRING

const Entry& find_entry(const std::string& key) {
  static const std::map<std::string, const Entry*> index = [] {
    std::map<std::string, const Entry*> m;
    for (const auto& e : entries()) m.emplace(e.key.name, &e);
    return m;
  }();
  const auto it = index.find(key);
  if (it == index.end()) throw ConfigError("unknown configuration key '" + key + "'");
  return *it->second;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

void PipelineConfig::validate() const {
  try {
    ukf.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("ukf: ") + e.what());
  }
  require(pose_noise.rot_sigma_deg >= 0.0 && pose_noise.dir_sigma_deg >= 0.0, "oracle pose sigmas must be >= 0");
  require(depth_noise.mult_sigma >= 0.0, "oracle.depth_sigma must be >= 0");
  require(depth_noise.dropout_frac >= 0.0 && depth_noise.dropout_frac < 1.0, "oracle.depth_dropout must be in [0, 1)");
  require(ukf_reset_after >= 0, "ukf.reset_after must be >= 0");
  require(features.max_features >= 3 && features.max_features <= 100000, "features.max_n must be in [3, 100000]");
  require(features.features.fast_threshold > 0.0f && features.features.fast_threshold < 255.0f,
          "features.fast_threshold must be in (0, 255)");
  require(features.features.harris_quality >= 0.0 && features.features.harris_quality < 1.0,
          "features.harris_quality must be in [0, 1)");
  require(features.features.grid_cells >= 1 && features.features.grid_cells <= 64, "features.grid_cells must be in [1, 64]");
  require(features.match_ratio > 0.0 && features.match_ratio <= 1.0, "features.match_ratio must be in (0, 1]");
  require(features.min_inliers >= 3, "features.min_inliers must be >= 3");
  require(features.ransac.threshold > 0.0, "ransac.threshold_m must be > 0");
  require(features.ransac.max_iterations >= 1, "ransac.max_iterations must be >= 1");
  require(features.ransac.confidence > 0.0 && features.ransac.confidence < 1.0, "ransac.confidence must be in (0, 1)");
  require(pose_graph_cadence >= 1, "pose_graph.cadence must be >= 1");
  require(pose_graph_window >= 2, "pose_graph.window must be >= 2");
  require(pose_graph_sigma_rot > 0.0 && pose_graph_sigma_trans > 0.0, "pose-graph sigmas must be > 0");
  require(pose_graph_optimizer.max_iterations >= 0, "pose_graph.max_iterations must be >= 0");
  require(pose_graph_optimizer.lambda0 > 0.0, "pose_graph.lambda0 must be > 0");
  require(pose_graph_optimizer.tolerance >= 0.0, "pose_graph.tolerance must be >= 0");
  require(pose_graph_optimizer.huber_delta >= 0.0, "pose_graph.huber_delta must be >= 0");
  require(tsdf_voxel_size > 0.0, "tsdf.voxel_size must be > 0");
  require(tsdf_truncation >= 2.0 * tsdf_voxel_size, "tsdf.truncation must be >= 2 * tsdf.voxel_size");
  require(tsdf_max_weight > 0.0f, "tsdf.max_weight must be > 0");
  require(tsdf_min_weight >= 0.0f, "tsdf.min_weight must be >= 0");
  const bool auto_dims = tsdf_dims == std::array<int, 3>{0, 0, 0};
  for (int d : tsdf_dims) {
    require(auto_dims || (d >= 1 && d <= kMaxVolumeDim), "tsdf.dims must be 0 0 0 or each in [1, 512]");
  }
  require(metrics_rpe_delta >= 1, "metrics.rpe_delta must be >= 1");
  if (pose_source == EstimatorSource::kImport) require(!pose_import.empty(), "estimator.pose_import is required");
  if (depth_source == EstimatorSource::kImport) require(!depth_import.empty(), "estimator.depth_import is required");
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& e : entries()) k.push_back(e.key);
    return k;
  }();
  return keys;
}

void set_config_value(PipelineConfig& config, const std::string& key, const std::string& value) {
  find_entry(key).set(config, key, trim(value));
}

std::string get_config_value(const PipelineConfig& config, const std::string& key) {
  return find_entry(key).get(config);
}

void load_config(std::istream& in, PipelineConfig& config) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      set_config_value(config, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void load_config(const std::string& path, PipelineConfig& config) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  load_config(in, config);
}

void dump_config(const PipelineConfig& config, std::ostream& out) {
  for (const auto& e : entries()) {
    out << "# " << e.key.description << '\n' << e.key.name << " = " << e.get(config) << '\n';
  }
}

}  // namespace mvslam
