// Command-line front end. Exit codes: 0 success, 2 configuration or usage
// error, 3 data error.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mvslam/config.h"
#include "mvslam/dataset.h"
#include "mvslam/errors.h"
#include "mvslam/metrics.h"
#include "mvslam/pipeline.h"
#include "mvslam/statistics.h"
#include "mvslam/synth.h"
#include "mvslam/trajectory.h"
#include "mvslam/tsdf.h"

namespace fs = std::filesystem;
using namespace mvslam;

namespace {

constexpr int kConfigExit = 2;
constexpr int kDataExit = 3;

void apply_overrides(PipelineConfig& config, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    set_config_value(config, s.substr(0, eq), s.substr(eq + 1));
  }
}

PipelineConfig build_config(const std::string& path, const std::vector<std::string>& sets) {
  PipelineConfig config;
  if (!path.empty()) load_config(path, config);
  apply_overrides(config, sets);
  config.validate();
  return config;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

void emit_report(const MetricReport& report, const std::string& path) {
  if (path.empty()) {
    write_report(report, std::cout);
  } else {
    auto out = open_output(path);
    write_report(report, out);
  }
}

// --- synth-gen --------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::string scene = "sphere";
  std::string path = "arc";
  std::string depth_format = "pfm";
  std::uint64_t seed = 7;
  SyntheticScene params;
};

int cmd_synth_gen(const SynthArgs& a) {
  SyntheticScene scene = a.params;
  if (a.scene == "sphere") {
    scene.geometry.type = PrimitiveType::kSphere;
  } else if (a.scene == "box") {
    scene.geometry.type = PrimitiveType::kBox;
  } else if (a.scene == "plane") {
    scene.geometry.type = PrimitiveType::kPlane;
    scene.path.view = ViewMode::kTarget;
    scene.path.target = scene.geometry.plane_point;
  } else {
    throw ConfigError("unknown scene '" + a.scene + "'");
  }
  if (a.path == "arc") {
    scene.path.type = PathType::kArc;
  } else if (a.path == "helix") {
    scene.path.type = PathType::kHelix;
  } else if (a.path == "random-walk") {
    scene.path.type = PathType::kRandomWalk;
  } else {
    throw ConfigError("unknown path '" + a.path + "'");
  }
  const DepthFormat format = a.depth_format == "png" ? DepthFormat::kPng16 : DepthFormat::kPfm;
  if (a.depth_format != "png" && a.depth_format != "pfm") throw ConfigError("depth format must be png or pfm");

  SyntheticSequence seq;
  try {
    seq = generate_sequence(scene, a.seed);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  const fs::path root(a.out);
  fs::create_directories(root / "rgb");
  fs::create_directories(root / "depth");
  const std::string ext = format == DepthFormat::kPfm ? ".pfm" : ".png";
  for (std::size_t i = 0; i < seq.rgb.size(); ++i) {
    const std::string name = frame_name(static_cast<std::int64_t>(i));
    save_rgb_png(seq.rgb[i], (root / "rgb" / (name + ".png")).string());
    save_depth(seq.depth[i], (root / "depth" / (name + ext)).string(), format);
  }
  save_trajectory(seq.groundtruth, (root / "groundtruth.txt").string());
  save_calibration(seq.intrinsics, (root / "calib.txt").string());
  std::cout << "wrote " << seq.rgb.size() << " frames to " << root.string() << '\n';
  return 0;
}

// --- run --------------------------------------------------------------------

int cmd_run(const std::string& config_path, const std::vector<std::string>& sets, const std::string& dataset,
            const std::string& out_dir) {
  PipelineConfig config = build_config(config_path, sets);
  if (!dataset.empty()) config.dataset = dataset;
  if (!out_dir.empty()) config.output = out_dir;
  if (config.output.empty()) throw ConfigError("no output directory given");
  const RunResult r = run_slam(config);

  const fs::path out(config.output);
  fs::create_directories(out);
  save_trajectory(r.trajectory, (out / "trajectory.txt").string());
  {
    auto f = open_output(out / "stats.txt");
    write_stats(r.stats, f);
  }
  {
    auto f = open_output(out / "config.txt");
    dump_config(config, f);
  }
  if (r.volume) {
    r.volume->save((out / "volume.tsdf").string());
    write_ply(r.cloud, (out / "cloud.ply").string());
  }
  write_stats(r.stats, std::cout);
  return 0;
}

// --- eval-traj --------------------------------------------------------------

int cmd_eval_traj(const std::string& est_path, const std::string& gt_path, const std::string& align, int delta,
                  const std::string& report_path, const std::string& csv_prefix) {
  AlignMode mode;
  try {
    mode = parse_align_mode(align);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (delta < 1) throw ConfigError("--delta must be >= 1");
  const Trajectory est = load_trajectory(est_path);
  const Trajectory gt = load_trajectory(gt_path);
  const MetricReport a = ate(est, gt, mode);
  const RpeReport rel = rpe(est, gt, delta);

  std::ostringstream text;
  write_report(a, text);
  MetricReport rpe_only;
  rpe_only.metrics = {rel.rte.metrics.front(), rel.rre.metrics.front()};
  write_report(rpe_only, text);
  text << "rpe.delta=" << delta << '\n';
  if (report_path.empty()) {
    std::cout << text.str();
  } else {
    auto f = open_output(report_path);
    f << text.str();
  }
  if (!csv_prefix.empty()) {
    auto f1 = open_output(csv_prefix + "_ate.csv");
    write_samples_csv(a, f1);
    MetricReport rpe_csv = rel.rte;
    rpe_csv.metrics.push_back(rel.rre.metrics.front());
    auto f2 = open_output(csv_prefix + "_rpe.csv");
    write_samples_csv(rpe_csv, f2);
  }
  return 0;
}

// --- eval-depth -------------------------------------------------------------

std::string depth_file(const fs::path& dir, std::int64_t i) {
  const fs::path pfm = dir / (frame_name(i) + ".pfm");
  if (fs::exists(pfm)) return pfm.string();
  const fs::path png = dir / (frame_name(i) + ".png");
  if (fs::exists(png)) return png.string();
  return {};
}

int cmd_eval_depth(const std::string& pred_dir, const std::string& gt_dir, const std::string& scaling_name,
                   const std::string& report_path, const std::string& csv_path) {
  DepthScaling scaling;
  try {
    scaling = parse_depth_scaling(scaling_name);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (!fs::is_directory(pred_dir) || !fs::is_directory(gt_dir)) throw ConfigError("depth directories must exist");
  std::vector<DepthErrors> frames;
  std::vector<std::int64_t> ids;
  for (std::int64_t i = 0;; ++i) {
    const std::string g = depth_file(gt_dir, i);
    if (g.empty()) break;
    const std::string p = depth_file(pred_dir, i);
    if (p.empty()) throw DataError("no predicted depth for frame " + std::to_string(i));
    frames.push_back(compute_depth_errors(load_depth(p), load_depth(g), scaling));
    ids.push_back(i);
  }
  if (frames.empty()) throw ConfigError("no ground-truth depth maps in " + gt_dir);
  const MetricReport report = summarize_depth(frames, ids, scaling);
  emit_report(report, report_path);
  if (!csv_path.empty()) {
    auto f = open_output(csv_path);
    write_samples_csv(report, f);
  }
  return 0;
}

// --- compare ----------------------------------------------------------------

std::vector<double> read_csv_column(const std::string& path, const std::string& column, std::string* chosen) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + " is empty");
  std::vector<std::string> names;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) names.push_back(cell);
  }
  int index = -1;
  for (std::size_t c = 0; c < names.size(); ++c) {
    if ((column.empty() && names[c] != "id") || names[c] == column) {
      index = static_cast<int>(c);
      break;
    }
  }
  if (index < 0) throw DataError(path + " has no column '" + column + "'");
  *chosen = names[index];
  std::vector<double> values;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    for (int c = 0; c <= index; ++c) {
      if (!std::getline(ss, cell, ',')) throw ParseError(path + ": short row", line_no);
    }
    try {
      std::size_t used = 0;
      values.push_back(std::stod(cell, &used));
    } catch (const std::exception&) {
      throw ParseError(path + ": not a number '" + cell + "'", line_no);
    }
  }
  return values;
}

int cmd_compare(const std::string& a_path, const std::string& b_path, const std::string& column,
                const std::string& report_path) {
  std::string col_a, col_b;
  const auto a = read_csv_column(a_path, column, &col_a);
  const auto b = read_csv_column(b_path, column.empty() ? col_a : column, &col_b);
  const TTestResult t = two_sample_ttest(a, b);
  const FTestResult f = variance_equality_test(a, b);
  const NormalityCheck na = normality_check(a);
  const NormalityCheck nb = normality_check(b);
  std::ostringstream out;
  out << std::setprecision(12) << "metric=" << col_a << '\n'
      << "n_a=" << a.size() << '\n'
      << "n_b=" << b.size() << '\n'
      << "ttest.t=" << t.t << '\n'
      << "ttest.df=" << t.df << '\n'
      << "ttest.p=" << t.p_value << '\n'
      << "ttest.degenerate=" << (t.degenerate ? "true" : "false") << '\n'
      << "ttest.significant_0.05=" << (t.p_value < 0.05 ? "true" : "false") << '\n'
      << "ftest.f=" << f.f << '\n'
      << "ftest.df_num=" << f.df_numerator << '\n'
      << "ftest.df_den=" << f.df_denominator << '\n'
      << "ftest.p=" << f.p_value << '\n'
      << "ftest.degenerate=" << (f.degenerate ? "true" : "false") << '\n'
      << "normality_a.skewness=" << na.skewness << '\n'
      << "normality_a.excess_kurtosis=" << na.excess_kurtosis << '\n'
      << "normality_a.jarque_bera=" << na.jarque_bera << '\n'
      << "normality_a.p=" << na.p_value << '\n'
      << "normality_b.skewness=" << nb.skewness << '\n'
      << "normality_b.excess_kurtosis=" << nb.excess_kurtosis << '\n'
      << "normality_b.jarque_bera=" << nb.jarque_bera << '\n'
      << "normality_b.p=" << nb.p_value << '\n';
  if (report_path.empty()) {
    std::cout << out.str();
  } else {
    auto file = open_output(report_path);
    file << out.str();
  }
  return 0;
}

// --- fuse -------------------------------------------------------------------

int cmd_fuse(const std::string& config_path, const std::vector<std::string>& sets, const std::string& dataset,
             const std::string& trajectory_path, const std::string& depth_dir, const std::string& out_path) {
  PipelineConfig config = build_config(config_path, sets);
  if (!dataset.empty()) config.dataset = dataset;
  if (config.dataset.empty()) throw ConfigError("no dataset given");
  const DatasetInfo info = inspect_dataset(config.dataset);
  const Trajectory traj = load_trajectory(trajectory_path);
  if (traj.empty()) throw DataError(trajectory_path + " holds no poses");

  auto load_depth_for = [&](std::int64_t i) {
    if (!depth_dir.empty()) {
      const std::string p = depth_file(depth_dir, i);
      if (p.empty()) throw DataError("no depth for frame " + std::to_string(i) + " in " + depth_dir);
      return load_depth(p);
    }
    return load_frame_depth(info, i);
  };

  std::optional<TsdfVolume> volume;
  if (config.tsdf_dims != std::array<int, 3>{0, 0, 0}) {
    volume.emplace(config.tsdf_origin, config.tsdf_voxel_size, config.tsdf_dims, config.tsdf_truncation,
                   config.tsdf_max_weight, config.tsdf_color);
  } else {
    // Bounds from camera centers and the first frame's surface, padded by the extent.
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
    const auto& k = info.intrinsics;
    for (const auto& e : traj) {
      lo = lo.cwiseMin(e.pose.translation);
      hi = hi.cwiseMax(e.pose.translation);
    }
    const DepthMap d0 = load_depth_for(traj[0].frame_id);
    for (int y = 0; y < d0.height(); y += 4) {
      for (int x = 0; x < d0.width(); x += 4) {
        if (!d0.valid(x, y)) continue;
        const double z = d0.depth(x, y);
        const Vec3 p = traj[0].pose.rotation * Vec3((x - k.cx) * z / k.fx, (y - k.cy) * z / k.fy, z) +
                       traj[0].pose.translation;
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
      }
    }
    const double pad = std::max((hi - lo).maxCoeff(), 2.0 * config.tsdf_truncation);
    std::array<int, 3> dims{};
    for (int a = 0; a < 3; ++a) {
      dims[a] = static_cast<int>(std::min<double>(std::ceil((hi[a] - lo[a] + 2 * pad) / config.tsdf_voxel_size),
                                                  kMaxVolumeDim));
    }
    volume.emplace(Vec3(lo - Vec3::Constant(pad)), config.tsdf_voxel_size, dims, config.tsdf_truncation,
                   config.tsdf_max_weight, config.tsdf_color);
  }
  std::size_t clipped = 0;
  for (const auto& e : traj) {
    if (e.frame_id < 0 || static_cast<std::size_t>(e.frame_id) >= info.frame_count) {
      throw DataError("trajectory frame " + std::to_string(e.frame_id) + " is not in the dataset");
    }
    const RgbImage rgb = load_frame_rgb(info, e.frame_id);
    clipped += volume->integrate(load_depth_for(e.frame_id), e.pose, info.intrinsics, &rgb).clipped_pixels;
  }
  const PointCloud cloud = volume->extract_surface(config.tsdf_min_weight);
  write_ply(cloud, out_path);
  std::cout << "points=" << cloud.points.size() << "\nclipped_pixels=" << clipped << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monocular SLAM backend: synthetic data, pipeline runs and evaluation"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* gen = app.add_subcommand("synth-gen", "Render a synthetic dataset in the canonical layout");
  gen->add_option("--out", synth.out, "Output dataset directory")->required();
  gen->add_option("--scene", synth.scene, "sphere | box | plane")->capture_default_str();
  gen->add_option("--path", synth.path, "arc | helix | random-walk")->capture_default_str();
  gen->add_option("--frames", synth.params.path.frames, "Frame count")->capture_default_str();
  gen->add_option("--seed", synth.seed, "Texture and random-walk seed")->capture_default_str();
  gen->add_option("--radius", synth.params.geometry.radius, "Sphere radius (m)")->capture_default_str();
  gen->add_option("--path-radius", synth.params.path.radius, "Arc/helix radius or random-walk bound (m)")
      ->capture_default_str();
  gen->add_option("--span", synth.params.path.span, "Arc/helix sweep (rad)")->capture_default_str();
  gen->add_option("--rise", synth.params.path.rise, "Helix rise (m)")->capture_default_str();
  gen->add_option("--step", synth.params.path.step, "Random-walk step (m)")->capture_default_str();
  gen->add_option("--width", synth.params.intrinsics.width, "Image width (px)")->capture_default_str();
  gen->add_option("--height", synth.params.intrinsics.height, "Image height (px)")->capture_default_str();
  gen->add_option("--fx", synth.params.intrinsics.fx, "Focal length x (px)")->capture_default_str();
  gen->add_option("--fy", synth.params.intrinsics.fy, "Focal length y (px)")->capture_default_str();
  gen->add_option("--cx", synth.params.intrinsics.cx, "Principal point x (px)")->capture_default_str();
  gen->add_option("--cy", synth.params.intrinsics.cy, "Principal point y (px)")->capture_default_str();
  gen->add_option("--cell-size", synth.params.texture.cell_size, "Checker cell edge (m)")->capture_default_str();
  gen->add_option("--edge-width", synth.params.texture.edge_width, "Checker edge transition width (m)")
      ->capture_default_str();
  gen->add_option("--noise-amplitude", synth.params.texture.noise_amplitude, "Texture noise amplitude")
      ->capture_default_str();
  gen->add_option("--depth-format", synth.depth_format, "pfm (meters) | png (16-bit mm)")->capture_default_str();

  std::string config_path, dataset, out_dir;
  std::vector<std::string> sets;
  auto* run = app.add_subcommand("run", "Run the full pipeline on a dataset");
  run->add_option("--config", config_path, "key=value configuration file");
  run->add_option("--set", sets, "Override one key: --set ukf.alpha=0.5 (repeatable)");
  run->add_option("--dataset", dataset, "Dataset directory (overrides the config)");
  run->add_option("--out", out_dir, "Output directory (overrides the config)");

  std::string est_path, gt_path, align = "sim3", report_path, csv_prefix;
  int delta = 1;
  auto* eval_traj = app.add_subcommand("eval-traj", "ATE / RTE / RRE of a trajectory against ground truth");
  eval_traj->add_option("--est", est_path, "Estimated TUM trajectory")->required();
  eval_traj->add_option("--gt", gt_path, "Ground-truth TUM trajectory")->required();
  eval_traj->add_option("--align", align, "none | se3 | sim3")->capture_default_str();
  eval_traj->add_option("--delta", delta, "RPE frame offset")->capture_default_str();
  eval_traj->add_option("--report", report_path, "Report file (default stdout)");
  eval_traj->add_option("--csv", csv_prefix, "Write <prefix>_ate.csv and <prefix>_rpe.csv");

  std::string pred_dir, gt_dir, scaling = "median", csv_path;
  auto* eval_depth = app.add_subcommand("eval-depth", "Depth error suite over two directories of depth maps");
  eval_depth->add_option("--pred", pred_dir, "Predicted depth directory")->required();
  eval_depth->add_option("--gt", gt_dir, "Ground-truth depth directory")->required();
  eval_depth->add_option("--scaling", scaling, "none | median")->capture_default_str();
  eval_depth->add_option("--report", report_path, "Report file (default stdout)");
  eval_depth->add_option("--csv", csv_path, "Per-frame samples CSV");

  std::string csv_a, csv_b, column;
  auto* compare = app.add_subcommand("compare", "Two-sample t-test, F-test and normality check of two sample CSVs");
  compare->add_option("a", csv_a, "First samples CSV")->required();
  compare->add_option("b", csv_b, "Second samples CSV")->required();
  compare->add_option("--metric", column, "Column to compare (default: first non-id column)");
  compare->add_option("--report", report_path, "Report file (default stdout)");

  std::string trajectory_path, depth_dir, ply_path;
  auto* fuse = app.add_subcommand("fuse", "Fuse depth maps along a trajectory into a PLY point cloud");
  fuse->add_option("--config", config_path, "key=value configuration file (tsdf.* keys)");
  fuse->add_option("--set", sets, "Override one key (repeatable)");
  fuse->add_option("--dataset", dataset, "Dataset directory (rgb, calib and default depth)");
  fuse->add_option("--trajectory", trajectory_path, "Camera-to-world TUM trajectory")->required();
  fuse->add_option("--depth", depth_dir, "Depth directory replacing the dataset's depth/");
  fuse->add_option("--out", ply_path, "Output PLY")->required();

  auto* dump = app.add_subcommand("config-dump", "Print every configuration key with its effective value");
  dump->add_option("--config", config_path, "Configuration file to merge over the defaults");
  dump->add_option("--set", sets, "Override one key (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigExit;
  }

  try {
    if (*gen) return cmd_synth_gen(synth);
    if (*run) return cmd_run(config_path, sets, dataset, out_dir);
    if (*eval_traj) return cmd_eval_traj(est_path, gt_path, align, delta, report_path, csv_prefix);
    if (*eval_depth) return cmd_eval_depth(pred_dir, gt_dir, scaling, report_path, csv_path);
    if (*compare) return cmd_compare(csv_a, csv_b, column, report_path);
    if (*fuse) return cmd_fuse(config_path, sets, dataset, trajectory_path, depth_dir, ply_path);
    if (*dump) {
      PipelineConfig config;
      if (!config_path.empty()) load_config(config_path, config);
      apply_overrides(config, sets);
      dump_config(config, std::cout);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kConfigExit;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kDataExit;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataExit;
  }
  return kConfigExit;
}
