#include "mvslam/metrics.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

#include <Eigen/SVD>

#include "mvslam/errors.h"
#include "mvslam/statistics.h"

namespace mvslam {

MetricSummary MetricSummary::from_samples(std::string name, std::vector<double> samples) {
  if (samples.empty()) throw InsufficientData("metric '" + name + "' has no samples");
  MetricSummary s;
  s.name = std::move(name);
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double sum = 0.0, sum_sq = 0.0;
  for (double v : samples) {
    sum += v;
    sum_sq += v * v;
  }
  s.mean = sum / n;
  double var = 0.0;
  for (double v : samples) var += (v - s.mean) * (v - s.mean);
  s.std_dev = std::sqrt(var / n);
  s.rmse = std::sqrt(sum_sq / n);
  s.min = sorted.front();
  s.max = sorted.back();
  s.median = quantile_sorted(sorted, 0.5);
  s.q1 = quantile_sorted(sorted, 0.25);
  s.q3 = quantile_sorted(sorted, 0.75);
  s.iqr = s.q3 - s.q1;
  s.samples = std::move(samples);
  return s;
}

const MetricSummary& MetricReport::get(const std::string& name) const {
  for (const auto& m : metrics) {
    if (m.name == name) return m;
  }
  throw std::out_of_range("no metric named " + name);
}

void write_report(const MetricReport& report, std::ostream& out) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::setprecision(12);
  for (const auto& [key, value] : report.header) out << key << '=' << value << '\n';
  for (const auto& m : report.metrics) {
    out << m.name << ".count=" << m.count() << '\n';
    out << m.name << ".mean=" << m.mean << '\n';
    out << m.name << ".median=" << m.median << '\n';
    out << m.name << ".q1=" << m.q1 << '\n';
    out << m.name << ".q3=" << m.q3 << '\n';
    out << m.name << ".iqr=" << m.iqr << '\n';
    out << m.name << ".rmse=" << m.rmse << '\n';
    out << m.name << ".std=" << m.std_dev << '\n';
    out << m.name << ".min=" << m.min << '\n';
    out << m.name << ".max=" << m.max << '\n';
  }
  out.flags(flags);
  out.precision(precision);
}

void write_samples_csv(const MetricReport& report, std::ostream& out) {
  const auto precision = out.precision();
  out << std::setprecision(12) << "id";
  for (const auto& m : report.metrics) out << ',' << m.name;
  out << '\n';
  const std::size_t rows = report.metrics.empty() ? 0 : report.metrics.front().count();
  for (std::size_t r = 0; r < rows; ++r) {
    out << (r < report.sample_ids.size() ? report.sample_ids[r] : static_cast<std::int64_t>(r));
    for (const auto& m : report.metrics) out << ',' << m.samples[r];
    out << '\n';
  }
  out.precision(precision);
}

Pose Sim3::apply(const Pose& p) const {
  return Pose{rotation * p.rotation, scale * (rotation * p.translation) + translation, true};
}

Sim3 umeyama(std::span<const Vec3> src, std::span<const Vec3> dst, bool with_scale) {
  if (src.size() != dst.size()) throw InvalidArgument("umeyama: point counts differ");
  if (src.size() < 3) throw AlignmentFailed("umeyama needs at least 3 point pairs");
  const double n = static_cast<double>(src.size());
  Vec3 mu_s = Vec3::Zero(), mu_d = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= n;
  mu_d /= n;
  Mat3 cov = Mat3::Zero(), src_cov = Mat3::Zero();
  double var_s = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec3 ds = src[i] - mu_s;
    cov += (dst[i] - mu_d) * ds.transpose();
    src_cov += ds * ds.transpose();
    var_s += ds.squaredNorm();
  }
  cov /= n;
  var_s /= n;

  const Eigen::JacobiSVD<Mat3> src_svd(src_cov);
  const Vec3 src_sv = src_svd.singularValues();
  if (!(src_sv(0) > 0.0) || src_sv(1) < 1e-12 * src_sv(0)) {
    throw AlignmentFailed("umeyama: source points are collinear");
  }

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 s = Mat3::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s(2, 2) = -1.0;
  Sim3 out;
  out.rotation = svd.matrixU() * s * svd.matrixV().transpose();
  out.scale = with_scale ? (svd.singularValues().asDiagonal() * s).trace() / var_s : 1.0;
  out.translation = mu_d - out.scale * (out.rotation * mu_s);
  return out;
}

namespace {

struct Association {
  std::vector<std::size_t> est;
  std::vector<std::size_t> gt;
};

Association associate(const Trajectory& est, const Trajectory& gt) {
  std::unordered_map<std::int64_t, std::size_t> gt_index;
  for (std::size_t i = 0; i < gt.size(); ++i) gt_index.emplace(gt[i].frame_id, i);
  Association a;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const auto it = gt_index.find(est[i].frame_id);
    if (it == gt_index.end()) continue;
    a.est.push_back(i);
    a.gt.push_back(it->second);
  }
  return a;
}

}  // namespace

Sim3 align_umeyama(const Trajectory& est, const Trajectory& gt, bool with_scale) {
  const Association a = associate(est, gt);
  std::vector<Vec3> src, dst;
  for (std::size_t k = 0; k < a.est.size(); ++k) {
    src.push_back(gt[a.gt[k]].pose.translation);
    dst.push_back(est[a.est[k]].pose.translation);
  }
  return umeyama(src, dst, with_scale);
}

const char* to_string(AlignMode mode) {
  switch (mode) {
    case AlignMode::kNone: return "none";
    case AlignMode::kSe3: return "se3";
    case AlignMode::kSim3: return "sim3";
  }
  return "?";
}

AlignMode parse_align_mode(const std::string& s) {
  if (s == "none") return AlignMode::kNone;
  if (s == "se3") return AlignMode::kSe3;
  if (s == "sim3") return AlignMode::kSim3;
  throw InvalidArgument("unknown alignment mode '" + s + "'");
}

MetricReport ate(const Trajectory& est, const Trajectory& gt, AlignMode align) {
  const Association a = associate(est, gt);
  if (a.est.size() < 2) throw InsufficientData("ATE needs at least 2 associated poses");

  Sim3 alignment;
  if (align != AlignMode::kNone) {
    std::vector<Vec3> src, dst;
    for (std::size_t k = 0; k < a.est.size(); ++k) {
      src.push_back(est[a.est[k]].pose.translation);
      dst.push_back(gt[a.gt[k]].pose.translation);
    }
    alignment = umeyama(src, dst, align == AlignMode::kSim3);
  }

  MetricReport report;
  report.header.emplace_back("alignment", to_string(align));
  report.header.emplace_back("alignment.scale", std::to_string(alignment.scale));
  std::vector<double> errors;
  for (std::size_t k = 0; k < a.est.size(); ++k) {
    const Pose aligned = alignment.apply(est[a.est[k]].pose);
    const Pose e = compose(inverse(gt[a.gt[k]].pose), aligned);
    errors.push_back(e.translation.norm());
    report.sample_ids.push_back(est[a.est[k]].frame_id);
  }
  report.metrics.push_back(MetricSummary::from_samples("ate", std::move(errors)));
  return report;
}

RpeReport rpe(const Trajectory& est, const Trajectory& gt, int delta) {
  if (delta < 1) throw InvalidArgument("RPE delta must be >= 1");
  const Association a = associate(est, gt);
  if (a.est.size() <= static_cast<std::size_t>(delta)) {
    throw InsufficientData("RPE needs more than delta associated poses");
  }
  RpeReport out;
  std::vector<double> rte, rre;
  std::vector<std::int64_t> ids;
  for (std::size_t i = 0; i + delta < a.est.size(); ++i) {
    const std::size_t j = i + delta;
    const Pose gt_rel = compose(inverse(gt[a.gt[i]].pose), gt[a.gt[j]].pose);
    const Pose est_rel = compose(inverse(est[a.est[i]].pose), est[a.est[j]].pose);
    const Pose e = compose(inverse(gt_rel), est_rel);
    rte.push_back(e.translation.norm());
    rre.push_back(so3_log(e.rotation).angle * 180.0 / std::numbers::pi);
    ids.push_back(est[a.est[i]].frame_id);
  }
  const std::pair<std::string, std::string> delta_entry{"delta", std::to_string(delta)};
  out.rte.header.push_back(delta_entry);
  out.rre.header.push_back(delta_entry);
  out.rte.sample_ids = ids;
  out.rre.sample_ids = std::move(ids);
  out.rte.metrics.push_back(MetricSummary::from_samples("rte", std::move(rte)));
  out.rre.metrics.push_back(MetricSummary::from_samples("rre", std::move(rre)));
  return out;
}

const char* to_string(DepthScaling scaling) {
  return scaling == DepthScaling::kMedian ? "median" : "none";
}

DepthScaling parse_depth_scaling(const std::string& s) {
  if (s == "none") return DepthScaling::kNone;
  if (s == "median") return DepthScaling::kMedian;
  throw InvalidArgument("unknown depth scaling '" + s + "'");
}

DepthErrors compute_depth_errors(const DepthMap& pred, const DepthMap& gt, DepthScaling scaling) {
  if (pred.width() != gt.width() || pred.height() != gt.height()) {
    throw InvalidArgument("depth maps differ in size");
  }
  std::vector<double> p, t;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (pred.valid(x, y) && gt.valid(x, y)) {
        p.push_back(pred.depth(x, y));
        t.push_back(gt.depth(x, y));
      }
    }
  }
  if (p.empty()) throw InsufficientData("no pixel is valid in both depth maps");

  DepthErrors e;
  e.pixels = p.size();
  if (scaling == DepthScaling::kMedian) {
    e.scale = quantile(t, 0.5) / quantile(p, 0.5);
    for (double& v : p) v *= e.scale;
  }
  const double n = static_cast<double>(p.size());
  double abs_rel = 0, sq_rel = 0, sq = 0, sq_log = 0;
  std::size_t a1 = 0, a2 = 0, a3 = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double diff = p[i] - t[i];
    abs_rel += std::abs(diff) / t[i];
    sq_rel += (diff / t[i]) * (diff / t[i]);
    sq += diff * diff;
    const double log_diff = std::log(p[i]) - std::log(t[i]);
    sq_log += log_diff * log_diff;
    const double ratio = std::max(p[i] / t[i], t[i] / p[i]);
    a1 += ratio < 1.25;
    a2 += ratio < 1.25 * 1.25;
    a3 += ratio < 1.25 * 1.25 * 1.25;
  }
  e.abs_rel = abs_rel / n;
  e.sq_rel = sq_rel / n;
  e.rmse = std::sqrt(sq / n);
  e.rmse_log = std::sqrt(sq_log / n);
  e.a1 = static_cast<double>(a1) / n;
  e.a2 = static_cast<double>(a2) / n;
  e.a3 = static_cast<double>(a3) / n;
  return e;
}

MetricReport summarize_depth(std::span<const DepthErrors> frames, std::span<const std::int64_t> ids,
                             DepthScaling scaling) {
  if (frames.empty()) throw InsufficientData("no depth frames to summarize");
  MetricReport report;
  report.header.emplace_back("depth_scaling", to_string(scaling));
  report.sample_ids.assign(ids.begin(), ids.end());
  std::array<std::vector<double>, 7> columns;
  for (const DepthErrors& e : frames) {
    const std::array<double, 7> v{e.abs_rel, e.sq_rel, e.rmse, e.rmse_log, e.a1, e.a2, e.a3};
    for (int k = 0; k < 7; ++k) columns[k].push_back(v[k]);
  }
  for (int k = 0; k < 7; ++k) {
    report.metrics.push_back(MetricSummary::from_samples(kDepthMetricNames[k], std::move(columns[k])));
  }
  return report;
}

MetricReport depth_metrics(const DepthMap& pred, const DepthMap& gt, DepthScaling scaling) {
  const DepthErrors e = compute_depth_errors(pred, gt, scaling);
  const std::int64_t id = 0;
  return summarize_depth(std::span<const DepthErrors>(&e, 1), std::span<const std::int64_t>(&id, 1),
                         scaling);
}

}  // namespace mvslam
