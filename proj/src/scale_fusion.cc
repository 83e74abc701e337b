#include "mvslam/scale_fusion.h"

#include <array>
#include <cmath>
#include <iostream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "mvslam/errors.h"

namespace mvslam {
namespace {

constexpr int kN = UkfParams::kStateDim;
constexpr int kSigmaCount = 2 * kN + 1;
constexpr double kDirectionEpsilon = 1e-15;

using SigmaPoints = std::array<Vec3, kSigmaCount>;

struct Weights {
  double mean0;
  double cov0;
  double other;
};

Weights weights(const UkfParams& p) {
  const double lambda = p.lambda();
  const double mean0 = lambda / (kN + lambda);
  return {mean0, mean0 + (1.0 - p.alpha * p.alpha + p.beta), 0.5 / (kN + lambda)};
}

bool is_psd(const Mat3& m) {
  if (!m.allFinite()) return false;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + m.cwiseAbs().maxCoeff())) {
    return false;
  }
  Eigen::SelfAdjointEigenSolver<Mat3> es(m);
  return es.eigenvalues().minCoeff() >= -1e-12 * (1.0 + m.cwiseAbs().maxCoeff());
}

// Symmetrizes and clips negative eigenvalues to zero.
Mat3 make_psd(const Mat3& m) {
  Mat3 sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Mat3> es(sym);
  if (es.eigenvalues().minCoeff() >= 0.0) return sym;
  const Vec3 clipped = es.eigenvalues().cwiseMax(0.0);
  sym = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (sym + sym.transpose());
}

// Any S with S S^T = m for PSD m.
Mat3 matrix_sqrt(const Mat3& m) {
  Eigen::LLT<Mat3> llt(m);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Mat3> es(m);
  const Vec3 root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

SigmaPoints sigma_points(const Vec3& mean, const Mat3& cov, const UkfParams& p) {
  const Mat3 spread = matrix_sqrt((kN + p.lambda()) * cov);
  SigmaPoints pts;
  pts[0] = mean;
  for (int i = 0; i < kN; ++i) {
    pts[1 + i] = mean + spread.col(i);
    pts[1 + kN + i] = mean - spread.col(i);
  }
  return pts;
}

Vec3 weighted_mean(const SigmaPoints& pts, const Weights& w) {
  Vec3 sum = Vec3::Zero();
  for (int i = 1; i < kSigmaCount; ++i) sum += pts[i];
  return w.mean0 * pts[0] + w.other * sum;
}

Mat3 weighted_cross(const SigmaPoints& a, const Vec3& mean_a, const SigmaPoints& b,
                    const Vec3& mean_b, const Weights& w) {
  Mat3 sum = Mat3::Zero();
  for (int i = 1; i < kSigmaCount; ++i) sum += (a[i] - mean_a) * (b[i] - mean_b).transpose();
  return w.cov0 * (a[0] - mean_a) * (b[0] - mean_b).transpose() + w.other * sum;
}

// Minimal rotation taking unit vector a onto unit vector b.
Mat3 align_rotation(const Vec3& a, const Vec3& b) {
  const Vec3 v = a.cross(b);
  const double c = a.dot(b);
  if (c > -1.0 + 1e-12) {
    const Mat3 k = skew(v);
    return Mat3::Identity() + k + k * k / (1.0 + c);
  }
  // Antiparallel: half turn about any axis orthogonal to a.
  Vec3 axis = a.cross(Vec3::UnitX());
  if (axis.norm() < 1e-6) axis = a.cross(Vec3::UnitY());
  return so3_exp(Vec3(axis.normalized() * M_PI));
}

}  // namespace

void UkfParams::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("ukf alpha must lie in (0, 1]");
  if (!std::isfinite(beta) || !std::isfinite(kappa)) throw InvalidArgument("ukf beta/kappa not finite");
  if (!(kStateDim + lambda() > 0.0)) throw InvalidArgument("ukf n + lambda must be positive");
  if (!(prior_variance > 0.0) || !std::isfinite(prior_variance)) {
    throw InvalidArgument("ukf prior variance must be positive");
  }
  if (!is_psd(process_noise)) throw InvalidArgument("process noise is not symmetric PSD");
  if (!is_psd(measurement_noise)) throw InvalidArgument("measurement noise is not symmetric PSD");
}

Vec3 DirectionAlignTransition::propagate(const Vec3& sigma_point, const Vec3& mean,
                                         const Vec3& t_unscaled) const {
  const double mean_norm = mean.norm();
  const double u_norm = t_unscaled.norm();
  if (mean_norm < kDirectionEpsilon || u_norm < kDirectionEpsilon) return sigma_point;
  return align_rotation(mean / mean_norm, t_unscaled / u_norm) * sigma_point;
}

Vec3 NormDirectionTransition::propagate(const Vec3& sigma_point, const Vec3& /*mean*/,
                                        const Vec3& t_unscaled) const {
  const double u_norm = t_unscaled.norm();
  if (u_norm < kDirectionEpsilon) return sigma_point;
  return t_unscaled / u_norm * sigma_point.norm();
}

Vec3 LinearTransition::propagate(const Vec3& sigma_point, const Vec3& /*mean*/,
                                 const Vec3& t_unscaled) const {
  return f_ * sigma_point + b_ * t_unscaled;
}

const TransitionModel& default_transition() {
  static const DirectionAlignTransition model;
  return model;
}

UkfState ukf_init(const Vec3& t0, const UkfParams& params) {
  params.validate();
  if (!t0.allFinite()) throw InvalidArgument("initial translation not finite");
  UkfState s;
  s.mean = t0;
  s.covariance = Mat3::Identity() * params.prior_variance;
  s.params = params;
  return s;
}

UkfState ukf_predict(const UkfState& s, const Vec3& t_unscaled, const TransitionModel& transition) {
  if (!t_unscaled.allFinite()) throw InvalidArgument("t_unscaled not finite");
  UkfState out = s;
  if (t_unscaled.norm() < kDirectionEpsilon) {
    out.covariance = make_psd(s.covariance + s.params.process_noise);
    return out;
  }
  const Weights w = weights(s.params);
  const SigmaPoints pts = sigma_points(s.mean, s.covariance, s.params);
  SigmaPoints propagated;
  for (int i = 0; i < kSigmaCount; ++i) {
    propagated[i] = transition.propagate(pts[i], s.mean, t_unscaled);
  }
  out.mean = weighted_mean(propagated, w);
  out.covariance = make_psd(weighted_cross(propagated, out.mean, propagated, out.mean, w) +
                            s.params.process_noise);
  return out;
}

UkfState ukf_update(const UkfState& s, const Vec3& t_scaled) {
  if (!t_scaled.allFinite()) throw InvalidArgument("t_scaled not finite");
  const Weights w = weights(s.params);
  const SigmaPoints pts = sigma_points(s.mean, s.covariance, s.params);
  // h is the identity, so the measurement sigma points are the state ones.
  const SigmaPoints& z_pts = pts;
  const Vec3 z_mean = weighted_mean(z_pts, w);

  Vec3 z = t_scaled;
  if (s.params.measurement == MeasurementMode::kScaleOnly) {
    const double n = s.mean.norm();
    if (n > kDirectionEpsilon) z = s.mean / n * t_scaled.norm();
  }

  UkfState out = s;
  Mat3 innovation_cov = weighted_cross(z_pts, z_mean, z_pts, z_mean, w) + s.params.measurement_noise;
  innovation_cov = 0.5 * (innovation_cov + innovation_cov.transpose());
  const Mat3 cross = weighted_cross(pts, s.mean, z_pts, z_mean, w);

  Eigen::LLT<Mat3> llt(innovation_cov);
  if (llt.info() != Eigen::Success || !(Mat3(llt.matrixL()).diagonal().minCoeff() > 0.0)) {
    std::clog << "warning: singular UKF innovation covariance, regularizing\n";
    innovation_cov += Mat3::Identity() * 1e-12;
    llt.compute(innovation_cov);
    ++out.regularized_updates;
  }
  // K = Pxz S^-1, solved as (S^-1 Pxz^T)^T with S symmetric.
  const Mat3 gain = llt.solve(cross.transpose()).transpose();
  out.mean = s.mean + gain * (z - z_mean);
  out.covariance = make_psd(s.covariance - gain * innovation_cov * gain.transpose());
  return out;
}

Pose correct_motion(const Pose& m, const UkfState& s) {
  return Pose{m.rotation, s.mean, true};
}

ScaleCorrector::ScaleCorrector(const UkfParams& params, int reset_after,
                               std::shared_ptr<const TransitionModel> transition)
    : state_(ukf_init(Vec3::Zero(), params)),
      reset_after_(reset_after),
      transition_(std::move(transition)) {
  if (reset_after < 0) throw InvalidArgument("reset_after must be non-negative");
}

Pose ScaleCorrector::process(const Pose& unscaled_motion, const std::optional<Vec3>& t_scaled) {
  const TransitionModel& f = transition_ ? *transition_ : default_transition();
  state_ = ukf_predict(state_, unscaled_motion.translation, f);
  if (t_scaled) {
    state_ = ukf_update(state_, *t_scaled);
    consecutive_failures_ = 0;
  } else {
    ++frames_predict_only_;
    if (++consecutive_failures_ > reset_after_) {
      state_.covariance = Mat3::Identity() * state_.params.prior_variance;
      consecutive_failures_ = 0;
      ++filter_resets_;
    }
  }
  return correct_motion(unscaled_motion, state_);
}

}  // namespace mvslam
