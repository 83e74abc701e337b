#pragma once

// Unscented Kalman filter over the per-frame relative translation. The
// prediction consumes the direction-only translation from the monocular pose
// estimator; the update consumes the metric translation from the classical
// RGB-D estimator. The filtered mean replaces the translation of the
// monocular motion to give a metric motion.

#include <cstdint>
#include <memory>
#include <optional>

#include "mvslam/geometry.h"

namespace mvslam {

enum class MeasurementMode {
  // z = t_scaled.
  kVector,
  // z = |t_scaled| * direction(predicted mean); only the scale is observed.
  kScaleOnly,
};

struct UkfParams {
  double alpha = 1e-1;
  double beta = 2.0;
  double kappa = 0.0;
  Mat3 process_noise = Mat3::Identity() * 1e-9;
  Mat3 measurement_noise = Mat3::Identity() * 1e-8;
  // Diagonal variance of the initial (and reset) covariance.
  double prior_variance = 1e-4;
  MeasurementMode measurement = MeasurementMode::kVector;

  static constexpr int kStateDim = 3;

  double lambda() const { return alpha * alpha * (kStateDim + kappa) - kStateDim; }
  // Throws InvalidArgument on alpha outside (0, 1], n + lambda <= 0, a
  // non-positive prior variance or non-PSD / asymmetric noise matrices.
  void validate() const;
};

struct UkfState {
  Vec3 mean = Vec3::Zero();
  Mat3 covariance = Mat3::Identity();
  UkfParams params;
  // Number of updates whose innovation covariance had to be regularized.
  std::uint32_t regularized_updates = 0;
};

// State transition x_hat = f(x, t_unscaled), applied per sigma point.
// `mean` is the prior mean, for models that linearize around it.
class TransitionModel {
 public:
  virtual ~TransitionModel() = default;
  virtual Vec3 propagate(const Vec3& sigma_point, const Vec3& mean,
                         const Vec3& t_unscaled) const = 0;
};

// Rotates every sigma point by the minimal rotation carrying direction(mean)
// onto direction(t_unscaled). The mean keeps its magnitude and takes the new
// direction; the map is linear in x, so the unscented transform is exact.
class DirectionAlignTransition final : public TransitionModel {
 public:
  Vec3 propagate(const Vec3& sigma_point, const Vec3& mean, const Vec3& t_unscaled) const override;
};

// f(x, u) = direction(u) * |x|, evaluated per sigma point.
class NormDirectionTransition final : public TransitionModel {
 public:
  Vec3 propagate(const Vec3& sigma_point, const Vec3& mean, const Vec3& t_unscaled) const override;
};

// f(x, u) = F x + B u.
class LinearTransition final : public TransitionModel {
 public:
  LinearTransition(const Mat3& f, const Mat3& b) : f_(f), b_(b) {}
  Vec3 propagate(const Vec3& sigma_point, const Vec3& mean, const Vec3& t_unscaled) const override;

 private:
  Mat3 f_;
  Mat3 b_;
};

const TransitionModel& default_transition();

UkfState ukf_init(const Vec3& t0, const UkfParams& params);

// Zero-norm t_unscaled skips the transition: the mean is kept and only the
// process noise is added.
UkfState ukf_predict(const UkfState& s, const Vec3& t_unscaled,
                     const TransitionModel& transition = default_transition());

// h = identity. A singular innovation covariance is regularized with 1e-12 I
// and counted in `regularized_updates`.
UkfState ukf_update(const UkfState& s, const Vec3& t_scaled);

// Returns m with its translation replaced by the filtered mean, flagged scaled.
Pose correct_motion(const Pose& m, const UkfState& s);

// Per-sequence driver: predict with each monocular motion, update when a
// metric translation is available, and re-inflate the covariance after more
// than `reset_after` consecutive frames without one.
class ScaleCorrector {
 public:
  explicit ScaleCorrector(const UkfParams& params, int reset_after = 5,
                          std::shared_ptr<const TransitionModel> transition = nullptr);

  Pose process(const Pose& unscaled_motion, const std::optional<Vec3>& t_scaled);

  const UkfState& state() const { return state_; }
  int frames_predict_only() const { return frames_predict_only_; }
  int filter_resets() const { return filter_resets_; }

 private:
  UkfState state_;
  int reset_after_;
  std::shared_ptr<const TransitionModel> transition_;
  int consecutive_failures_ = 0;
  int frames_predict_only_ = 0;
  int filter_resets_ = 0;
};

}  // namespace mvslam
