#pragma once

// Rotation, quaternion and SE(3) algebra plus the relative-pose losses used
// to score pose estimators.
//
// Conventions:
//  - Quaternions are Hamilton, stored (w, x, y, z).
//  - Frames are right-handed. A Pose stored in a Trajectory maps camera
//    coordinates to world coordinates: p_world = R * p_cam + t.
//  - Twists are ordered (omega, rho): rotation first, then translation.

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace mvslam {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm() const;
  // Throws InvalidArgument for non-finite or zero-norm input.
  Quaternion normalized() const;
};

struct AxisAngle {
  Vec3 axis = Vec3::UnitX();
  // Radians in [0, pi].
  double angle = 0.0;

  Vec3 rotation_vector() const { return axis * angle; }
};

// Rigid transform. `scaled` is false when the translation only carries a
// direction (monocular estimate before scale correction).
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  bool scaled = true;

  static Pose identity() { return Pose{}; }
  Mat4 matrix() const;
  static Pose from_matrix(const Mat4& m, bool scaled = true);
};

// Normalizes q first; throws InvalidArgument if any component is not finite.
Mat3 quat_to_rot(const Quaternion& q);
// Shepperd's method. The returned quaternion has w >= 0.
Quaternion rot_to_quat(const Mat3& r);

// Homogeneous product a * b. Result is scaled only if both inputs are.
// Re-orthonormalizes the rotation when its drift exceeds kRotationDriftLimit.
Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);

inline constexpr double kRotationDriftLimit = 1e-7;

// max |R^T R - I|.
double rotation_drift(const Mat3& r);
// Nearest rotation in the Frobenius sense (polar decomposition).
Mat3 orthonormalize(const Mat3& r);
bool is_rotation(const Mat3& r, double tol = 1e-9);

Mat3 skew(const Vec3& v);
Mat3 so3_exp(const Vec3& rotation_vector);
Mat3 so3_exp(const AxisAngle& aa);
AxisAngle so3_log(const Mat3& r);
Vec3 so3_log_vector(const Mat3& r);

Pose se3_exp(const Vec6& twist);
Vec6 se3_log(const Pose& p);
// Adjoint of p acting on (omega, rho) twists: p * exp(xi) * p^-1 = exp(Ad * xi).
Mat6 adjoint(const Pose& p);

// Frobenius norm of r - r_hat.
double chordal_loss(const Mat3& r, const Mat3& r_hat);
// Sum of absolute component differences.
double translation_l1(const Vec3& t, const Vec3& t_hat);
// Chordal + L1 terms for the forward pair plus the same for the backward pair.
// `*_real` are poses estimated on real frames, `*_gen` on generated frames.
double pose_cycle_loss(const Pose& fwd_real, const Pose& fwd_gen, const Pose& bwd_real,
                       const Pose& bwd_gen);

}  // namespace mvslam
