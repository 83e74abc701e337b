#include "mvslam/geometry.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/SVD>

#include "mvslam/errors.h"

namespace mvslam {

double Quaternion::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Quaternion Quaternion::normalized() const {
  if (!std::isfinite(w) || !std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
    throw InvalidArgument("quaternion has non-finite components");
  }
  const double n = norm();
  if (n == 0.0) throw InvalidArgument("quaternion has zero norm");
  return {w / n, x / n, y / n, z / n};
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Pose Pose::from_matrix(const Mat4& m, bool scaled) {
  return Pose{m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>(), scaled};
}

Mat3 quat_to_rot(const Quaternion& q_in) {
  const Quaternion q = q_in.normalized();
  const double ww = q.w * q.w, xx = q.x * q.x, yy = q.y * q.y, zz = q.z * q.z;
  const double xy = q.x * q.y, xz = q.x * q.z, yz = q.y * q.z;
  const double wx = q.w * q.x, wy = q.w * q.y, wz = q.w * q.z;
  Mat3 r;
  r << ww + xx - yy - zz, 2.0 * (xy - wz), 2.0 * (xz + wy),
      2.0 * (xy + wz), ww - xx + yy - zz, 2.0 * (yz - wx),
      2.0 * (xz - wy), 2.0 * (yz + wx), ww - xx - yy + zz;
  return r;
}

Quaternion rot_to_quat(const Mat3& r) {
  Quaternion q;
  const double tr = r.trace();
  if (tr > 0.0) {
    const double s = 2.0 * std::sqrt(tr + 1.0);
    q = {0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s};
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2));
    q = {(r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s};
  } else if (r(1, 1) > r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2));
    q = {(r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s, (r(1, 2) + r(2, 1)) / s};
  } else {
    const double s = 2.0 * std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1));
    q = {(r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, 0.25 * s};
  }
  if (q.w < 0.0) q = {-q.w, -q.x, -q.y, -q.z};
  return q.normalized();
}

double rotation_drift(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

Mat3 orthonormalize(const Mat3& r) {
  Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

bool is_rotation(const Mat3& r, double tol) {
  return r.allFinite() && rotation_drift(r) <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

Pose compose(const Pose& a, const Pose& b) {
  Pose out{a.rotation * b.rotation, a.rotation * b.translation + a.translation,
           a.scaled && b.scaled};
  if (rotation_drift(out.rotation) > kRotationDriftLimit) {
    out.rotation = orthonormalize(out.rotation);
  }
  return out;
}

Pose inverse(const Pose& p) {
  const Mat3 rt = p.rotation.transpose();
  return Pose{rt, -(rt * p.translation), p.scaled};
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

Mat3 so3_exp(const Vec3& w) {
  const double theta2 = w.squaredNorm();
  const Mat3 k = skew(w);
  double a, b;  // sin(t)/t, (1 - cos(t))/t^2
  if (theta2 < 1e-16) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    const double theta = std::sqrt(theta2);
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Mat3::Identity() + a * k + b * k * k;
}

Mat3 so3_exp(const AxisAngle& aa) { return so3_exp(Vec3(aa.axis.normalized() * aa.angle)); }

AxisAngle so3_log(const Mat3& r) {
  const Vec3 w(0.5 * (r(2, 1) - r(1, 2)), 0.5 * (r(0, 2) - r(2, 0)), 0.5 * (r(1, 0) - r(0, 1)));
  const double s = w.norm();
  const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const double theta = std::atan2(s, c);

  if (c < -0.5) {
    // Near pi the skew part vanishes; read the axis off the symmetric part,
    // (R + R^T)/2 - cos(t) I = (1 - cos(t)) a a^T, using its largest column.
    const Mat3 b = 0.5 * (r + r.transpose()) - c * Mat3::Identity();
    int k = 0;
    b.diagonal().maxCoeff(&k);
    Vec3 axis = b.col(k).normalized();
    if (s > 0.0) {
      if (axis.dot(w) < 0.0) axis = -axis;
    } else {
      // theta == pi: a and -a are the same rotation; pick the one whose
      // largest-magnitude component is positive.
      int m = 0;
      axis.cwiseAbs().maxCoeff(&m);
      if (axis[m] < 0.0) axis = -axis;
    }
    return {axis, theta};
  }
  if (s == 0.0) return {Vec3::UnitX(), 0.0};
  return {w / s, theta};
}

Vec3 so3_log_vector(const Mat3& r) {
  const AxisAngle aa = so3_log(r);
  return aa.axis * aa.angle;
}

namespace {

// Left Jacobian of SO(3); maps rho to the SE(3) translation.
Mat3 so3_left_jacobian(const Vec3& w) {
  const double theta2 = w.squaredNorm();
  const Mat3 k = skew(w);
  double b, c;  // (1 - cos t)/t^2, (t - sin t)/t^3
  if (theta2 < 1e-12) {
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    const double theta = std::sqrt(theta2);
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  return Mat3::Identity() + b * k + c * k * k;
}

Mat3 so3_left_jacobian_inverse(const Vec3& w) {
  const double theta2 = w.squaredNorm();
  const Mat3 k = skew(w);
  double d;
  if (theta2 < 1e-8) {
    d = 1.0 / 12.0 + theta2 / 720.0;
  } else {
    const double theta = std::sqrt(theta2);
    d = (1.0 - theta * std::sin(theta) / (2.0 * (1.0 - std::cos(theta)))) / theta2;
  }
  return Mat3::Identity() - 0.5 * k + d * k * k;
}

}  // namespace

Pose se3_exp(const Vec6& twist) {
  const Vec3 w = twist.head<3>();
  const Vec3 rho = twist.tail<3>();
  return Pose{so3_exp(w), so3_left_jacobian(w) * rho, true};
}

Vec6 se3_log(const Pose& p) {
  const Vec3 w = so3_log_vector(p.rotation);
  Vec6 out;
  out.head<3>() = w;
  out.tail<3>() = so3_left_jacobian_inverse(w) * p.translation;
  return out;
}

Mat6 adjoint(const Pose& p) {
  Mat6 ad = Mat6::Zero();
  ad.topLeftCorner<3, 3>() = p.rotation;
  ad.bottomRightCorner<3, 3>() = p.rotation;
  ad.bottomLeftCorner<3, 3>() = skew(p.translation) * p.rotation;
  return ad;
}

double chordal_loss(const Mat3& r, const Mat3& r_hat) { return (r - r_hat).norm(); }

double translation_l1(const Vec3& t, const Vec3& t_hat) { return (t - t_hat).cwiseAbs().sum(); }

double pose_cycle_loss(const Pose& fwd_real, const Pose& fwd_gen, const Pose& bwd_real,
                       const Pose& bwd_gen) {
  return chordal_loss(fwd_real.rotation, fwd_gen.rotation) +
         translation_l1(fwd_real.translation, fwd_gen.translation) +
         chordal_loss(bwd_real.rotation, bwd_gen.rotation) +
         translation_l1(bwd_real.translation, bwd_gen.translation);
}

}  // namespace mvslam
