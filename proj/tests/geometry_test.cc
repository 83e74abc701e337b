#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "mvslam/errors.h"
#include "mvslam/geometry.h"
#include "test_util.h"

namespace mvslam {
namespace {

using testing::pose_distance;
using testing::random_pose;
using testing::random_rotation;
using testing::random_unit;

TEST(Quaternion, IdentityMapsToIdentity) {
  EXPECT_TRUE(quat_to_rot(Quaternion{}).isApprox(Mat3::Identity(), 1e-15));
}

TEST(Quaternion, QuarterTurnAboutZ) {
  const double h = std::sqrt(0.5);
  Mat3 expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_LT((quat_to_rot({h, 0, 0, h}) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Quaternion, RoundTripUpToSign) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    Quaternion q{n(rng), n(rng), n(rng), n(rng)};
    q = q.normalized();
    EXPECT_NEAR(q.norm(), 1.0, 1e-12);
    const Quaternion r = rot_to_quat(quat_to_rot(q));
    const double same = std::abs(r.w - q.w) + std::abs(r.x - q.x) + std::abs(r.y - q.y) + std::abs(r.z - q.z);
    const double flip = std::abs(r.w + q.w) + std::abs(r.x + q.x) + std::abs(r.y + q.y) + std::abs(r.z + q.z);
    EXPECT_LT(std::min(same, flip), 1e-9) << i;
  }
}

TEST(Quaternion, DoubleCoverGivesSameMatrix) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const Vec3 a = random_unit(rng);
    const Quaternion q = Quaternion{0.3, a.x(), a.y(), a.z()}.normalized();
    const Quaternion m{-q.w, -q.x, -q.y, -q.z};
    EXPECT_LT((quat_to_rot(q) - quat_to_rot(m)).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Quaternion, ResultIsRotation) {
  const Mat3 r = quat_to_rot({0.2, -0.7, 1.3, 0.4});
  EXPECT_LT((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(r.determinant(), 1.0, 1e-9);
}

TEST(Quaternion, RejectsNonFinite) {
  EXPECT_THROW(quat_to_rot({std::nan(""), 0, 0, 0}), InvalidArgument);
  EXPECT_THROW(quat_to_rot({0, 0, 0, 0}), InvalidArgument);
  EXPECT_THROW(quat_to_rot({1, INFINITY, 0, 0}), InvalidArgument);
}

TEST(Pose, ComposeWithIdentity) {
  std::mt19937_64 rng(5);
  const Pose p = random_pose(rng);
  EXPECT_LT(pose_distance(compose(p, Pose::identity()), p), 1e-15);
}

TEST(Pose, ComposeWithInverseIsIdentity) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 100; ++i) {
    const Pose p = random_pose(rng, 10.0);
    EXPECT_LT(pose_distance(compose(p, inverse(p)), Pose::identity()), 1e-9);
    EXPECT_LT(pose_distance(compose(inverse(p), p), Pose::identity()), 1e-9);
  }
}

TEST(Pose, ComposeMatchesHomogeneousProduct) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const Pose a = random_pose(rng, 5.0), b = random_pose(rng, 5.0);
    const Mat4 oracle = a.matrix() * b.matrix();
    EXPECT_LT((compose(a, b).matrix() - oracle).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Pose, HomogeneousForm) {
  std::mt19937_64 rng(8);
  const Pose p = random_pose(rng);
  const Mat4 m = p.matrix();
  EXPECT_EQ(m.row(3), Eigen::RowVector4d(0, 0, 0, 1));
  EXPECT_EQ(Mat3(m.topLeftCorner<3, 3>()), p.rotation);
  EXPECT_EQ(Vec3(m.topRightCorner<3, 1>()), p.translation);
  EXPECT_LT(pose_distance(Pose::from_matrix(m), p), 0.0 + 1e-15);
}

TEST(Pose, InverseExamples) {
  EXPECT_LT(pose_distance(inverse(Pose::identity()), Pose::identity()), 1e-15);
  Pose t;
  t.translation = Vec3(1.0, -2.0, 3.5);
  EXPECT_EQ(inverse(t).translation, Vec3(-1.0, 2.0, -3.5));
  std::mt19937_64 rng(9);
  const Pose p = random_pose(rng);
  const Pose q = inverse(p);
  EXPECT_LT((q.rotation - p.rotation.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((q.translation + p.rotation.transpose() * p.translation).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pose, Associativity) {
  std::mt19937_64 rng(10);
  for (int i = 0; i < 200; ++i) {
    const Pose a = random_pose(rng, 3.0), b = random_pose(rng, 3.0), c = random_pose(rng, 3.0);
    EXPECT_LT(pose_distance(compose(compose(a, b), c), compose(a, compose(b, c))), 1e-9);
  }
}

TEST(Pose, ScaledFlagPropagation) {
  std::mt19937_64 rng(12);
  Pose a = random_pose(rng), b = random_pose(rng);
  EXPECT_TRUE(compose(a, b).scaled);
  b.scaled = false;
  EXPECT_FALSE(compose(a, b).scaled);
  EXPECT_FALSE(compose(b, a).scaled);
  a.scaled = false;
  EXPECT_FALSE(compose(a, b).scaled);
}

TEST(Pose, LongChainStaysOrthonormal) {
  std::mt19937_64 rng(13);
  Pose acc;
  for (int i = 0; i < 100000; ++i) {
    Pose step;
    step.rotation = random_rotation(rng, 0.1);
    acc = compose(acc, step);
  }
  EXPECT_LE(rotation_drift(acc.rotation), 2 * kRotationDriftLimit);
  EXPECT_NEAR(acc.rotation.determinant(), 1.0, 1e-6);
}

TEST(Orthonormalize, ProjectsPerturbedRotation) {
  std::mt19937_64 rng(14);
  const Mat3 r = random_rotation(rng);
  Mat3 noisy = r;
  noisy(0, 1) += 1e-5;
  noisy(2, 0) -= 2e-5;
  const Mat3 fixed = orthonormalize(noisy);
  EXPECT_TRUE(is_rotation(fixed, 1e-12));
  EXPECT_LT((fixed - r).norm(), 3e-5);
}

TEST(So3Log, Identity) {
  const AxisAngle aa = so3_log(Mat3::Identity());
  EXPECT_EQ(aa.angle, 0.0);
  EXPECT_EQ(aa.axis, Vec3::UnitX());
}

TEST(So3Log, QuarterTurnAboutZ) {
  const AxisAngle aa = so3_log(so3_exp(Vec3(0, 0, std::numbers::pi / 2)));
  EXPECT_NEAR(aa.angle, std::numbers::pi / 2, 1e-12);
  EXPECT_LT((aa.axis - Vec3::UnitZ()).norm(), 1e-12);
}

TEST(So3Log, InvertsExpOverFullRange) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::uniform_real_distribution<double> near_pi(std::numbers::pi - 1e-3, std::numbers::pi);
  std::uniform_real_distribution<double> tiny(0.0, 1e-6);
  for (int i = 0; i < 3000; ++i) {
    const Vec3 axis = random_unit(rng);
    const double th = i < 1000 ? angle(rng) : (i < 2000 ? near_pi(rng) : tiny(rng));
    const Vec3 a = axis * th;
    const Vec3 b = so3_log_vector(so3_exp(a));
    double err = (a - b).norm();
    // At exactly pi the axis sign is not observable.
    if (th > std::numbers::pi - 1e-9) err = std::min(err, (a + b).norm());
    EXPECT_LT(err, 1e-7) << "angle " << th;
  }
}

TEST(So3Log, AngleInRangeAndUnitAxis) {
  std::mt19937_64 rng(16);
  for (int i = 0; i < 500; ++i) {
    const AxisAngle aa = so3_log(random_rotation(rng));
    EXPECT_GE(aa.angle, 0.0);
    EXPECT_LE(aa.angle, std::numbers::pi);
    EXPECT_NEAR(aa.axis.norm(), 1.0, 1e-12);
  }
}

TEST(Se3, LogInvertsExp) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    Vec6 xi;
    for (int k = 0; k < 6; ++k) xi[k] = u(rng);
    EXPECT_LT((se3_log(se3_exp(xi)) - xi).norm(), 1e-9);
  }
}

TEST(Se3, AdjointConjugation) {
  std::mt19937_64 rng(18);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int i = 0; i < 50; ++i) {
    const Pose p = random_pose(rng);
    Vec6 xi;
    for (int k = 0; k < 6; ++k) xi[k] = u(rng);
    const Pose lhs = compose(compose(p, se3_exp(xi)), inverse(p));
    const Pose rhs = se3_exp(adjoint(p) * xi);
    EXPECT_LT(pose_distance(lhs, rhs), 1e-9);
  }
}

TEST(ChordalLoss, Examples) {
  EXPECT_EQ(chordal_loss(Mat3::Identity(), Mat3::Identity()), 0.0);
  const Mat3 flip = Eigen::Vector3d(-1, -1, 1).asDiagonal();
  EXPECT_NEAR(chordal_loss(Mat3::Identity(), flip), 2.0 * std::sqrt(2.0), 1e-12);
}

TEST(ChordalLoss, MatchesElementwiseSum) {
  std::mt19937_64 rng(19);
  for (int i = 0; i < 200; ++i) {
    const Mat3 a = random_rotation(rng), b = random_rotation(rng);
    double sum = 0.0;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) sum += (a(r, c) - b(r, c)) * (a(r, c) - b(r, c));
    }
    EXPECT_NEAR(chordal_loss(a, b), std::sqrt(sum), 1e-12);
  }
}

TEST(ChordalLoss, SymmetricAndTriangle) {
  std::mt19937_64 rng(20);
  for (int i = 0; i < 500; ++i) {
    const Mat3 a = random_rotation(rng), b = random_rotation(rng), c = random_rotation(rng);
    EXPECT_EQ(chordal_loss(a, b), chordal_loss(b, a));
    EXPECT_LE(chordal_loss(a, c), chordal_loss(a, b) + chordal_loss(b, c) + 1e-12);
  }
}

TEST(ChordalLoss, FollowsRotationAngle) {
  std::mt19937_64 rng(21);
  for (int i = 0; i <= 100; ++i) {
    const double th = std::numbers::pi * i / 100.0;
    const Mat3 a = random_rotation(rng);
    const Mat3 b = a * so3_exp(Vec3(random_unit(rng) * th));
    EXPECT_NEAR(chordal_loss(a, b), 2.0 * std::sqrt(2.0) * std::sin(th / 2.0), 1e-9) << th;
  }
}

TEST(TranslationL1, Examples) {
  EXPECT_EQ(translation_l1(Vec3(1, 2, 3), Vec3(1, 2, 3)), 0.0);
  EXPECT_EQ(translation_l1(Vec3(1, 2, 3), Vec3::Zero()), 6.0);
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 100; ++i) {
    const Vec3 a(u(rng), u(rng), u(rng)), b(u(rng), u(rng), u(rng));
    double oracle = 0.0;
    for (int k = 0; k < 3; ++k) oracle += std::abs(a[k] - b[k]);
    EXPECT_EQ(translation_l1(a, b), oracle);
  }
}

TEST(PoseCycleLoss, Examples) {
  std::mt19937_64 rng(23);
  const Pose f = random_pose(rng), b = random_pose(rng);
  EXPECT_EQ(pose_cycle_loss(f, f, b, b), 0.0);

  Pose br, bg;
  bg.rotation = Eigen::Vector3d(-1, -1, 1).asDiagonal();
  br.translation = bg.translation = Vec3(0.1, 0.2, 0.3);
  EXPECT_NEAR(pose_cycle_loss(f, f, br, bg), 2.0 * std::sqrt(2.0), 1e-12);
}

TEST(PoseCycleLoss, SumOfComponentTerms) {
  std::mt19937_64 rng(24);
  for (int i = 0; i < 100; ++i) {
    const Pose fr = random_pose(rng), fg = random_pose(rng), br = random_pose(rng), bg = random_pose(rng);
    const double oracle = chordal_loss(fr.rotation, fg.rotation) + translation_l1(fr.translation, fg.translation) +
                          chordal_loss(br.rotation, bg.rotation) + translation_l1(br.translation, bg.translation);
    EXPECT_EQ(pose_cycle_loss(fr, fg, br, bg), oracle);
  }
}

}  // namespace
}  // namespace mvslam
