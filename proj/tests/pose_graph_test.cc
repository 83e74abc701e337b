#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "mvslam/errors.h"
#include "mvslam/pose_graph.h"
#include "mvslam/pose_graph_io.h"
#include "mvslam/synth.h"
#include "test_util.h"

namespace mvslam {
namespace {

using testing::pose_distance;
using testing::random_pose;

constexpr double kDegToRad = std::numbers::pi / 180.0;

Vec6 random_twist(std::mt19937_64& rng, double rot, double trans) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec6 xi;
  for (int k = 0; k < 3; ++k) xi[k] = rot * n(rng);
  for (int k = 3; k < 6; ++k) xi[k] = trans * n(rng);
  return xi;
}

// Chain over the given absolute poses with exact odometry edges.
PoseGraph consistent_chain(const std::vector<Pose>& poses, const Mat6& info = Mat6::Identity()) {
  PoseGraph g;
  for (std::size_t i = 0; i < poses.size(); ++i) g.add_node(poses[i], i == 0);
  for (std::size_t i = 0; i + 1 < poses.size(); ++i) {
    g.add_edge(static_cast<int>(i), static_cast<int>(i + 1), compose(inverse(poses[i]), poses[i + 1]), info);
  }
  return g;
}

std::vector<Pose> random_walk(std::mt19937_64& rng, int n) {
  std::vector<Pose> poses{Pose::identity()};
  for (int i = 1; i < n; ++i) poses.push_back(compose(poses.back(), se3_exp(random_twist(rng, 0.1, 0.5))));
  return poses;
}

double position_rmse(const std::vector<Pose>& a, const std::vector<Pose>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i].translation - b[i].translation).squaredNorm();
  return std::sqrt(s / a.size());
}

TEST(PoseGraph, Validation) {
  PoseGraph g;
  g.add_node(Pose{});
  g.add_node(Pose{});
  EXPECT_THROW(g.validate(), InvalidArgument);
  EXPECT_THROW(g.add_edge(0, 2, Pose{}, Mat6::Identity()), InvalidArgument);
  Mat6 asym = Mat6::Identity();
  asym(0, 1) = 0.5;
  EXPECT_THROW(g.add_edge(0, 1, Pose{}, asym), InvalidArgument);
  EXPECT_THROW(g.add_edge(0, 1, Pose{}, -Mat6::Identity()), InvalidArgument);
  g.set_fixed(0);
  EXPECT_NO_THROW(g.validate());
  EXPECT_EQ(g.fixed_count(), 1);
}

TEST(PoseGraph, OdometryInformation) {
  const Mat6 info = odometry_information(0.1, 0.01);
  for (int k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(info(k, k), 100.0);
  for (int k = 3; k < 6; ++k) EXPECT_DOUBLE_EQ(info(k, k), 1e4);
  EXPECT_EQ((info - Mat6(info.diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 0.0);
}

TEST(GraphResidual, ConsistentChainIsZero) {
  std::mt19937_64 rng(1);
  EXPECT_LT(graph_residual(consistent_chain(random_walk(rng, 30))), 1e-12);
}

TEST(GraphResidual, SmallPerturbationExpansion) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    auto poses = random_walk(rng, 10);
    PoseGraph g = consistent_chain(poses);
    Vec6 delta = random_twist(rng, 1.0, 1.0);
    delta *= 1e-4 / delta.norm();
    // The end node has one edge; perturbing it in its own frame makes the residual exactly delta.
    g.set_node(9, compose(poses[9], se3_exp(delta)));
    EXPECT_NEAR(graph_residual(g), delta.squaredNorm(), 0.01 * delta.squaredNorm());
  }
}

TEST(GraphResidual, LinearInInformation) {
  std::mt19937_64 rng(3);
  auto poses = random_walk(rng, 8);
  PoseGraph a = consistent_chain(poses), b = consistent_chain(poses, 2.0 * Mat6::Identity());
  for (int i = 1; i < 8; ++i) {
    const Pose p = compose(se3_exp(random_twist(rng, 0.05, 0.05)), poses[i]);
    a.set_node(i, p);
    b.set_node(i, p);
  }
  EXPECT_GT(graph_residual(a), 0.0);
  EXPECT_EQ(graph_residual(b), 2.0 * graph_residual(a));
}

TEST(EdgeJacobians, MatchFiniteDifferences) {
  // Central differences of the residual under left perturbations of each
  // endpoint. The analytic form is first order in the residual, so the
  // agreement is O(|r|^2).
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const double r_scale = trial < 10 ? 0.0 : 1e-3;
    PoseGraph g;
    const Pose a = random_pose(rng), b = random_pose(rng);
    g.add_node(a, true);
    g.add_node(b);
    const Pose z = compose(compose(inverse(a), b), se3_exp(random_twist(rng, r_scale, r_scale)));
    g.add_edge(0, 1, z, Mat6::Identity());
    const PoseGraphEdge& e = g.edges()[0];
    const EdgeJacobians analytic = edge_jacobians(g, e);
    constexpr double h = 1e-6;
    for (int node = 0; node < 2; ++node) {
      Eigen::Matrix<double, 6, 6> numeric;
      for (int k = 0; k < 6; ++k) {
        Vec6 d = Vec6::Zero();
        d[k] = h;
        PoseGraph plus = g, minus = g;
        plus.set_node(node, compose(se3_exp(d), g.node(node)));
        minus.set_node(node, compose(se3_exp(-d), g.node(node)));
        numeric.col(k) = (edge_residual(plus, e) - edge_residual(minus, e)) / (2.0 * h);
      }
      const Mat6& j = node == 0 ? analytic.from : analytic.to;
      const double tol = r_scale == 0.0 ? 1e-7 : 1e-5;
      EXPECT_LT((numeric - j).cwiseAbs().maxCoeff(), tol * std::max(1.0, j.cwiseAbs().maxCoeff()))
          << "trial " << trial << " node " << node;
    }
  }
}

TEST(Optimize, ConsistentGraphUnchanged) {
  std::mt19937_64 rng(5);
  const PoseGraph g = consistent_chain(random_walk(rng, 20));
  const OptimizeResult r = optimize(g);
  for (int i = 0; i < g.node_count(); ++i) {
    EXPECT_TRUE(r.graph.node(i).rotation == g.node(i).rotation);
    EXPECT_TRUE(r.graph.node(i).translation == g.node(i).translation);
  }
  EXPECT_EQ(r.stats.accepted_steps, 0);
}

TEST(Optimize, TwoNodeClosedForm) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    PoseGraph g;
    const Pose x0 = random_pose(rng), z = random_pose(rng, 2.0);
    g.add_node(x0, true);
    g.add_node(random_pose(rng));
    g.add_edge(0, 1, z, odometry_information(0.1, 0.2));
    const OptimizeResult r = optimize(g);
    EXPECT_LT(pose_distance(r.graph.node(1), compose(x0, z)), 1e-9) << trial;
    EXPECT_LE(r.stats.final_cost, r.stats.initial_cost);
  }
}

TEST(Optimize, InputNotModifiedAndFixedNodesHeld) {
  std::mt19937_64 rng(7);
  auto poses = random_walk(rng, 10);
  PoseGraph g = consistent_chain(poses);
  for (int i = 1; i < 10; ++i) g.set_node(i, compose(se3_exp(random_twist(rng, 0.1, 0.1)), poses[i]));
  g.set_fixed(5);
  const PoseGraph before = g;
  const OptimizeResult r = optimize(g);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(g.node(i).translation, before.node(i).translation);
  EXPECT_EQ(r.graph.node(0).translation, g.node(0).translation);
  EXPECT_EQ(r.graph.node(5).translation, g.node(5).translation);
}

// 50-node chain from the synthetic arc. Odometry comes from the synthetic
// pose oracle (0.5 deg rotation, 2 deg direction noise) at the true step
// length, plus one exact loop edge back to node 0.
TEST(Optimize, LoopClosureReducesDrift) {
  SyntheticScene scene;
  scene.path.frames = 50;
  const Trajectory gt = generate_trajectory(scene, 7);
  const PoseNoise noise{0.5, 2.0};
  const double step = compose(inverse(gt[0].pose), gt[1].pose).translation.norm();
  const Mat6 info = odometry_information(noise.rot_sigma_deg * kDegToRad, step * noise.dir_sigma_deg * kDegToRad);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    PoseGraph g;
    std::vector<Pose> noisy{gt[0].pose}, truth{gt[0].pose};
    g.add_node(gt[0].pose, true);
    for (std::size_t i = 0; i + 1 < gt.size(); ++i) {
      Pose z = oracle_pose(gt, i, noise, seed);
      z.translation *= compose(inverse(gt[i].pose), gt[i + 1].pose).translation.norm();
      z.scaled = true;
      noisy.push_back(compose(noisy.back(), z));
      truth.push_back(gt[i + 1].pose);
      g.add_node(noisy.back());
      g.add_edge(static_cast<int>(i), static_cast<int>(i + 1), z, info);
    }
    g.add_edge(0, 49, compose(inverse(gt[0].pose), gt[49].pose), odometry_information(1e-6, 1e-8));
    const double before = position_rmse(noisy, truth);
    const OptimizeResult r = optimize(g);
    EXPECT_TRUE(r.stats.converged);
    const double after = position_rmse(r.graph.nodes(), truth);
    EXPECT_LE(after, 0.2 * before) << "seed " << seed << ": " << before << " -> " << after;
  }
}

TEST(Optimize, MonotoneCostAndValidRotations) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    auto poses = random_walk(rng, 25);
    PoseGraph g = consistent_chain(poses);
    for (int i = 1; i < 25; ++i) g.set_node(i, compose(se3_exp(random_twist(rng, 0.3, 0.5)), poses[i]));
    g.add_edge(3, 20, compose(se3_exp(random_twist(rng, 0.1, 0.1)), compose(inverse(poses[3]), poses[20])),
               Mat6::Identity());
    const OptimizeResult r = optimize(g);
    const auto& h = r.stats.cost_history;
    ASSERT_FALSE(h.empty());
    EXPECT_EQ(h.front(), r.stats.initial_cost);
    for (std::size_t k = 1; k < h.size(); ++k) EXPECT_LE(h[k], h[k - 1]);
    EXPECT_LE(r.stats.final_cost, r.stats.initial_cost);
    for (const auto& p : r.graph.nodes()) EXPECT_TRUE(is_rotation(p.rotation, 1e-9));
  }
}

TEST(Optimize, GaugeInvariance) {
  std::mt19937_64 rng(9);
  auto poses = random_walk(rng, 15);
  PoseGraph g = consistent_chain(poses);
  for (int i = 1; i < 15; ++i) g.set_node(i, compose(se3_exp(random_twist(rng, 0.2, 0.3)), poses[i]));
  g.add_edge(0, 14, compose(inverse(poses[0]), poses[14]), Mat6::Identity() * 10.0);
  const Pose t = random_pose(rng, 3.0);
  PoseGraph moved = g;
  for (int i = 0; i < 15; ++i) moved.set_node(i, compose(t, g.node(i)));
  const OptimizeResult a = optimize(g), b = optimize(moved);
  EXPECT_NEAR(a.stats.initial_cost, b.stats.initial_cost, 1e-9);
  EXPECT_NEAR(a.stats.final_cost, b.stats.final_cost, 1e-9);
  for (int i = 0; i < 15; ++i) EXPECT_LT(pose_distance(compose(t, a.graph.node(i)), b.graph.node(i)), 1e-6);
}

TEST(Optimize, SingularSystemDoesNotAbort) {
  // Node 2 has no edges, so its block of the normal equations is zero.
  PoseGraph g;
  g.add_node(Pose{}, true);
  Pose p;
  p.translation = Vec3(1, 0, 0);
  g.add_node(p);
  g.add_node(p);
  Pose z;
  z.translation = Vec3(2, 0, 0);
  g.add_edge(0, 1, z, Mat6::Identity());
  OptimizeResult r;
  ASSERT_NO_THROW(r = optimize(g));
  EXPECT_LT((r.graph.node(1).translation - Vec3(2, 0, 0)).norm(), 1e-9);
  EXPECT_EQ(r.graph.node(2).translation, p.translation);
}

TEST(Optimize, HuberLimitsOutlierInfluence) {
  // One grossly wrong edge against a chain that also carries two consistent
  // edges over the same span. Under Huber every edge costs at most linearly,
  // so violating two good edges to satisfy one bad edge never pays and the
  // outlier is rejected. Without a kernel it drags the solution.
  std::mt19937_64 rng(10);
  auto poses = random_walk(rng, 20);
  const Mat6 info = odometry_information(0.01, 0.01);
  PoseGraph g = consistent_chain(poses, info);
  g.add_edge(2, 17, compose(inverse(poses[2]), poses[17]), info);
  g.add_edge(3, 16, compose(inverse(poses[3]), poses[16]), info);
  Pose bad = compose(inverse(poses[2]), poses[17]);
  bad.translation += Vec3(3.0, -2.0, 1.0);
  g.add_edge(2, 17, bad, info);
  OptimizeOptions plain, robust;
  robust.huber_delta = 1.0;
  const OptimizeResult p = optimize(g, plain), r = optimize(g, robust);
  EXPECT_LE(r.stats.final_cost, r.stats.initial_cost);
  const double err_plain = position_rmse(p.graph.nodes(), poses);
  const double err_robust = position_rmse(r.graph.nodes(), poses);
  EXPECT_GT(err_plain, 0.1);
  EXPECT_LT(err_robust, 0.05 * err_plain);
}

TEST(G2o, RoundTrip) {
  std::mt19937_64 rng(11);
  auto poses = random_walk(rng, 6);
  PoseGraph g = consistent_chain(poses, odometry_information(0.02, 0.003));
  Mat6 info = Mat6::Identity() * 3.0;
  info(0, 4) = info(4, 0) = 0.5;
  info(2, 3) = info(3, 2) = -0.25;
  g.add_edge(1, 5, random_pose(rng), info);
  g.set_fixed(3);
  std::stringstream ss;
  write_g2o(g, ss);
  const PoseGraph back = read_g2o(ss);
  ASSERT_EQ(back.node_count(), g.node_count());
  ASSERT_EQ(back.edges().size(), g.edges().size());
  for (int i = 0; i < g.node_count(); ++i) {
    EXPECT_LT(pose_distance(back.node(i), g.node(i)), 1e-12);
    EXPECT_EQ(back.is_fixed(i), g.is_fixed(i));
  }
  for (std::size_t k = 0; k < g.edges().size(); ++k) {
    EXPECT_EQ(back.edges()[k].from, g.edges()[k].from);
    EXPECT_EQ(back.edges()[k].to, g.edges()[k].to);
    EXPECT_LT(pose_distance(back.edges()[k].measurement, g.edges()[k].measurement), 1e-12);
    EXPECT_LT((back.edges()[k].information - g.edges()[k].information).cwiseAbs().maxCoeff(),
              1e-9 * g.edges()[k].information.cwiseAbs().maxCoeff());
  }
}

TEST(G2o, InformationConversion) {
  // Quaternion-vector error is half the rotation vector: with
  // e_g2o = (rho, omega / 2), e^T I_g2o e must equal xi^T I xi.
  std::mt19937_64 rng(12);
  Mat6 a;
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 36; ++i) a(i) = n(rng);
  const Mat6 info = a * a.transpose();
  const Mat6 g2o = information_to_g2o(info);
  const Vec6 xi = random_twist(rng, 1.0, 1.0);
  Vec6 e;
  e << xi.tail<3>(), 0.5 * xi.head<3>();
  EXPECT_NEAR(e.dot(g2o * e), xi.dot(info * xi), 1e-9 * std::abs(xi.dot(info * xi)));
  EXPECT_LT((information_from_g2o(g2o) - info).cwiseAbs().maxCoeff(), 1e-12 * info.cwiseAbs().maxCoeff());
}

TEST(G2o, RemapsVertexIdsAndReportsLine) {
  std::istringstream in(
      "# comment\n"
      "VERTEX_SE3:QUAT 10 0 0 0 0 0 0 1\n"
      "VERTEX_SE3:QUAT 20 1 0 0 0 0 0 1\n"
      "FIX 10\n"
      "EDGE_SE3:QUAT 10 20 1 0 0 0 0 0 1 1 0 0 0 0 0 1 0 0 0 0 1 0 0 0 1 0 0 1 0 1\n");
  const PoseGraph g = read_g2o(in);
  ASSERT_EQ(g.node_count(), 2);
  EXPECT_TRUE(g.is_fixed(0));
  EXPECT_EQ(g.edges()[0].from, 0);
  EXPECT_EQ(g.edges()[0].to, 1);
  EXPECT_EQ(g.node(1).translation, Vec3(1, 0, 0));

  std::istringstream bad("VERTEX_SE3:QUAT 0 0 0 0 0 0 0 1\nVERTEX_SE3:QUAT 1 0 0 zero 0 0 0 1\n");
  try {
    read_g2o(bad);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
  }
}

TEST(G2o, EdgesOnlyKeepRawIds) {
  std::istringstream in(
      "VERTEX_SE3:QUAT 10 0 0 0 0 0 0 1\n"
      "EDGE_SE3:QUAT 3 97 0.5 0 0 0 0 0 1 1 0 0 0 0 0 1 0 0 0 0 1 0 0 0 1 0 0 1 0 1\n");
  const auto edges = read_g2o_edges(in);
  ASSERT_EQ(edges.size(), 1u);
  EXPECT_EQ(edges[0].from, 3);
  EXPECT_EQ(edges[0].to, 97);
  EXPECT_EQ(edges[0].measurement.translation, Vec3(0.5, 0, 0));
}

}  // namespace
}  // namespace mvslam
