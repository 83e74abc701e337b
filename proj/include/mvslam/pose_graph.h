#pragma once

// Pose-graph optimization over SE(3). Nodes are absolute camera-to-world
// poses, edges are relative-motion constraints Z_ij ~ X_i^-1 * X_j weighted
// by a 6x6 information matrix in (omega, rho) twist order.

#include <vector>

#include "mvslam/geometry.h"

namespace mvslam {

struct PoseGraphEdge {
  int from = 0;
  int to = 0;
  Pose measurement;
  Mat6 information = Mat6::Identity();
};

class PoseGraph {
 public:
  int add_node(const Pose& pose, bool fixed = false);
  // Throws InvalidArgument on unknown endpoints or an information matrix that
  // is not symmetric PSD.
  void add_edge(int from, int to, const Pose& measurement, const Mat6& information);
  void set_fixed(int node, bool fixed = true);

  int node_count() const { return static_cast<int>(nodes_.size()); }
  const std::vector<Pose>& nodes() const { return nodes_; }
  const Pose& node(int i) const { return nodes_.at(i); }
  void set_node(int i, const Pose& pose) { nodes_.at(i) = pose; }
  const std::vector<PoseGraphEdge>& edges() const { return edges_; }
  bool is_fixed(int i) const { return fixed_.at(i); }
  int fixed_count() const;

  // Throws InvalidArgument if no node is fixed.
  void validate() const;

 private:
  std::vector<Pose> nodes_;
  std::vector<bool> fixed_;
  std::vector<PoseGraphEdge> edges_;
};

// Block-diagonal information diag(sigma_rot^-2 I3, sigma_trans^-2 I3).
Mat6 odometry_information(double sigma_rot, double sigma_trans);

// log(Z^-1 * X_i^-1 * X_j) as an (omega, rho) twist.
Vec6 edge_residual(const PoseGraph& g, const PoseGraphEdge& e);

// d r / d xi for left perturbations X <- exp(xi) X of each endpoint, to
// first order in the residual (J_r^-1 ~ I + ad(r) / 2).
struct EdgeJacobians {
  Mat6 from;
  Mat6 to;
};
EdgeJacobians edge_jacobians(const PoseGraph& g, const PoseGraphEdge& e);

// Sum over edges of r^T Omega r.
double graph_residual(const PoseGraph& g);

struct OptimizeOptions {
  int max_iterations = 50;
  double lambda0 = 1e-4;
  // Stops when an accepted step lowers the cost by less than tol * cost.
  double tolerance = 1e-10;
  // Huber threshold on the whitened residual norm; 0 disables the kernel.
  double huber_delta = 0.0;
};

struct OptimizeStats {
  int iterations = 0;
  int accepted_steps = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  double final_lambda = 0.0;
  bool converged = false;
  // Cost after every accepted step, starting with the initial cost.
  std::vector<double> cost_history;
};

struct OptimizeResult {
  PoseGraph graph;
  OptimizeStats stats;
};

// Levenberg-Marquardt with left-multiplied twist updates X <- exp(xi) * X on
// the free nodes. The input graph is not modified. A singular damped system
// raises the damping instead of aborting.
OptimizeResult optimize(const PoseGraph& g, const OptimizeOptions& options = {});

}  // namespace mvslam
