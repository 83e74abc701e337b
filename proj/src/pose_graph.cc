#include "mvslam/pose_graph.h"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "mvslam/errors.h"

namespace mvslam {

int PoseGraph::add_node(const Pose& pose, bool fixed) {
  nodes_.push_back(pose);
  fixed_.push_back(fixed);
  return static_cast<int>(nodes_.size()) - 1;
}

void PoseGraph::add_edge(int from, int to, const Pose& measurement, const Mat6& information) {
  if (from < 0 || to < 0 || from >= node_count() || to >= node_count()) {
    throw InvalidArgument("pose graph edge references a missing node");
  }
  if (!information.allFinite() ||
      (information - information.transpose()).cwiseAbs().maxCoeff() >
          1e-9 * (1.0 + information.cwiseAbs().maxCoeff())) {
    throw InvalidArgument("edge information matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat6> es(information);
  if (es.eigenvalues().minCoeff() < -1e-9 * (1.0 + information.cwiseAbs().maxCoeff())) {
    throw InvalidArgument("edge information matrix is not positive semi-definite");
  }
  edges_.push_back({from, to, measurement, information});
}

void PoseGraph::set_fixed(int node, bool fixed) { fixed_.at(node) = fixed; }

int PoseGraph::fixed_count() const {
  return static_cast<int>(std::count(fixed_.begin(), fixed_.end(), true));
}

void PoseGraph::validate() const {
  if (fixed_count() == 0) throw InvalidArgument("pose graph has no fixed node (gauge freedom)");
}

Mat6 odometry_information(double sigma_rot, double sigma_trans) {
  if (!(sigma_rot > 0.0) || !(sigma_trans > 0.0)) throw InvalidArgument("sigmas must be positive");
  Mat6 info = Mat6::Zero();
  info.diagonal().head<3>().setConstant(1.0 / (sigma_rot * sigma_rot));
  info.diagonal().tail<3>().setConstant(1.0 / (sigma_trans * sigma_trans));
  return info;
}

namespace {

Vec6 residual(const std::vector<Pose>& nodes, const PoseGraphEdge& e) {
  return se3_log(compose(inverse(e.measurement), compose(inverse(nodes[e.from]), nodes[e.to])));
}

// Robust cost and IRLS weight of one edge.
std::pair<double, double> edge_cost(const Vec6& r, const Mat6& info, double huber_delta) {
  const double c = r.dot(info * r);
  if (huber_delta <= 0.0) return {c, 1.0};
  const double s = std::sqrt(std::max(c, 0.0));
  if (s <= huber_delta) return {c, 1.0};
  return {2.0 * huber_delta * s - huber_delta * huber_delta, huber_delta / s};
}

double total_cost(const std::vector<Pose>& nodes, const std::vector<PoseGraphEdge>& edges,
                  double huber_delta) {
  double cost = 0.0;
  for (const auto& e : edges) cost += edge_cost(residual(nodes, e), e.information, huber_delta).first;
  return cost;
}

Mat6 small_adjoint(const Vec6& xi) {
  Mat6 ad = Mat6::Zero();
  ad.topLeftCorner<3, 3>() = skew(xi.head<3>());
  ad.bottomRightCorner<3, 3>() = skew(xi.head<3>());
  ad.bottomLeftCorner<3, 3>() = skew(xi.tail<3>());
  return ad;
}

EdgeJacobians jacobians(const std::vector<Pose>& nodes, const PoseGraphEdge& e, const Vec6& r) {
  const Mat6 jr_inv = Mat6::Identity() + 0.5 * small_adjoint(r);
  EdgeJacobians j;
  j.to = jr_inv * adjoint(inverse(nodes[e.to]));
  j.from = -j.to;
  return j;
}

}  // namespace

EdgeJacobians edge_jacobians(const PoseGraph& g, const PoseGraphEdge& e) {
  return jacobians(g.nodes(), e, residual(g.nodes(), e));
}

Vec6 edge_residual(const PoseGraph& g, const PoseGraphEdge& e) { return residual(g.nodes(), e); }

double graph_residual(const PoseGraph& g) { return total_cost(g.nodes(), g.edges(), 0.0); }

OptimizeResult optimize(const PoseGraph& g, const OptimizeOptions& options) {
  g.validate();
  OptimizeResult result{g, {}};
  OptimizeStats& stats = result.stats;
  std::vector<Pose> nodes = g.nodes();
  const auto& edges = g.edges();

  // Column offset of each free node in the reduced system; -1 for fixed nodes.
  std::vector<int> offset(nodes.size(), -1);
  int dim = 0;
  for (int i = 0; i < g.node_count(); ++i) {
    if (!g.is_fixed(i)) {
      offset[i] = dim;
      dim += 6;
    }
  }

  double cost = total_cost(nodes, edges, options.huber_delta);
  stats.initial_cost = stats.final_cost = cost;
  stats.cost_history.push_back(cost);
  double lambda = options.lambda0;
  if (dim == 0 || cost <= 1e-24) {
    stats.converged = true;
    stats.final_lambda = lambda;
    return result;
  }

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    stats.iterations = iter + 1;

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(edges.size() * 4 * 36);
    Eigen::VectorXd gradient = Eigen::VectorXd::Zero(dim);
    for (const auto& e : edges) {
      const Vec6 r = residual(nodes, e);
      const double weight = edge_cost(r, e.information, options.huber_delta).second;
      const EdgeJacobians j = jacobians(nodes, e, r);
      const Mat6 w_info = weight * e.information;
      const std::array<std::pair<int, const Mat6*>, 2> blocks{{{e.from, &j.from}, {e.to, &j.to}}};
      for (const auto& [na, ja] : blocks) {
        if (offset[na] < 0) continue;
        gradient.segment<6>(offset[na]) += ja->transpose() * w_info * r;
        for (const auto& [nb, jb] : blocks) {
          if (offset[nb] < 0) continue;
          const Mat6 h = ja->transpose() * w_info * *jb;
          for (int r6 = 0; r6 < 6; ++r6) {
            for (int c6 = 0; c6 < 6; ++c6) {
              if (h(r6, c6) != 0.0) triplets.emplace_back(offset[na] + r6, offset[nb] + c6, h(r6, c6));
            }
          }
        }
      }
    }
    Eigen::SparseMatrix<double> hessian(dim, dim);
    hessian.setFromTriplets(triplets.begin(), triplets.end());
    const Eigen::VectorXd diag = hessian.diagonal();

    bool accepted = false;
    double new_cost = cost;
    while (lambda < 1e16) {
      Eigen::SparseMatrix<double> damped = hessian;
      for (int k = 0; k < dim; ++k) damped.coeffRef(k, k) += lambda * std::max(diag(k), 1e-9);
      solver.compute(damped);
      Eigen::VectorXd delta;
      if (solver.info() == Eigen::Success) delta = solver.solve(-gradient);
      if (solver.info() != Eigen::Success || !delta.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      std::vector<Pose> candidate = nodes;
      for (int i = 0; i < g.node_count(); ++i) {
        if (offset[i] < 0) continue;
        candidate[i] = compose(se3_exp(delta.segment<6>(offset[i])), nodes[i]);
        candidate[i].scaled = nodes[i].scaled;
      }
      new_cost = total_cost(candidate, edges, options.huber_delta);
      if (std::isfinite(new_cost) && new_cost < cost) {
        nodes = std::move(candidate);
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      // Damping exhausted: no descent direction left at machine precision.
      stats.converged = true;
      break;
    }
    const double decrease = cost - new_cost;
    const double previous = cost;
    cost = new_cost;
    ++stats.accepted_steps;
    stats.cost_history.push_back(cost);
    if (decrease < options.tolerance * previous || cost <= 1e-24) {
      stats.converged = true;
      break;
    }
  }

  stats.final_cost = cost;
  stats.final_lambda = lambda;
  for (int i = 0; i < g.node_count(); ++i) result.graph.set_node(i, nodes[i]);
  return result;
}

}  // namespace mvslam
