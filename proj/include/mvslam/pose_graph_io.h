#pragma once

// g2o-compatible plain text:
//
//   VERTEX_SE3:QUAT id x y z qx qy qz qw
//   EDGE_SE3:QUAT id_from id_to x y z qx qy qz qw I11 I12 .. I16 I22 .. I66
//   FIX id
//
// The 21 information entries are the upper triangle, row-major, in g2o's
// error order (tx ty tz qx qy qz). g2o's rotation error is the quaternion
// vector part (about half the rotation vector), so the rotation block is the
// in-memory (omega) block scaled by 4 and the mixed block by 2.
// Vertex ids are written as node indices; on read they are remapped to
// indices in order of appearance.

#include <iosfwd>
#include <string>
#include <vector>

#include "mvslam/pose_graph.h"

namespace mvslam {

void write_g2o(const PoseGraph& g, std::ostream& out);
void write_g2o(const PoseGraph& g, const std::string& path);
// Throws ParseError (with line number) on malformed input.
PoseGraph read_g2o(std::istream& in);
PoseGraph read_g2o(const std::string& path);

// EDGE_SE3:QUAT records only, endpoint ids kept as written; other record
// types are skipped. Used to inject constraints between frame indices.
std::vector<PoseGraphEdge> read_g2o_edges(std::istream& in);
std::vector<PoseGraphEdge> read_g2o_edges(const std::string& path);

// Information matrix conversions between (omega, rho) and g2o (t, q_vec) order.
Mat6 information_to_g2o(const Mat6& info);
Mat6 information_from_g2o(const Mat6& info_g2o);

}  // namespace mvslam
