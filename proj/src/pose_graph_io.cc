#include "mvslam/pose_graph_io.h"

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "mvslam/errors.h"

namespace mvslam {

Mat6 information_to_g2o(const Mat6& info) {
  Mat6 out;
  out.topLeftCorner<3, 3>() = info.bottomRightCorner<3, 3>();
  out.topRightCorner<3, 3>() = 2.0 * info.bottomLeftCorner<3, 3>();
  out.bottomLeftCorner<3, 3>() = 2.0 * info.topRightCorner<3, 3>();
  out.bottomRightCorner<3, 3>() = 4.0 * info.topLeftCorner<3, 3>();
  return out;
}

Mat6 information_from_g2o(const Mat6& g) {
  Mat6 out;
  out.topLeftCorner<3, 3>() = 0.25 * g.bottomRightCorner<3, 3>();
  out.topRightCorner<3, 3>() = 0.5 * g.bottomLeftCorner<3, 3>();
  out.bottomLeftCorner<3, 3>() = 0.5 * g.topRightCorner<3, 3>();
  out.bottomRightCorner<3, 3>() = g.topLeftCorner<3, 3>();
  return out;
}

namespace {

void write_pose(std::ostream& out, const Pose& p) {
  const Quaternion q = rot_to_quat(p.rotation);
  out << p.translation.x() << ' ' << p.translation.y() << ' ' << p.translation.z() << ' ' << q.x
      << ' ' << q.y << ' ' << q.z << ' ' << q.w;
}

Pose read_pose(std::istringstream& in, int line) {
  double x, y, z, qx, qy, qz, qw;
  if (!(in >> x >> y >> z >> qx >> qy >> qz >> qw)) throw ParseError("truncated SE3 pose", line);
  try {
    return Pose{quat_to_rot({qw, qx, qy, qz}), Vec3(x, y, z), true};
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what(), line);
  }
}

Mat6 read_information(std::istringstream& in, int line) {
  Mat6 info;
  for (int r = 0; r < 6; ++r) {
    for (int c = r; c < 6; ++c) {
      if (!(in >> info(r, c))) throw ParseError("truncated information matrix", line);
      info(c, r) = info(r, c);
    }
  }
  return information_from_g2o(info);
}

}  // namespace

void write_g2o(const PoseGraph& g, std::ostream& out) {
  out << std::setprecision(17);
  for (int i = 0; i < g.node_count(); ++i) {
    out << "VERTEX_SE3:QUAT " << i << ' ';
    write_pose(out, g.node(i));
    out << '\n';
  }
  for (const auto& e : g.edges()) {
    out << "EDGE_SE3:QUAT " << e.from << ' ' << e.to << ' ';
    write_pose(out, e.measurement);
    const Mat6 info = information_to_g2o(e.information);
    for (int r = 0; r < 6; ++r) {
      for (int c = r; c < 6; ++c) out << ' ' << info(r, c);
    }
    out << '\n';
  }
  for (int i = 0; i < g.node_count(); ++i) {
    if (g.is_fixed(i)) out << "FIX " << i << '\n';
  }
}

void write_g2o(const PoseGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  write_g2o(g, out);
}

PoseGraph read_g2o(std::istream& in) {
  PoseGraph g;
  std::map<long, int> index;
  std::string line;
  int line_no = 0;
  auto lookup = [&](long id) {
    const auto it = index.find(id);
    if (it == index.end()) throw ParseError("unknown vertex id " + std::to_string(id), line_no);
    return it->second;
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag[0] == '#') continue;
    if (tag == "VERTEX_SE3:QUAT") {
      long id;
      if (!(ss >> id)) throw ParseError("missing vertex id", line_no);
      if (index.count(id)) throw ParseError("duplicate vertex id", line_no);
      index[id] = g.add_node(read_pose(ss, line_no));
    } else if (tag == "EDGE_SE3:QUAT") {
      long a, b;
      if (!(ss >> a >> b)) throw ParseError("missing edge endpoints", line_no);
      const int from = lookup(a), to = lookup(b);
      const Pose z = read_pose(ss, line_no);
      const Mat6 info = read_information(ss, line_no);
      try {
        g.add_edge(from, to, z, info);
      } catch (const InvalidArgument& e) {
        throw ParseError(e.what(), line_no);
      }
    } else if (tag == "FIX") {
      long id;
      while (ss >> id) g.set_fixed(lookup(id));
    } else {
      throw ParseError("unsupported record '" + tag + "'", line_no);
    }
  }
  return g;
}

PoseGraph read_g2o(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_g2o(in);
}

std::vector<PoseGraphEdge> read_g2o_edges(std::istream& in) {
  std::vector<PoseGraphEdge> edges;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag != "EDGE_SE3:QUAT") continue;
    PoseGraphEdge e;
    if (!(ss >> e.from >> e.to)) throw ParseError("missing edge endpoints", line_no);
    if (e.from < 0 || e.to < 0) throw ParseError("negative edge endpoint", line_no);
    e.measurement = read_pose(ss, line_no);
    e.information = read_information(ss, line_no);
    edges.push_back(e);
  }
  return edges;
}

std::vector<PoseGraphEdge> read_g2o_edges(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_g2o_edges(in);
}

}  // namespace mvslam
