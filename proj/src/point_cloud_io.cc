#include <fstream>
#include <sstream>
#include <string>

#include "mvslam/binary_io.h"
#include "mvslam/errors.h"
#include "mvslam/tsdf.h"

namespace mvslam {

void write_ply(const PointCloud& cloud, std::ostream& out) {
  const bool color = !cloud.colors.empty();
  if (color && cloud.colors.size() != cloud.points.size()) {
    throw InvalidArgument("point cloud color count does not match point count");
  }
  out << "ply\nformat binary_little_endian 1.0\n";
  out << "element vertex " << cloud.points.size() << '\n';
  out << "property float x\nproperty float y\nproperty float z\n";
  if (color) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    for (int a = 0; a < 3; ++a) write_le<float>(out, static_cast<float>(cloud.points[i][a]));
    if (color) {
      for (std::uint8_t c : cloud.colors[i]) write_le<std::uint8_t>(out, c);
    }
  }
  if (!out) throw DataError("failed writing PLY");
}

void write_ply(const PointCloud& cloud, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  write_ply(cloud, out);
}

// Reads the layout written by write_ply.
PointCloud read_ply(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "ply") throw FormatError("missing ply magic");
  std::size_t count = 0;
  bool color = false;
  bool binary_le = false;
  while (std::getline(in, line) && line != "end_header") {
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "format") {
      std::string fmt;
      ss >> fmt;
      binary_le = fmt == "binary_little_endian";
    } else if (word == "element") {
      std::string name;
      ss >> name >> count;
      if (name != "vertex") throw FormatError("unsupported PLY element " + name);
    } else if (word == "property") {
      std::string type, name;
      ss >> type >> name;
      if (name == "red") color = true;
    }
  }
  if (!binary_le) throw FormatError("only binary_little_endian PLY is supported");
  PointCloud cloud;
  cloud.points.resize(count);
  if (color) cloud.colors.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    for (int a = 0; a < 3; ++a) cloud.points[i][a] = read_le<float>(in);
    if (color) {
      for (auto& c : cloud.colors[i]) c = read_le<std::uint8_t>(in);
    }
  }
  return cloud;
}

PointCloud read_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return read_ply(in);
}

}  // namespace mvslam
