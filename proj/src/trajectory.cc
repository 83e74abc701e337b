#include "mvslam/trajectory.h"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mvslam/errors.h"

namespace mvslam {

void Trajectory::push_back(const TrajectoryEntry& entry) {
  if (!std::isfinite(entry.timestamp)) throw InvalidArgument("trajectory timestamp not finite");
  if (!entries_.empty() && !(entry.timestamp > entries_.back().timestamp)) {
    throw InvalidArgument("trajectory timestamps must be strictly increasing");
  }
  if (!is_rotation(entry.pose.rotation, 1e-6) || !entry.pose.translation.allFinite()) {
    throw InvalidArgument("trajectory pose is not a valid rigid transform");
  }
  entries_.push_back(entry);
}

std::optional<std::size_t> Trajectory::find(std::int64_t frame_id) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].frame_id == frame_id) return i;
  }
  return std::nullopt;
}

Trajectory load_trajectory(std::istream& in) {
  Trajectory traj;
  std::string line;
  int line_no = 0;
  std::int64_t frame = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    double ts, tx, ty, tz, qx, qy, qz, qw;
    if (!(ss >> ts >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
      throw ParseError("expected 'timestamp tx ty tz qx qy qz qw'", line_no);
    }
    std::string extra;
    if (ss >> extra) throw ParseError("trailing data after pose", line_no);
    try {
      traj.push_back(frame++, ts, Pose{quat_to_rot({qw, qx, qy, qz}), Vec3(tx, ty, tz), true});
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return traj;
}

Trajectory load_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trajectory " + path);
  return load_trajectory(in);
}

void save_trajectory(const Trajectory& traj, std::ostream& out) {
  out << "# timestamp tx ty tz qx qy qz qw\n";
  out << std::setprecision(9);
  for (const auto& e : traj) {
    const Quaternion q = rot_to_quat(e.pose.rotation);
    const Vec3& t = e.pose.translation;
    out << e.timestamp << ' ' << t.x() << ' ' << t.y() << ' ' << t.z() << ' ' << q.x << ' ' << q.y
        << ' ' << q.z << ' ' << q.w << '\n';
  }
}

void save_trajectory(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  save_trajectory(traj, out);
  if (!out) throw DataError("failed writing " + path);
}

}  // namespace mvslam
