#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mvslam/geometry.h"

namespace mvslam {

struct TrajectoryEntry {
  std::int64_t frame_id = 0;
  double timestamp = 0.0;
  // Camera-to-world.
  Pose pose;
};

// Time-ordered camera poses. Timestamps are strictly increasing.
class Trajectory {
 public:
  // Throws InvalidArgument if the timestamp does not increase, or the
  // rotation is not a valid rotation matrix (1e-6 tolerance).
  void push_back(const TrajectoryEntry& entry);
  void push_back(std::int64_t frame_id, double timestamp, const Pose& pose) {
    push_back({frame_id, timestamp, pose});
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const TrajectoryEntry& operator[](std::size_t i) const { return entries_[i]; }
  const std::vector<TrajectoryEntry>& entries() const { return entries_; }
  std::vector<TrajectoryEntry>::const_iterator begin() const { return entries_.begin(); }
  std::vector<TrajectoryEntry>::const_iterator end() const { return entries_.end(); }
  void set_pose(std::size_t i, const Pose& pose) { entries_.at(i).pose = pose; }

  std::optional<std::size_t> find(std::int64_t frame_id) const;

 private:
  std::vector<TrajectoryEntry> entries_;
};

// TUM text format, one pose per line: "timestamp tx ty tz qx qy qz qw".
// Lines starting with '#' and blank lines are ignored; frame ids are the
// 0-based order of the data lines. Throws ParseError with the line number.
Trajectory load_trajectory(std::istream& in);
Trajectory load_trajectory(const std::string& path);
// Writes 9 significant digits per value.
void save_trajectory(const Trajectory& traj, std::ostream& out);
void save_trajectory(const Trajectory& traj, const std::string& path);

}  // namespace mvslam
