#pragma once

#include "splinestroke/trajectory/trajectory.hpp"

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace splinestroke::trajectory {

/// One line of a recorded pose stream:
/// `{"t": s, "pen": {"pos": [x,y,z], "quat": [w,x,y,z]}, "canvas_markers": [[..],[..],[..]]}`
struct PoseRecord {
  PoseSample pen;
  std::array<Eigen::Vector3d, 3> canvas_markers;
};

/// Parses a pose-stream JSONL file. Malformed lines and non-increasing
/// timestamps raise TrajectoryError naming the 1-based line number.
std::vector<PoseRecord> read_pose_stream(std::istream& is);
std::vector<PoseRecord> read_pose_stream(const std::filesystem::path& path);
void write_pose_stream(const std::filesystem::path& path, const std::vector<PoseRecord>& records);

/// Trajectory dataset JSONL, one `{"points": [[x,y,h], ...]}` per line.
std::vector<Trajectory> read_dataset(std::istream& is);
std::vector<Trajectory> read_dataset(const std::filesystem::path& path);
void write_dataset(std::ostream& os, const std::vector<Trajectory>& trajectories);
void write_dataset(const std::filesystem::path& path, const std::vector<Trajectory>& trajectories);

struct IngestOptions {
  ExtractOptions extract;
  std::size_t n = kDefaultPointCount;
  double pen_length = 0.15;
  Eigen::Vector3d tip_axis = -Eigen::Vector3d::UnitZ();
};

/// Pose stream -> standardized, resampled strokes. The canvas frame is
/// re-derived from each sample's markers, so a moving canvas is tracked.
std::vector<Trajectory> ingest(const std::vector<PoseRecord>& stream, const IngestOptions& options = {});

}  // namespace splinestroke::trajectory
