#include "splinestroke/trajectory/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace splinestroke::trajectory {

namespace {

void require_finite(const Trajectory& traj, const char* where) {
  if (!traj.points.allFinite()) throw TrajectoryError(std::string(where) + ": non-finite coordinates");
}

}  // namespace

Eigen::Vector3d pen_tip(const PoseSample& pose, double pen_length, const Eigen::Vector3d& tip_axis) {
  if (std::abs(pose.orientation.norm() - 1.0) > 1e-6) {
    throw TrajectoryError("pen_tip: orientation is not a unit quaternion (norm " +
                          std::to_string(pose.orientation.norm()) + ")");
  }
  if (pen_length < 0.0) throw TrajectoryError("pen_tip: negative pen length");
  return pose.position + pose.orientation * (pen_length * tip_axis);
}

CanvasFrame canvas_frame(const std::array<Eigen::Vector3d, 3>& markers) {
  const Eigen::Vector3d ex = markers[1] - markers[0];
  const Eigen::Vector3d ey = markers[2] - markers[0];
  if (ex.cross(ey).norm() < 1e-9) throw TrajectoryError("canvas_frame: corner markers are collinear");
  CanvasFrame f;
  f.origin = markers[0];
  f.width = ex.norm();
  f.height = ey.norm();
  f.x_axis = ex / f.width;
  f.y_axis = (ey - ey.dot(f.x_axis) * f.x_axis).normalized();
  f.normal = f.x_axis.cross(f.y_axis);
  return f;
}

Eigen::Vector3d to_canvas(const CanvasFrame& frame, const Eigen::Vector3d& world) {
  const Eigen::Vector3d d = world - frame.origin;
  return Eigen::Vector3d(d.dot(frame.x_axis), d.dot(frame.y_axis), d.dot(frame.normal)) / frame.width;
}

std::vector<Trajectory> extract_strokes(std::span<const Eigen::Vector3d> canvas_points,
                                        const ExtractOptions& options) {
  if (!(options.contact_threshold > 0.0)) throw TrajectoryError("extract_strokes: threshold must be positive");
  std::vector<Trajectory> strokes;
  std::size_t i = 0;
  const std::size_t n = canvas_points.size();
  while (i < n) {
    if (!(canvas_points[i].z() < options.contact_threshold)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && canvas_points[j].z() < options.contact_threshold) ++j;
    if (j - i >= options.min_samples) {
      Trajectory t;
      t.points.resize(static_cast<Eigen::Index>(j - i), 3);
      for (std::size_t k = i; k < j; ++k) t.points.row(static_cast<Eigen::Index>(k - i)) = canvas_points[k].transpose();
      strokes.push_back(std::move(t));
    }
    i = j;
  }
  return strokes;
}

std::vector<Trajectory> extract_strokes(std::span<const TipSample> tips, const CanvasFrame& frame,
                                        const ExtractOptions& options) {
  std::vector<Eigen::Vector3d> projected;
  projected.reserve(tips.size());
  for (const auto& s : tips) projected.push_back(to_canvas(frame, s.tip));
  return extract_strokes(projected, options);
}

Standardized standardize(const Trajectory& traj) {
  if (traj.size() < 2) throw TrajectoryError("standardize: need at least 2 points");
  require_finite(traj, "standardize");
  Standardized out;
  out.trajectory = traj;
  Points& p = out.trajectory.points;
  const Eigen::RowVector2d start = p.row(0).head<2>();
  p.leftCols<2>().rowwise() -= start;

  const Eigen::Vector2d end = p.row(p.rows() - 1).head<2>().transpose();
  const double d = end.norm();
  if (d == 0.0) return out;

  out.angle = -std::atan2(end.y(), end.x());
  const Eigen::Matrix2d r = Eigen::Rotation2Dd(out.angle).toRotationMatrix();
  p.leftCols<2>() = (p.leftCols<2>() * r.transpose()).eval();
  p(p.rows() - 1, 0) = d;
  p(p.rows() - 1, 1) = 0.0;
  return out;
}

double arc_length(const Trajectory& traj) {
  double total = 0.0;
  for (Eigen::Index i = 1; i < traj.points.rows(); ++i) total += (traj.planar(i) - traj.planar(i - 1)).norm();
  return total;
}

Trajectory resample(const Trajectory& traj, std::size_t n) {
  if (n < 2) throw TrajectoryError("resample: n must be at least 2");
  if (traj.size() < 2) throw TrajectoryError("resample: need at least 2 input points");
  require_finite(traj, "resample");
  const Eigen::Index m = traj.points.rows();
  std::vector<double> cumulative(static_cast<std::size_t>(m), 0.0);
  for (Eigen::Index i = 1; i < m; ++i) {
    cumulative[static_cast<std::size_t>(i)] =
        cumulative[static_cast<std::size_t>(i - 1)] + (traj.planar(i) - traj.planar(i - 1)).norm();
  }
  const double total = cumulative.back();

  Trajectory out;
  out.points.resize(static_cast<Eigen::Index>(n), 3);
  if (total == 0.0) {
    out.points.rowwise() = traj.points.row(0);
    return out;
  }
  Eigen::Index seg = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double target = total * static_cast<double>(k) / static_cast<double>(n - 1);
    while (seg < m - 2 && cumulative[static_cast<std::size_t>(seg + 1)] < target) ++seg;
    const double s0 = cumulative[static_cast<std::size_t>(seg)];
    const double s1 = cumulative[static_cast<std::size_t>(seg + 1)];
    const double w = s1 > s0 ? std::clamp((target - s0) / (s1 - s0), 0.0, 1.0) : 0.0;
    out.points.row(static_cast<Eigen::Index>(k)) = (1.0 - w) * traj.points.row(seg) + w * traj.points.row(seg + 1);
  }
  out.points.row(0) = traj.points.row(0);
  out.points.row(static_cast<Eigen::Index>(n) - 1) = traj.points.row(m - 1);
  return out;
}

}  // namespace splinestroke::trajectory
