#pragma once

#include "splinestroke/error.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace splinestroke::trajectory {

class TrajectoryError : public Error {
 public:
  using Error::Error;
};

/// Control-point count used throughout the pipeline.
inline constexpr std::size_t kDefaultPointCount = 32;
inline constexpr double kDefaultContactThreshold = 0.005;
inline constexpr std::size_t kDefaultMinSamples = 3;

/// n x 3 control points, columns (x, y, h).
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Polyline through n control points in canvas-normalized units: the canvas
/// width maps to 1, and x, y, h share that scale.
struct Trajectory {
  Points points;

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  Eigen::Vector2d planar(Eigen::Index i) const { return points.row(i).head<2>().transpose(); }
};

struct PoseSample {
  double t = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
};

struct CanvasFrame {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d x_axis = Eigen::Vector3d::UnitX();
  Eigen::Vector3d y_axis = Eigen::Vector3d::UnitY();
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double width = 1.0;
  double height = 1.0;
};

/// Pen-tip location: body position plus the body-frame tip offset rotated
/// into the world. Throws when the orientation is not a unit quaternion.
Eigen::Vector3d pen_tip(const PoseSample& pose, double pen_length, const Eigen::Vector3d& tip_axis);

/// Frame from three corner markers: origin at the first, x toward the
/// second, y Gram-Schmidt orthogonalized toward the third.
CanvasFrame canvas_frame(const std::array<Eigen::Vector3d, 3>& markers);

/// World point -> canvas-normalized (x, y, h), h being height above the
/// canvas plane.
Eigen::Vector3d to_canvas(const CanvasFrame& frame, const Eigen::Vector3d& world);

struct TipSample {
  double t = 0.0;
  Eigen::Vector3d tip = Eigen::Vector3d::Zero();
};

struct ExtractOptions {
  double contact_threshold = kDefaultContactThreshold;
  std::size_t min_samples = kDefaultMinSamples;
};

/// Maximal runs of samples whose height is below the contact threshold, one
/// trajectory per run. Runs shorter than `min_samples` are dropped.
std::vector<Trajectory> extract_strokes(std::span<const Eigen::Vector3d> canvas_points,
                                        const ExtractOptions& options = {});
std::vector<Trajectory> extract_strokes(std::span<const TipSample> tips, const CanvasFrame& frame,
                                        const ExtractOptions& options = {});

struct Standardized {
  Trajectory trajectory;
  /// Rotation applied to the translated points, radians.
  double angle = 0.0;
};

/// Translate the first point to the origin and rotate (proper rotation) so
/// the last point lands on the non-negative x axis. Heights are untouched.
/// Coincident endpoints get the translation only and angle 0.
Standardized standardize(const Trajectory& traj);

/// n points at equal arc-length fractions of the planar polyline; h is
/// interpolated with the same parameter. Endpoints are copied exactly.
Trajectory resample(const Trajectory& traj, std::size_t n = kDefaultPointCount);

double arc_length(const Trajectory& traj);

}  // namespace splinestroke::trajectory
