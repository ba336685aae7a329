#pragma once

#include "splinestroke/render/traj2stroke.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <vector>

namespace splinestroke::planner {

inline constexpr const char* kPlanVersion = "splineplan/1";

struct Canvas {
  std::size_t height = 128;
  std::size_t width = 128;
  Eigen::Vector3d background = Eigen::Vector3d::Ones();
};

/// One planned stroke. Heights are absolute (canvas-normalized units).
struct StrokeAction {
  Eigen::VectorXd z;
  render::PoseOffset delta;
  Eigen::VectorXd heights;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
};

/// Ordered strokes plus the canvas they are painted on. `vae_ref` and
/// `renderer_ref` name the checkpoints the plan was made with.
struct PaintingPlan {
  std::vector<StrokeAction> actions;
  Canvas canvas;
  std::string vae_ref;
  std::string renderer_ref;
  std::vector<Eigen::Vector3d> palette;
};

/// A plan as written to disk: the plan itself plus each stroke's decoded,
/// reoriented canvas-frame trajectory ([n,3] rows of x, y, h).
struct ExportedPlan {
  PaintingPlan plan;
  std::vector<trajectory::Trajectory> trajectories;
};

void write_plan(const std::filesystem::path& path, const ExportedPlan& exported);
ExportedPlan read_plan(const std::filesystem::path& path);

/// Plain-text palette listing, one "index r g b #rrggbb" line per color.
std::string palette_report(const std::vector<Eigen::Vector3d>& palette);

}  // namespace splinestroke::planner
