#pragma once

#include "splinestroke/render/traj2stroke.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

namespace splinestroke::render {

/// One observed stroke: the commanded trajectory and placement, and the
/// canvas photographed before and after it was drawn ([H,W,3] in [0,1]).
struct StrokeTriple {
  trajectory::Trajectory trajectory;
  PoseOffset delta;
  Tensor before;
  Tensor after;
  /// Paint color; estimated from the images when absent.
  std::optional<Eigen::Vector3d> color;
};

struct RendererTrainConfig {
  std::size_t epochs = 2000;
  /// Step size relative to each parameter's initial magnitude.
  double lr = 0.02;
  double stroke_weight = 5.0;
  RendererParams init;
  /// Lower bound on the per-parameter step scale, so parameters that start
  /// at 0 (the offsets) still move.
  double min_scale = 0.01;
  std::function<void(std::size_t epoch, double loss)> on_epoch;
};

struct RendererTrainResult {
  RendererParams params;
  double initial_loss = 0.0;
  double best_loss = 0.0;
  std::size_t best_epoch = 0;
};

/// Mean color of the pixels that changed most between before and after.
Eigen::Vector3d estimate_stroke_color(const Tensor& before, const Tensor& after);

/// mean(w * |stamp(before, render, color) - after|) over all triples, with
/// w = 1 + stroke_weight * darkness (darkness detached). Differentiable
/// w.r.t. `params` [7].
Tensor renderer_loss(const std::vector<StrokeTriple>& data, const std::vector<Eigen::Vector3d>& colors,
                     const Tensor& params, double stroke_weight);

/// Full-batch Adam with cosine step decay; returns the best parameters seen.
RendererTrainResult train_renderer(const std::vector<StrokeTriple>& data, const RendererTrainConfig& config);

/// Writes {idx}.traj.json, {idx}.before.png, {idx}.after.png into `dir`.
void save_triple(const std::filesystem::path& dir, std::size_t index, const StrokeTriple& triple);
/// Loads every {idx}.traj.json in `dir` (or in `dir`/triples when present),
/// ordered by index.
std::vector<StrokeTriple> load_triples(const std::filesystem::path& dir);

}  // namespace splinestroke::render
