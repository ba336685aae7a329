#pragma once

#include "splinestroke/planner/kmeans.hpp"
#include "splinestroke/planner/loss.hpp"
#include "splinestroke/planner/plan.hpp"
#include "splinestroke/vae/trajvae.hpp"

#include <functional>
#include <random>

namespace splinestroke::planner {

struct HeightBounds {
  double min = 0.0;
  double max = 0.02;
};

/// decode(z) with its height column replaced by `heights` [n]; [n,3].
Tensor stroke_trajectory(const vae::TrajVae& vae, const Tensor& z, const Tensor& heights);

/// The stroke's canvas-frame trajectory, as exported and as rasterized.
trajectory::Trajectory canvas_trajectory(const StrokeAction& action, const vae::TrajVae& vae,
                                         const render::RendererParams& params);

/// Background, then every action stamped in order. No gradient tracking.
Tensor render_plan(const PaintingPlan& plan, const vae::TrajVae& vae, const render::RendererParams& params);

/// Renders a plan from its stored canvas-frame trajectories. Only the
/// thickness and darkness parameters are used; placement is already baked in.
Tensor render_exported(const ExportedPlan& exported, const render::RendererParams& params);

ExportedPlan export_plan(const PaintingPlan& plan, const vae::TrajVae& vae, const render::RendererParams& params);

/// Random plan: z ~ N(0, I), start positions uniform over the canvas,
/// rotation uniform in (-pi, pi], heights mid-range, colors uniform.
PaintingPlan init_plan(std::size_t n_strokes, const Canvas& canvas, std::size_t n_points, std::mt19937_64& rng,
                       HeightBounds bounds = {});

struct OptimizeConfig {
  std::size_t iterations = 2000;
  double lr = 0.02;
  /// Strokes updated per iteration; 0 or >= plan size means all.
  std::size_t batch_size = 80;
  /// Palette size for the discretization pass; 0 skips it.
  std::size_t n_colors = 8;
  /// Fraction of the run after which colors are discretized and frozen.
  double discretize_at = 0.9;
  std::uint64_t seed = 0;
  HeightBounds heights;
  /// Step multipliers for placement/heights, latent, and color groups.
  double position_lr = 1.0;
  double latent_lr = 10.0;
  double color_lr = 1.0;
  /// Hinge penalty latent_prior * max(0, mean(z^2) - latent_free) on each
  /// active latent. Keeps decoded strokes inside the region the VAE was
  /// trained on without pulling small latents toward zero.
  double latent_prior = 3e-3;
  double latent_free = 1.0;
  /// Fraction of the run after which the step size follows a cosine down to
  /// zero; 1 keeps it constant, 0 decays over the whole run.
  double decay_start = 1.0;
  /// Clamp stroke start positions to the canvas after each step.
  bool keep_on_canvas = false;
  std::function<void(std::size_t iteration, double loss)> on_iteration;
};

struct OptimizeResult {
  PaintingPlan plan;
  double initial_loss = 0.0;
  double best_loss = 0.0;
  std::size_t best_iteration = 0;
  std::vector<double> history;  ///< objective at each iteration
};

/// Gradient descent on every stroke's z, placement, heights and color.
/// Returns the best plan seen; once colors are discretized only
/// discretized plans are eligible.
OptimizeResult optimize(const PaintingPlan& plan, const Tensor& target, const LossSpec& loss, const vae::TrajVae& vae,
                        const render::RendererParams& params, const OptimizeConfig& config);

}  // namespace splinestroke::planner
