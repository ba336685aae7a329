#include "splinestroke/planner/planner.hpp"

#include "splinestroke/grad/ops.hpp"
#include "splinestroke/grad/optim.hpp"
#include "splinestroke/planner/compose.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

namespace splinestroke::planner {

namespace g = grad;
using Index = Eigen::Index;

Tensor stroke_trajectory(const vae::TrajVae& vae, const Tensor& z, const Tensor& heights) {
  if (heights.size() != vae.n()) {
    throw Error("stroke has " + std::to_string(heights.size()) + " heights, VAE expects " + std::to_string(vae.n()));
  }
  const Tensor decoded = vae.decode(z);
  return g::concat({g::slice(decoded, 1, 0, 2), g::reshape(heights, {vae.n(), 1})}, 1);
}

namespace {

Tensor canvas_tensor(const StrokeAction& a, const vae::TrajVae& vae, const Tensor& params) {
  return render::reorient(stroke_trajectory(vae, Tensor::vector(a.z), Tensor::vector(a.heights)), a.delta.to_tensor(),
                          params);
}

void check_target(const Canvas& canvas, const Tensor& image) {
  if (image.shape() != g::Shape{canvas.height, canvas.width, 3}) {
    throw Error("target " + g::to_string(image.shape()) + " does not match canvas [" + std::to_string(canvas.height) +
                "," + std::to_string(canvas.width) + ",3]");
  }
  if (!image.value().allFinite()) throw Error("target contains non-finite values");
}

}  // namespace

trajectory::Trajectory canvas_trajectory(const StrokeAction& action, const vae::TrajVae& vae,
                                         const render::RendererParams& params) {
  g::NoGradGuard ng;
  return render::to_trajectory(canvas_tensor(action, vae, params.to_tensor()));
}

Tensor render_plan(const PaintingPlan& plan, const vae::TrajVae& vae, const render::RendererParams& params) {
  g::NoGradGuard ng;
  const Tensor p = params.to_tensor();
  Tensor canvas = solid_canvas(plan.canvas.height, plan.canvas.width, plan.canvas.background);
  for (const auto& a : plan.actions) {
    const Tensor dark = render::rasterize(canvas_tensor(a, vae, p), p, plan.canvas.height, plan.canvas.width);
    canvas = stamp(canvas, dark, Tensor::vector(a.color));
  }
  return canvas;
}

Tensor render_exported(const ExportedPlan& exported, const render::RendererParams& params) {
  g::NoGradGuard ng;
  const Canvas& c = exported.plan.canvas;
  const Tensor p = params.to_tensor();
  Tensor canvas = solid_canvas(c.height, c.width, c.background);
  for (std::size_t i = 0; i < exported.trajectories.size(); ++i) {
    const Tensor dark = render::rasterize(render::to_tensor(exported.trajectories[i]), p, c.height, c.width);
    canvas = stamp(canvas, dark, Tensor::vector(exported.plan.actions[i].color));
  }
  return canvas;
}

ExportedPlan export_plan(const PaintingPlan& plan, const vae::TrajVae& vae, const render::RendererParams& params) {
  ExportedPlan out{plan, {}};
  for (const auto& a : plan.actions) out.trajectories.push_back(canvas_trajectory(a, vae, params));
  return out;
}

PaintingPlan init_plan(std::size_t n_strokes, const Canvas& canvas, std::size_t n_points, std::mt19937_64& rng,
                       HeightBounds bounds) {
  if (n_strokes == 0) throw Error("init_plan: need at least one stroke");
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PaintingPlan plan;
  plan.canvas = canvas;
  for (std::size_t s = 0; s < n_strokes; ++s) {
    StrokeAction a;
    a.z.resize(vae::kLatentDim);
    for (auto& v : a.z) v = normal(rng);
    a.delta.dx = unit(rng);
    a.delta.dy = unit(rng);
    a.delta.dtheta = render::wrap_angle(std::numbers::pi * (2.0 * unit(rng) - 1.0));
    a.heights = Eigen::VectorXd::Constant(static_cast<Index>(n_points), 0.5 * (bounds.min + bounds.max));
    a.color = Eigen::Vector3d(unit(rng), unit(rng), unit(rng));
    plan.actions.push_back(std::move(a));
  }
  return plan;
}

namespace {

/// Leaf tensors for one stroke. Heights live in [0,1] and map linearly onto
/// the height bounds.
struct StrokeLeaves {
  Tensor z, delta, unit_heights, color;
};

StrokeLeaves make_leaves(const StrokeAction& a, const HeightBounds& b) {
  const double span = b.max - b.min;
  Eigen::VectorXd unit = span > 0 ? Eigen::VectorXd(((a.heights.array() - b.min) / span).cwiseMax(0.0).cwiseMin(1.0))
                                  : Eigen::VectorXd::Zero(a.heights.size());
  return {Tensor::vector(a.z, true), a.delta.to_tensor(true), Tensor::vector(unit, true), Tensor::vector(a.color, true)};
}

StrokeAction to_action(const StrokeLeaves& l, const HeightBounds& b) {
  StrokeAction a;
  a.z = Eigen::Map<const Eigen::VectorXd>(l.z.value().data(), l.z.value().size());
  a.delta = render::PoseOffset::from_tensor(l.delta);
  a.heights = (b.min + (b.max - b.min) * l.unit_heights.value()).matrix();
  a.color = Eigen::Vector3d(l.color[0], l.color[1], l.color[2]);
  return a;
}

std::vector<bool> active_window(std::size_t iteration, std::size_t n, std::size_t batch) {
  std::vector<bool> active(n, true);
  if (batch == 0 || batch >= n) return active;
  std::fill(active.begin(), active.end(), false);
  const std::size_t start = (iteration * batch) % n;
  for (std::size_t k = 0; k < batch; ++k) active[(start + k) % n] = true;
  return active;
}

}  // namespace

OptimizeResult optimize(const PaintingPlan& plan, const Tensor& target, const LossSpec& loss, const vae::TrajVae& vae,
                        const render::RendererParams& params, const OptimizeConfig& config) {
  check_target(plan.canvas, target);
  const HeightBounds& hb = config.heights;
  if (!(hb.max >= hb.min)) throw Error("optimize: height bounds are inverted");
  const std::size_t n = plan.actions.size();
  const std::size_t H = plan.canvas.height, W = plan.canvas.width;

  OptimizeResult result;
  result.plan = plan;
  std::vector<StrokeLeaves> leaves;
  for (const auto& a : plan.actions) leaves.push_back(make_leaves(a, hb));

  g::Adam adam(g::AdamOptions{config.lr});
  for (auto& l : leaves) {
    adam.add(l.delta, config.position_lr);
    adam.add(l.unit_heights, config.position_lr);
    adam.add(l.z, config.latent_lr);
    adam.add(l.color, config.color_lr);
  }
  const Tensor p = params.to_tensor();
  const Tensor background = solid_canvas(H, W, plan.canvas.background);
  const PreparedTarget prepared = prepare_target(loss, target);
  const std::size_t discretize_iteration =
      config.n_colors > 0 ? static_cast<std::size_t>(std::floor(config.discretize_at * static_cast<double>(config.iterations)))
                          : config.iterations + 1;
  std::optional<std::vector<Eigen::Vector3d>> palette;
  std::mt19937_64 rng(config.seed);
  auto& tape = g::Tape::current();

  auto snapshot = [&] {
    PaintingPlan out = plan;
    for (std::size_t s = 0; s < n; ++s) out.actions[s] = to_action(leaves[s], hb);
    if (palette) out.palette = *palette;
    return out;
  };

  for (std::size_t it = 0; it <= config.iterations; ++it) {
    if (it == discretize_iteration && n > 0 && it < config.iterations) {
      const PaintingPlan discrete = discretize_colors(snapshot(), config.n_colors, rng);
      for (std::size_t s = 0; s < n; ++s) {
        leaves[s].color.mutable_value() = discrete.actions[s].color.array();
        leaves[s].color.set_requires_grad(false);
      }
      palette = discrete.palette;
      result.best_loss = std::numeric_limits<double>::infinity();
    }
    const bool last = it == config.iterations;
    const std::vector<bool> active = active_window(it, n, config.batch_size);
    tape.clear();
    for (auto& l : leaves) {
      l.z.zero_grad();
      l.delta.zero_grad();
      l.unit_heights.zero_grad();
      l.color.zero_grad();
    }

    Tensor objective;
    std::size_t current = 0;
    try {
      std::optional<g::NoGradGuard> guard;
      if (last) guard.emplace();
      Tensor canvas = background;
      for (current = 0; current < n; ++current) {
        const StrokeLeaves& l = leaves[current];
        const bool track = active[current] && !last;
        const Tensor z = track ? l.z : l.z.detach();
        const Tensor delta = track ? l.delta : l.delta.detach();
        const Tensor unit = track ? l.unit_heights : l.unit_heights.detach();
        const Tensor color = track ? l.color : l.color.detach();
        const Tensor heights = hb.min + (hb.max - hb.min) * unit;
        const Tensor traj = render::reorient(stroke_trajectory(vae, z, heights), delta, p);
        canvas = stamp(canvas, render::rasterize(traj, p, H, W), color);
      }
      current = n;
      objective = evaluate_loss(loss, canvas, prepared);
      if (config.latent_prior > 0.0 && !last) {
        for (std::size_t s = 0; s < n; ++s) {
          if (active[s]) objective = objective + config.latent_prior * g::relu(g::mean(g::square(leaves[s].z)) - config.latent_free);
        }
      }
    } catch (const g::GradError& e) {
      std::string where = "optimize: iteration " + std::to_string(it);
      if (current < n) where += ", stroke " + std::to_string(current);
      throw Error(where + ": " + e.what());
    }
    const double value = objective.item();
    if (!std::isfinite(value)) throw Error("optimize: non-finite loss at iteration " + std::to_string(it));
    result.history.push_back(value);
    if (it == 0) result.initial_loss = value;
    if (it == 0) {
      result.best_loss = value;
    } else if (value < result.best_loss) {
      result.best_loss = value;
      result.best_iteration = it;
      result.plan = snapshot();
    }
    if (config.on_iteration) config.on_iteration(it, value);
    if (last) break;

    g::backward(objective);
    const double progress = static_cast<double>(it) / static_cast<double>(config.iterations);
    if (progress > config.decay_start) {
      const double tail = (progress - config.decay_start) / (1.0 - config.decay_start);
      adam.set_lr(config.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * tail)));
    }
    adam.step();
    for (auto& l : leaves) {
      l.unit_heights.mutable_value() = l.unit_heights.value().cwiseMax(0.0).cwiseMin(1.0);
      if (l.color.requires_grad()) l.color.mutable_value() = l.color.value().cwiseMax(0.0).cwiseMin(1.0);
      auto& d = l.delta.mutable_value();
      if (config.keep_on_canvas) {
        d[0] = std::clamp(d[0], 0.0, 1.0);
        d[1] = std::clamp(d[1], 0.0, 1.0);
      }
      d[2] = render::wrap_angle(d[2]);
    }
  }
  tape.clear();
  return result;
}

}  // namespace splinestroke::planner
