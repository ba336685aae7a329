#pragma once

#include "splinestroke/grad/tensor.hpp"

namespace splinestroke::planner {

using grad::Tensor;

/// A stroke tinted by its color: layer [H,W,3] = darkness * color, and the
/// darkness itself as alpha [H,W].
struct ColoredLayer {
  Tensor layer;
  Tensor alpha;
};

ColoredLayer colorize(const Tensor& darkness, const Tensor& color);

/// Alpha blend: (1 - darkness) * canvas + darkness * color, per channel.
/// `canvas` is [H,W,3], `darkness` [H,W], `color` [3]. Differentiable with
/// respect to all three.
Tensor stamp(const Tensor& canvas, const Tensor& darkness, const Tensor& color);

/// Solid [H,W,3] image.
Tensor solid_canvas(std::size_t height, std::size_t width, const Eigen::Vector3d& rgb);

}  // namespace splinestroke::planner
