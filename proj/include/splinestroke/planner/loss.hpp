#pragma once

#include "splinestroke/grad/tensor.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace splinestroke::planner {

using grad::Tensor;

enum class LossKind { PixelL1, PixelL2, Feature };

/// (predicted [H,W,3], target [H,W,3]) -> differentiable scalar.
using FeatureLoss = std::function<Tensor(const Tensor& predicted, const Tensor& target)>;

struct LossSpec {
  LossKind kind = LossKind::PixelL2;
  /// Optional per-pixel weights, [H,W] or [H,W,3]; applied to the
  /// full-resolution pixel term.
  std::optional<Tensor> weight;
  FeatureLoss feature;
  /// Extra terms comparing Gaussian-blurred images at these widths (pixels).
  /// They share the minimum of the pixel term but give thin strokes a wider
  /// basin of attraction. Each is weighted by sigma^blur_weight_power;
  /// blurring a thin line shrinks its squared norm roughly by 1/sigma, so the
  /// a power of 1 keeps the terms comparable.
  std::vector<double> blur_sigmas;
  double blur_weight_power = 1.0;
};

/// Pixel-L2 plus blurred terms at 4, 16 and 64 pixels per 128 of canvas
/// width, weighted by sigma^1.5. Pure pixel-L2 gives a thin stroke no
/// gradient until it already overlaps its target.
LossSpec default_loss(std::size_t canvas_width = 128);

LossKind parse_loss_kind(const std::string& name);
std::string to_string(LossKind kind);

/// Separable Gaussian blur of an [H,W,C] image, normalized per output pixel
/// at the borders. Linear, so its backward pass is the transposed blur.
Tensor gaussian_blur(const Tensor& image, double sigma);

/// A target with its blurred copies computed once for repeated evaluation.
struct PreparedTarget {
  Tensor image;
  std::vector<Tensor> blurred;  ///< one per LossSpec::blur_sigmas entry
};

PreparedTarget prepare_target(const LossSpec& spec, const Tensor& target);

Tensor evaluate_loss(const LossSpec& spec, const Tensor& predicted, const Tensor& target);
Tensor evaluate_loss(const LossSpec& spec, const Tensor& predicted, const PreparedTarget& target);

/// mean((predicted - target)^2), no gradient tracking.
double pixel_l2(const Tensor& predicted, const Tensor& target);

}  // namespace splinestroke::planner
