#pragma once

#include "splinestroke/grad/tensor.hpp"
#include "splinestroke/trajectory/trajectory.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <limits>

namespace splinestroke::render {

using grad::Tensor;

/// Floor on stroke thickness; keeps the darkness ratio defined when
/// alpha * height + beta goes non-positive.
inline constexpr double kThicknessFloor = 1e-6;
/// Floor on the darkness base inside log() for the exponent gradient.
inline constexpr double kPowBaseFloor = 1e-6;
/// Segments shorter than this render as a disc around their first point.
inline constexpr double kDegenerateLength = 1e-9;

/// Slots of the packed [7] parameter tensor.
enum ParamSlot : std::size_t { kMx = 0, kMy, kBx, kBy, kAlpha, kBeta, kC, kParamCount };

/// The seven calibration scalars of the stroke renderer.
struct RendererParams {
  double m_x = 1.0;
  double m_y = 1.0;
  double b_x = 0.0;
  double b_y = 0.0;
  double alpha = 0.5;   ///< thickness per unit height
  double beta = 0.005;  ///< base thickness
  double c = 1.0;       ///< darkness dropoff exponent

  std::array<double, kParamCount> values() const { return {m_x, m_y, b_x, b_y, alpha, beta, c}; }
  static RendererParams from_values(const std::array<double, kParamCount>& v);

  Tensor to_tensor(bool requires_grad = false) const;
  static RendererParams from_tensor(const Tensor& t);

  nlohmann::json to_json() const;
  static RendererParams from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static RendererParams load(const std::filesystem::path& path);

  friend bool operator==(const RendererParams&, const RendererParams&) = default;
};

inline constexpr std::array<const char*, kParamCount> kParamNames = {"m_x", "m_y", "b_x", "b_y", "alpha", "beta", "c"};

/// Wraps an angle into (-pi, pi].
double wrap_angle(double radians);

/// Per-stroke placement on the canvas.
struct PoseOffset {
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;

  PoseOffset wrapped() const { return {dx, dy, wrap_angle(dtheta)}; }
  Tensor to_tensor(bool requires_grad = false) const;
  static PoseOffset from_tensor(const Tensor& t);
};

/// Constant [H,W,2] grid of pixel-center canvas coordinates. Channel 0 is x
/// (column, (j + 0.5) / W), channel 1 is y (row, (i + 0.5) / H).
Tensor coordinate_grid(std::size_t height, std::size_t width);

// Per-segment maps, written as graph expressions over grad-core ops. `u`,
// `v` are [2] endpoints; `grid` is a coordinate grid; scalars are [] or [1].

/// Distance to the closed segment: the perpendicular rejection wherever the
/// projection falls on the segment, otherwise the nearer endpoint.
Tensor distance_map(const Tensor& u, const Tensor& v, const Tensor& grid);
/// Height linearly interpolated along the segment by the clamped projection
/// parameter.
Tensor height_map(const Tensor& u, const Tensor& v, const Tensor& h_u, const Tensor& h_v, const Tensor& grid);
/// alpha * height + beta, floored at kThicknessFloor.
Tensor thickness_map(const Tensor& height, const Tensor& alpha, const Tensor& beta);
/// clamp01(1 - distance / thickness) ^ c
Tensor segment_darkness(const Tensor& distance, const Tensor& thickness, const Tensor& c);

/// Rotate (x, y) by dtheta about the origin, then scale by (m_x, m_y) and
/// translate by (b_x + dx, b_y + dy). `traj` is [n,3], `delta` is [3]
/// (dx, dy, dtheta), `params` is the packed [7] tensor. Returns [n,3].
Tensor reorient(const Tensor& traj, const Tensor& delta, const Tensor& params);

/// Darkness image [H,W] of a canvas-frame polyline: per-segment darkness,
/// composed by elementwise max (ties to the earlier segment). Fused kernel
/// with an analytic backward pass and a per-segment bounding-box cull.
/// Differentiable w.r.t. `canvas_traj` [n,3] and the alpha, beta, c slots of
/// `params`.
Tensor rasterize(const Tensor& canvas_traj, const Tensor& params, std::size_t height, std::size_t width);

/// Distances from the non-smooth loci of rasterize, minimised over pixels.
/// Each field is measured in the quantity that would flip: darkness for
/// winner switches between segments, the projection coefficient for the
/// height clamp, canvas units for the distance cone, the darkness base for
/// the support edge, thickness for the floor.
struct RasterMargins {
  double winner_gap = std::numeric_limits<double>::infinity();
  double projection = std::numeric_limits<double>::infinity();
  double distance = std::numeric_limits<double>::infinity();
  double edge = std::numeric_limits<double>::infinity();
  double thickness = std::numeric_limits<double>::infinity();
};
RasterMargins raster_margins(const Tensor& canvas_traj, const RendererParams& params, std::size_t height,
                             std::size_t width);

/// reorient followed by rasterize.
Tensor render_stroke(const Tensor& traj, const Tensor& delta, const Tensor& params, std::size_t height,
                     std::size_t width);

/// The same image built from the per-segment map expressions and pairwise
/// maximum. O(segments * pixels); used to cross-check the fused kernel.
Tensor render_stroke_reference(const Tensor& traj, const Tensor& delta, const Tensor& params, std::size_t height,
                               std::size_t width);

Tensor to_tensor(const trajectory::Trajectory& traj, bool requires_grad = false);
trajectory::Trajectory to_trajectory(const Tensor& t);

/// Convenience overload with plain values; no gradient tracking.
Tensor render_stroke(const trajectory::Trajectory& traj, const PoseOffset& delta, const RendererParams& params,
                     std::size_t height, std::size_t width);

}  // namespace splinestroke::render
