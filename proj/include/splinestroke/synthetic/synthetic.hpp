#pragma once

#include "splinestroke/render/training.hpp"
#include "splinestroke/trajectory/io.hpp"

#include <random>

namespace splinestroke::synthetic {

using Rng = std::mt19937_64;
using trajectory::Trajectory;

/// Shape families, each returned standardized and resampled to n points.
/// Heights follow a smooth random profile in [0, max_height].
Trajectory arc(Rng& rng, std::size_t n = trajectory::kDefaultPointCount, double max_height = 0.02);
Trajectory zigzag(Rng& rng, std::size_t n = trajectory::kDefaultPointCount, double max_height = 0.02);
Trajectory circle(Rng& rng, std::size_t n = trajectory::kDefaultPointCount, double max_height = 0.02);

enum class Family { Arcs, Zigzags, Circles, Mixed };
std::vector<Trajectory> family(Family kind, std::size_t count, Rng& rng, std::size_t n = trajectory::kDefaultPointCount,
                               double max_height = 0.02);

/// A recorded session tracing `strokes` arcs/zigzags on a tilted canvas,
/// with the pen lifted between strokes. Sample spacing is uniform in time.
std::vector<trajectory::PoseRecord> pose_stream(std::size_t strokes, Rng& rng);

/// A placement keeping the reoriented stroke inside [margin, 1 - margin]^2
/// when possible.
render::PoseOffset placement(const Trajectory& traj, Rng& rng, double margin = 0.1);

/// Renderer-training triples generated with known parameters. Backgrounds
/// carry a few earlier strokes; before images are quantized to 8 bits, and
/// after = stamp(before, render, color) exactly.
std::vector<render::StrokeTriple> triples(std::size_t count, std::size_t height, std::size_t width,
                                          const render::RendererParams& params, Rng& rng);

}  // namespace splinestroke::synthetic
