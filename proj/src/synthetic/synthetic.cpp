#include "splinestroke/synthetic/synthetic.hpp"

#include "splinestroke/io/image.hpp"
#include "splinestroke/planner/compose.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

namespace splinestroke::synthetic {

using Index = Eigen::Index;
using trajectory::Points;

namespace {

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

/// h(t) for t in [0,1]: linear ramp plus one bump, clamped into range.
struct HeightProfile {
  double h0, h1, bump, centre;
  HeightProfile(Rng& rng, double max_height)
      : h0(uniform(rng, 0.1, 0.9) * max_height),
        h1(uniform(rng, 0.1, 0.9) * max_height),
        bump(uniform(rng, -0.3, 0.3) * max_height),
        centre(uniform(rng, 0.3, 0.7)) {}
  double operator()(double t, double max_height) const {
    const double v = h0 + (h1 - h0) * t + bump * std::exp(-std::pow((t - centre) / 0.2, 2));
    return std::clamp(v, 0.0, max_height);
  }
};

Trajectory finish(Points raw, std::size_t n, const HeightProfile& profile, double max_height) {
  const Index m = raw.rows();
  for (Index i = 0; i < m; ++i) raw(i, 2) = profile(static_cast<double>(i) / static_cast<double>(m - 1), max_height);
  return trajectory::resample(trajectory::standardize(Trajectory{raw}).trajectory, n);
}

}  // namespace

Trajectory arc(Rng& rng, std::size_t n, double max_height) {
  const double length = uniform(rng, 0.08, 0.3);
  const double turn = uniform(rng, -2.2, 2.2);
  const HeightProfile profile(rng, max_height);
  constexpr Index m = 64;
  Points p(m, 3);
  for (Index i = 0; i < m; ++i) {
    const double t = static_cast<double>(i) / (m - 1);
    if (std::abs(turn) < 1e-3) {
      p.row(i) << length * t, 0.0, 0.0;
    } else {
      const double r = length / turn;
      p.row(i) << r * std::sin(turn * t), r * (1.0 - std::cos(turn * t)), 0.0;
    }
  }
  return finish(p, n, profile, max_height);
}

Trajectory zigzag(Rng& rng, std::size_t n, double max_height) {
  const double length = uniform(rng, 0.1, 0.3);
  const int teeth = std::uniform_int_distribution<int>(2, 4)(rng);
  const double amplitude = uniform(rng, 0.12, 0.3) * length / teeth;
  const HeightProfile profile(rng, max_height);
  const Index m = 2 * teeth + 1;
  Points p(m, 3);
  for (Index i = 0; i < m; ++i) {
    const double y = (i == 0 || i == m - 1) ? 0.0 : (i % 2 ? amplitude : -amplitude);
    p.row(i) << length * static_cast<double>(i) / static_cast<double>(m - 1), y, 0.0;
  }
  return finish(p, n, profile, max_height);
}

Trajectory circle(Rng& rng, std::size_t n, double max_height) {
  const double radius = uniform(rng, 0.04, 0.1);
  const double sweep = uniform(rng, 1.65, 1.9) * std::numbers::pi;
  const double direction = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
  const HeightProfile profile(rng, max_height);
  constexpr Index m = 96;
  Points p(m, 3);
  for (Index i = 0; i < m; ++i) {
    const double a = direction * sweep * static_cast<double>(i) / (m - 1);
    p.row(i) << radius * std::sin(a), direction * radius * (1.0 - std::cos(a)), 0.0;
  }
  return finish(p, n, profile, max_height);
}

std::vector<Trajectory> family(Family kind, std::size_t count, Rng& rng, std::size_t n, double max_height) {
  std::vector<Trajectory> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    switch (kind) {
      case Family::Arcs: out.push_back(arc(rng, n, max_height)); break;
      case Family::Zigzags: out.push_back(zigzag(rng, n, max_height)); break;
      case Family::Circles: out.push_back(circle(rng, n, max_height)); break;
      case Family::Mixed:
        out.push_back(i % 2 ? zigzag(rng, n, max_height) : arc(rng, n, max_height));
        break;
    }
  }
  return out;
}

std::vector<trajectory::PoseRecord> pose_stream(std::size_t strokes, Rng& rng) {
  // Canvas 0.5 m wide, tilted and shifted in the world.
  const Eigen::Quaterniond tilt =
      Eigen::AngleAxisd(uniform(rng, -0.3, 0.3), Eigen::Vector3d::UnitZ()) *
      Eigen::AngleAxisd(uniform(rng, -0.2, 0.2), Eigen::Vector3d::UnitX());
  const Eigen::Vector3d origin(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5), uniform(rng, 0.5, 1.0));
  const double width = 0.5;
  const std::array<Eigen::Vector3d, 3> markers = {origin, origin + tilt * Eigen::Vector3d(width, 0, 0),
                                                  origin + tilt * Eigen::Vector3d(0, 0.4, 0)};
  const double pen_length = 0.15;
  const Eigen::Vector3d tip_axis = -Eigen::Vector3d::UnitZ();

  std::vector<trajectory::PoseRecord> out;
  double t = 0.0;
  auto emit = [&](const Eigen::Vector3d& canvas_point) {
    // canvas_point in normalized units; the pen leans a little.
    const Eigen::Quaterniond pen =
        tilt * Eigen::Quaterniond(Eigen::AngleAxisd(uniform(rng, -0.2, 0.2), Eigen::Vector3d::UnitY()));
    const Eigen::Vector3d tip = origin + tilt * (canvas_point * width);
    trajectory::PoseRecord r;
    r.pen.t = t;
    r.pen.orientation = pen.normalized();
    r.pen.position = tip - r.pen.orientation * (pen_length * tip_axis);
    r.canvas_markers = markers;
    out.push_back(r);
    t += 0.01;
  };
  for (std::size_t s = 0; s < strokes; ++s) {
    const Trajectory shape = s % 2 ? zigzag(rng, 40, 0.003) : arc(rng, 40, 0.003);
    const render::PoseOffset place = placement(shape, rng, 0.15);
    const double c = std::cos(place.dtheta), sn = std::sin(place.dtheta);
    auto at = [&](Index i, double lift) {
      const double x = shape.points(i, 0), y = shape.points(i, 1);
      return Eigen::Vector3d(c * x - sn * y + place.dx, sn * x + c * y + place.dy, shape.points(i, 2) + lift);
    };
    for (int k = 0; k < 5; ++k) emit(at(0, 0.05 - 0.009 * k));
    for (Index i = 0; i < shape.points.rows(); ++i) emit(at(i, 0.0));
    for (int k = 1; k <= 5; ++k) emit(at(shape.points.rows() - 1, 0.009 * k));
  }
  return out;
}

render::PoseOffset placement(const Trajectory& traj, Rng& rng, double margin) {
  render::PoseOffset best;
  for (int attempt = 0; attempt < 100; ++attempt) {
    const double theta = uniform(rng, -std::numbers::pi, std::numbers::pi);
    const double c = std::cos(theta), s = std::sin(theta);
    Eigen::Vector2d lo(1e9, 1e9), hi(-1e9, -1e9);
    for (Index i = 0; i < traj.points.rows(); ++i) {
      const Eigen::Vector2d q(c * traj.points(i, 0) - s * traj.points(i, 1), s * traj.points(i, 0) + c * traj.points(i, 1));
      lo = lo.cwiseMin(q);
      hi = hi.cwiseMax(q);
    }
    const Eigen::Vector2d span_lo = Eigen::Vector2d::Constant(margin) - lo;
    const Eigen::Vector2d span_hi = Eigen::Vector2d::Constant(1.0 - margin) - hi;
    best = {0.5 - 0.5 * (lo.x() + hi.x()), 0.5 - 0.5 * (lo.y() + hi.y()), theta};
    if (span_lo.x() <= span_hi.x() && span_lo.y() <= span_hi.y()) {
      return {uniform(rng, span_lo.x(), span_hi.x()), uniform(rng, span_lo.y(), span_hi.y()), theta};
    }
  }
  return best;
}

std::vector<render::StrokeTriple> triples(std::size_t count, std::size_t height, std::size_t width,
                                          const render::RendererParams& params, Rng& rng) {
  std::vector<render::StrokeTriple> out;
  out.reserve(count);
  auto random_color = [&] { return Eigen::Vector3d(uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1)); };
  for (std::size_t i = 0; i < count; ++i) {
    Eigen::Vector3d paper(uniform(rng, 0.75, 1.0), uniform(rng, 0.75, 1.0), uniform(rng, 0.75, 1.0));
    grad::Tensor canvas = planner::solid_canvas(height, width, paper);
    const int earlier = std::uniform_int_distribution<int>(0, 2)(rng);
    for (int k = 0; k < earlier; ++k) {
      const Trajectory t = arc(rng, trajectory::kDefaultPointCount, 0.04);
      canvas = planner::stamp(canvas, render::render_stroke(t, placement(t, rng), params, height, width),
                              grad::Tensor::vector(random_color()));
    }
    render::StrokeTriple triple;
    triple.trajectory = i % 2 ? zigzag(rng, trajectory::kDefaultPointCount, 0.04) : arc(rng, trajectory::kDefaultPointCount, 0.04);
    triple.delta = placement(triple.trajectory, rng);
    Eigen::Vector3d color = random_color();
    if ((color - paper).norm() < 0.5) color *= 0.3;
    triple.color = color;
    triple.before = io::quantize8(canvas);
    grad::NoGradGuard ng;
    triple.after = planner::stamp(
        triple.before, render::render_stroke(triple.trajectory, triple.delta, params, height, width),
        grad::Tensor::vector(color));
    out.push_back(std::move(triple));
  }
  return out;
}

}  // namespace splinestroke::synthetic
