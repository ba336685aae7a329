#pragma once

#include "splinestroke/planner/planner.hpp"
#include "splinestroke/render/traj2stroke.hpp"
#include "splinestroke/vae/trajvae.hpp"

#include <functional>
#include <string>
#include <vector>

namespace splinestroke::eval {

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Report {
  std::string suite;
  std::vector<Check> checks;
  double seconds = 0.0;

  bool passed() const;
  std::size_t failures() const;
  /// "PASS name: detail" / "FAIL name: detail", one per line.
  std::string format() const;
};

using Log = std::function<void(const std::string&)>;

/// Analytic vs central-difference gradients of a random projection of
/// render_stroke(...) with respect to trajectory, offset and renderer
/// parameters, over random configurations that keep clear of darkness
/// discontinuities.
struct GradcheckConfig {
  std::size_t configs = 20;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t points = 6;
  double step = 1e-5;
  double tolerance = 1e-3;
  double floor = 1e-6;
  /// Smallest admissible darkness base 1 - d/t at any lit pixel, and |1 - d/t|
  /// at unlit ones. Below this, base^c curves too sharply for the step.
  double edge_margin = 1e-2;
  /// Smallest admissible distance from a lit pixel centre to its segment, in
  /// canvas units; the distance cone's apex sits at zero.
  double distance_margin = 1e-4;
  std::uint64_t seed = 0;
};
Report gradcheck(const GradcheckConfig& config, const Log& log = {});

/// Renderer parameter recovery from synthetic triples drawn with known
/// parameters, starting from inits perturbed by +-`perturbation`. Both sign
/// patterns are run.
struct RecoveryConfig {
  std::size_t triples = 64;
  std::size_t height = 128;
  std::size_t width = 128;
  std::size_t epochs = 2000;
  double perturbation = 0.2;
  /// Absolute init offset for b_x, b_y, whose true value is 0.
  double offset_perturbation = 0.004;
  render::RendererParams truth{1.0, 1.0, 0.0, 0.0, 0.3, 0.01, 1.5};
  double shape_tolerance = 0.05;  ///< relative, alpha beta c
  double scale_tolerance = 0.01;  ///< relative, m_x m_y
  double offset_tolerance = 0.005;  ///< absolute, b_x b_y
  std::uint64_t seed = 0;
};
Report recovery(const RecoveryConfig& config, const Log& log = {});

/// Plans against renders of known strokes from a random init and compares
/// final to initial pixel-L2.
struct SelfReconConfig {
  std::size_t strokes = 1;
  std::size_t iterations = 500;
  std::size_t canvas = 128;
  double max_ratio = 0.1;
  render::RendererParams params{1.0, 1.0, 0.0, 0.0, 0.3, 0.01, 1.5};
  planner::LossSpec loss = planner::default_loss();
  planner::OptimizeConfig optimize;
  std::uint64_t seed = 0;
};
/// Known strokes are encodings of `shapes`, placed so their renders do not
/// touch.
Report selfrecon(const vae::TrajVae& model, const std::vector<trajectory::Trajectory>& shapes,
                 const SelfReconConfig& config, const Log& log = {});

}  // namespace splinestroke::eval
