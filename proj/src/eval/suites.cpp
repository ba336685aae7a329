#include "splinestroke/eval/suites.hpp"

#include "splinestroke/grad/ops.hpp"
#include "splinestroke/planner/compose.hpp"
#include "splinestroke/render/training.hpp"
#include "splinestroke/synthetic/synthetic.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace splinestroke::eval {

namespace g = grad;
using grad::Tensor;

bool Report::passed() const { return failures() == 0 && !checks.empty(); }

std::size_t Report::failures() const {
  std::size_t n = 0;
  for (const auto& c : checks) n += c.passed ? 0 : 1;
  return n;
}

std::string Report::format() const {
  std::ostringstream os;
  for (const auto& c : checks) os << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
  return os.str();
}

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

void say(const Log& log, const std::string& line) {
  if (log) log(line);
}

double relative_error(double analytic, double numeric, double floor) {
  const double diff = std::abs(analytic - numeric);
  if (diff <= floor) return 0.0;
  return diff / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Random smooth 6-ish point stroke in canvas units, with its offset.
Tensor random_stroke(std::mt19937_64& rng, std::size_t points) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  g::Buffer v(static_cast<Eigen::Index>(points * 3));
  double heading = std::numbers::pi * u(rng), x = 0.0, y = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    v[3 * i] = x;
    v[3 * i + 1] = y;
    v[3 * i + 2] = 0.02 + 0.012 * u(rng);
    heading += 0.6 * u(rng);
    const double step = 0.07 + 0.03 * u(rng);
    x += step * std::cos(heading);
    y += step * std::sin(heading);
  }
  return Tensor({points, 3}, v, true);
}

}  // namespace

Report gradcheck(const GradcheckConfig& config, const Log& log) {
  const auto t0 = Clock::now();
  Report report{"gradcheck", {}, 0.0};
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::size_t h = config.height, w = config.width;
  const std::size_t max_attempts = 200 * config.configs;

  std::size_t accepted = 0, attempts = 0, compared = 0;
  double worst = 0.0;
  std::string worst_where = "none";
  while (accepted < config.configs && attempts < max_attempts) {
    ++attempts;
    Tensor traj = random_stroke(rng, config.points);
    Tensor delta = Tensor::vector(Eigen::Vector3d(0.3 + 0.15 * u(rng), 0.5 + 0.15 * u(rng), std::numbers::pi * u(rng)), true);
    render::RendererParams p;
    p.m_x = 1.0 + 0.05 * u(rng);
    p.m_y = 1.0 + 0.05 * u(rng);
    p.b_x = 0.01 * u(rng);
    p.b_y = 0.01 * u(rng);
    p.alpha = 0.4 + 0.1 * u(rng);
    p.beta = 0.012 + 0.004 * u(rng);
    p.c = 1.5 + 0.5 * u(rng);
    Tensor params = p.to_tensor(true);

    // Keep every pixel clear of the places where darkness or the winning
    // segment switches, so a step of `config.step` cannot cross one.
    {
      g::NoGradGuard ng;
      const auto m = render::raster_margins(render::reorient(traj, delta, params), p, h, w);
      if (m.winner_gap < 5e-3 || m.projection < 2e-3 || m.distance < config.distance_margin || m.edge < config.edge_margin) continue;
    }
    ++accepted;

    // A fixed random projection of the image; a plain sum is nearly
    // translation-invariant, which hides errors in the position gradients.
    g::Buffer weights(static_cast<Eigen::Index>(h * w));
    std::normal_distribution<double> normal;
    for (auto& v : weights) v = normal(rng);
    const Tensor projection({h, w}, weights);
    g::Tape::current().clear();
    g::backward(g::sum(render::render_stroke(traj, delta, params, h, w) * projection));
    auto f = [&] {
      g::NoGradGuard ng;
      return g::sum(render::render_stroke(traj, delta, params, h, w) * projection).item();
    };
    const std::pair<const char*, Tensor*> groups[] = {{"trajectory", &traj}, {"offset", &delta}, {"params", &params}};
    for (const auto& [name, t] : groups) {
      const g::Buffer analytic = t->grad();
      for (Eigen::Index i = 0; i < analytic.size(); ++i) {
        const double saved = t->value()[i];
        t->mutable_value()[i] = saved + config.step;
        const double fp = f();
        t->mutable_value()[i] = saved - config.step;
        const double fm = f();
        t->mutable_value()[i] = saved;
        const double err = relative_error(analytic[i], (fp - fm) / (2.0 * config.step), config.floor);
        ++compared;
        if (err > worst) {
          worst = err;
          worst_where = "config " + std::to_string(accepted - 1) + " " + name + "[" + std::to_string(i) + "]";
        }
      }
    }
    say(log, "config " + std::to_string(accepted - 1) + " checked, worst so far " + fmt(worst));
  }
  g::Tape::current().clear();

  report.checks.push_back({"configurations", accepted == config.configs,
                           std::to_string(accepted) + " of " + std::to_string(config.configs) + " accepted after " +
                               std::to_string(attempts) + " draws"});
  report.checks.push_back({"gradients", compared > 0 && worst <= config.tolerance,
                           std::to_string(compared) + " partials, max relative error " + fmt(worst) + " at " +
                               worst_where + " (tolerance " + fmt(config.tolerance) + ")"});
  report.seconds = since(t0);
  return report;
}

Report recovery(const RecoveryConfig& config, const Log& log) {
  const auto t0 = Clock::now();
  Report report{"recovery", {}, 0.0};
  synthetic::Rng rng(config.seed);
  const auto data = synthetic::triples(config.triples, config.height, config.width, config.truth, rng);
  say(log, "generated " + std::to_string(data.size()) + " triples");

  const auto truth = config.truth.values();
  for (double sign : {1.0, -1.0}) {
    std::array<double, render::kParamCount> init = truth;
    for (std::size_t k = 0; k < render::kParamCount; ++k) {
      const double s = (k % 2 == 0 ? sign : -sign);
      if (k == render::kBx || k == render::kBy) {
        init[k] = truth[k] + s * config.offset_perturbation;
      } else {
        init[k] = truth[k] * (1.0 + s * config.perturbation);
      }
    }
    render::RendererTrainConfig tc;
    tc.epochs = config.epochs;
    tc.init = render::RendererParams::from_values(init);
    tc.on_epoch = [&](std::size_t epoch, double loss) {
      if (epoch % 250 == 0) say(log, "epoch " + std::to_string(epoch) + " loss " + fmt(loss, 6));
    };
    const auto result = render::train_renderer(data, tc);
    const auto got = result.params.values();
    const std::string tag = sign > 0 ? "init(+-)" : "init(-+)";
    for (std::size_t k = 0; k < render::kParamCount; ++k) {
      const bool offset = k == render::kBx || k == render::kBy;
      const bool scale = k == render::kMx || k == render::kMy;
      const double err = offset ? std::abs(got[k] - truth[k]) : std::abs(got[k] - truth[k]) / std::abs(truth[k]);
      const double tol = offset ? config.offset_tolerance : scale ? config.scale_tolerance : config.shape_tolerance;
      report.checks.push_back({tag + " " + render::kParamNames[k], err <= tol,
                               "init " + fmt(init[k], 5) + " fitted " + fmt(got[k], 6) + " truth " + fmt(truth[k]) +
                                   (offset ? " abs err " : " rel err ") + fmt(err) + " (tolerance " + fmt(tol) + ")"});
    }
  }
  report.seconds = since(t0);
  return report;
}

namespace {

/// Support of a darkness map grown by `grow` pixels.
Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> support(const Tensor& dark, std::size_t h, std::size_t w, int grow) {
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> out = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(
      static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(w), false);
  const int H = static_cast<int>(h), W = static_cast<int>(w);
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) {
      if (dark.value()[i * W + j] <= 0.0) continue;
      for (int di = -grow; di <= grow; ++di) {
        for (int dj = -grow; dj <= grow; ++dj) {
          const int a = i + di, b = j + dj;
          if (a >= 0 && b >= 0 && a < H && b < W) out(a, b) = true;
        }
      }
    }
  }
  return out;
}

}  // namespace

Report selfrecon(const vae::TrajVae& model, const std::vector<trajectory::Trajectory>& shapes,
                 const SelfReconConfig& config, const Log& log) {
  if (shapes.empty()) throw Error("selfrecon: no shapes to draw targets from");
  const auto t0 = Clock::now();
  Report report{"selfrecon", {}, 0.0};
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = config.canvas;
  const planner::Canvas canvas{n, n, Eigen::Vector3d::Ones()};
  const Tensor p = config.params.to_tensor();

  planner::PaintingPlan truth;
  truth.canvas = canvas;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> taken =
      Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(static_cast<Eigen::Index>(n),
                                                                 static_cast<Eigen::Index>(n), false);
  for (std::size_t s = 0; s < config.strokes; ++s) {
    const auto& shape = shapes[static_cast<std::size_t>(unit(rng) * static_cast<double>(shapes.size())) % shapes.size()];
    planner::StrokeAction a;
    {
      g::NoGradGuard ng;
      const Tensor mu = model.encode(shape).mu;
      a.z = Eigen::Map<const Eigen::VectorXd>(mu.value().data(), mu.value().size());
    }
    a.heights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(model.n()), 0.01 + 0.01 * unit(rng));
    a.color = 0.8 * Eigen::Vector3d(unit(rng), unit(rng), unit(rng));
    bool placed = false;
    for (int attempt = 0; attempt < 500 && !placed; ++attempt) {
      a.delta = synthetic::placement(shape, rng, 0.1);
      const Tensor dark = render::rasterize(render::to_tensor(planner::canvas_trajectory(a, model, config.params)), p, n, n);
      const auto mine = support(dark, n, n, 2);
      if ((mine && taken).any()) continue;
      taken = taken || mine;
      placed = true;
    }
    if (!placed) throw Error("selfrecon: could not place " + std::to_string(config.strokes) + " disjoint strokes");
    truth.actions.push_back(std::move(a));
  }
  const Tensor target = planner::render_plan(truth, model, config.params);

  const auto init = planner::init_plan(config.strokes, canvas, model.n(), rng);
  planner::OptimizeConfig oc = config.optimize;
  oc.iterations = config.iterations;
  oc.n_colors = config.strokes;
  oc.seed = config.seed;
  auto user_cb = oc.on_iteration;
  oc.on_iteration = [&](std::size_t it, double loss) {
    if (user_cb) user_cb(it, loss);
    if (it % 100 == 0) say(log, "iteration " + std::to_string(it) + " objective " + fmt(loss, 6));
  };
  const auto result = planner::optimize(init, target, config.loss, model, config.params, oc);
  const double before = planner::pixel_l2(planner::render_plan(init, model, config.params), target);
  const double after = planner::pixel_l2(planner::render_plan(result.plan, model, config.params), target);
  const double blank = planner::pixel_l2(planner::solid_canvas(n, n, canvas.background), target);
  const double ratio = after / before;

  report.checks.push_back({std::to_string(config.strokes) + "-stroke pixel-L2 ratio", ratio < config.max_ratio,
                           "initial " + fmt(before, 4) + " final " + fmt(after, 4) + " ratio " + fmt(ratio) +
                               " (limit " + fmt(config.max_ratio) + "; blank canvas would give " + fmt(blank / before) +
                               ") after " + std::to_string(config.iterations) + " iterations"});
  report.seconds = since(t0);
  return report;
}

}  // namespace splinestroke::eval
