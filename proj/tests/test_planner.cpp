#include "splinestroke/grad/ops.hpp"
#include "splinestroke/planner/compose.hpp"
#include "splinestroke/planner/planner.hpp"
#include "splinestroke/synthetic/synthetic.hpp"

#include "support/fd.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

using namespace splinestroke;
using grad::Tensor;
using testsupport::central_difference;
using testsupport::max_relative_error;

namespace {

const render::RendererParams kParams{1.0, 1.0, 0.0, 0.0, 0.3, 0.01, 1.5};

const vae::TrajVae& small_vae() {
  static const vae::TrajVae model = [] {
    synthetic::Rng rng(21);
    const auto data = synthetic::family(synthetic::Family::Mixed, 24, rng, 12);
    vae::VaeTrainConfig cfg;
    cfg.epochs = 200;
    cfg.hidden_sizes = {48, 24};
    cfg.batch_size = 8;
    return vae::train_vae(data, cfg);
  }();
  return model;
}

planner::StrokeAction action(double dx, double dy, double theta, Eigen::Vector3d color, double height = 0.015) {
  planner::StrokeAction a;
  a.z = Eigen::VectorXd::Zero(vae::kLatentDim);
  a.z[0] = 0.3;
  a.delta = {dx, dy, theta};
  a.heights = Eigen::VectorXd::Constant(12, height);
  a.color = color;
  return a;
}

planner::PaintingPlan two_stroke_plan(std::size_t size) {
  planner::PaintingPlan plan;
  plan.canvas = {size, size, Eigen::Vector3d::Ones()};
  plan.actions = {action(0.1, 0.2, 0.0, {0.9, 0.1, 0.1}), action(0.55, 0.7, 0.4, {0.1, 0.2, 0.8})};
  return plan;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "splinestroke_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

double max_diff(const Tensor& a, const Tensor& b) { return (a.value() - b.value()).abs().maxCoeff(); }

}  // namespace

TEST_CASE("kmeans examples") {
  std::mt19937_64 rng(1);
  std::vector<Eigen::Vector3d> pts;
  for (int i = 0; i < 5; ++i) pts.emplace_back(0, 0, 0);
  for (int i = 0; i < 5; ++i) pts.emplace_back(1, 1, 1);
  auto r = planner::kmeans(pts, 2, rng);
  REQUIRE(r.centroids.size() == 2);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(r.centroids[r.assignment[i]] == pts[i]);

  const std::vector<Eigen::Vector3d> reds = {{0.1, 0, 0}, {0.12, 0, 0}, {0.9, 0, 0}, {0.88, 0, 0}};
  r = planner::kmeans(reds, 2, rng);
  std::set<double> xs;
  for (const auto& c : r.centroids) xs.insert(std::round(c.x() * 1e9) / 1e9);
  CHECK(xs == std::set<double>{0.11, 0.89});

  r = planner::kmeans(reds, 1, rng);
  CHECK(r.centroids[0].x() == doctest::Approx(0.5));

  r = planner::kmeans(reds, 7, rng);
  CHECK(r.centroids.size() == 4);
  for (std::size_t i = 0; i < reds.size(); ++i) CHECK(r.centroids[r.assignment[i]] == reds[i]);

  CHECK_THROWS_AS(planner::kmeans(reds, 0, rng), Error);
}

TEST_CASE("discretize colors") {
  planner::PaintingPlan plan;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 12; ++i) plan.actions.push_back(action(0.5, 0.5, 0.0, {u(rng), u(rng), u(rng)}));
  for (std::size_t k : {1u, 3u, 5u}) {
    const auto out = planner::discretize_colors(plan, k, rng);
    std::set<std::tuple<double, double, double>> distinct;
    for (const auto& a : out.actions) distinct.insert({a.color.x(), a.color.y(), a.color.z()});
    CHECK(distinct.size() <= k);
    CHECK(out.palette.size() == distinct.size());
  }
  const auto one = planner::discretize_colors(plan, 1, rng);
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& a : plan.actions) mean += a.color / 12.0;
  CHECK((one.actions[0].color - mean).norm() < 1e-12);

  const auto report = planner::palette_report({{1, 0, 0}, {0, 0.5, 1}});
  CHECK(report.find("#ff0000") != std::string::npos);
  CHECK(report.find("#0080ff") != std::string::npos);
}

TEST_CASE("init plan") {
  std::mt19937_64 a(5), b(5);
  const auto p = planner::init_plan(40, {}, 12, a);
  const auto q = planner::init_plan(40, {}, 12, b);
  REQUIRE(p.actions.size() == 40);
  for (std::size_t i = 0; i < 40; ++i) {
    const auto& s = p.actions[i];
    CHECK(s.z == q.actions[i].z);
    CHECK(s.z.size() == 64);
    CHECK(s.delta.dx >= 0.0);
    CHECK(s.delta.dx <= 1.0);
    CHECK(s.delta.dy >= 0.0);
    CHECK(s.delta.dy <= 1.0);
    CHECK(s.delta.dtheta > -std::numbers::pi);
    CHECK(s.delta.dtheta <= std::numbers::pi);
    CHECK(s.heights.size() == 12);
    CHECK(s.heights[0] == doctest::Approx(0.01));
    CHECK(s.color.minCoeff() >= 0.0);
    CHECK(s.color.maxCoeff() <= 1.0);
  }
  CHECK_THROWS_AS(planner::init_plan(0, {}, 12, a), Error);
}

TEST_CASE("render plan properties") {
  const auto& model = small_vae();
  planner::PaintingPlan empty;
  empty.canvas = {16, 20, Eigen::Vector3d(0.2, 0.3, 0.4)};
  const Tensor bg = planner::render_plan(empty, model, kParams);
  CHECK(bg.shape() == grad::Shape{16, 20, 3});
  CHECK(max_diff(bg, planner::solid_canvas(16, 20, empty.canvas.background)) == 0.0);

  // Disjoint strokes commute.
  auto plan = two_stroke_plan(64);
  const auto first = planner::render_plan({{plan.actions[0]}, plan.canvas}, model, kParams);
  const auto second = planner::render_plan({{plan.actions[1]}, plan.canvas}, model, kParams);
  const auto white = planner::solid_canvas(64, 64, Eigen::Vector3d::Ones());
  const grad::Buffer ink1 = (first.value() - white.value()).abs(), ink2 = (second.value() - white.value()).abs();
  REQUIRE(ink1.maxCoeff() > 0.1);
  REQUIRE(ink2.maxCoeff() > 0.1);
  REQUIRE((ink1 * ink2).maxCoeff() == 0.0);
  const auto forward = planner::render_plan(plan, model, kParams);
  std::swap(plan.actions[0], plan.actions[1]);
  CHECK(max_diff(forward, planner::render_plan(plan, model, kParams)) < 1e-9);

  // Stamping the same stroke twice leaves its opaque core unchanged. A tiny
  // dropoff exponent makes every covered pixel fully opaque.
  render::RendererParams hard = kParams;
  hard.c = 1e-20;
  planner::PaintingPlan once{{plan.actions[0]}, plan.canvas};
  planner::PaintingPlan twice{{plan.actions[0], plan.actions[0]}, plan.canvas};
  const auto dark = render::rasterize(render::to_tensor(planner::canvas_trajectory(plan.actions[0], model, hard)),
                                      hard.to_tensor(), 64, 64);
  const auto img1 = planner::render_plan(once, model, hard), img2 = planner::render_plan(twice, model, hard);
  std::size_t core = 0;
  for (Eigen::Index p = 0; p < dark.value().size(); ++p) {
    if (dark.value()[p] < 1.0) continue;
    ++core;
    for (int c = 0; c < 3; ++c) CHECK(img1.value()[3 * p + c] == img2.value()[3 * p + c]);
  }
  CHECK(core > 0);
}

TEST_CASE("export round trip") {
  const auto& model = small_vae();
  auto plan = two_stroke_plan(48);
  plan.vae_ref = "vae.json";
  plan.renderer_ref = "renderer.json";
  plan.palette = {{0.9, 0.1, 0.1}, {0.1, 0.2, 0.8}};
  const auto exported = planner::export_plan(plan, model, kParams);
  const auto path = scratch("plan.json");
  planner::write_plan(path, exported);
  const auto back = planner::read_plan(path);
  CHECK(back.plan.vae_ref == "vae.json");
  CHECK(back.plan.renderer_ref == "renderer.json");
  CHECK(back.plan.palette.size() == 2);
  REQUIRE(back.plan.actions.size() == 2);
  CHECK(back.plan.actions[1].z == plan.actions[1].z);
  CHECK(back.plan.actions[1].delta.dtheta == plan.actions[1].delta.dtheta);
  CHECK(max_diff(planner::render_exported(back, kParams), planner::render_plan(plan, model, kParams)) == 0.0);
  CHECK(max_diff(planner::render_plan(back.plan, model, kParams), planner::render_plan(plan, model, kParams)) == 0.0);

  std::ofstream(scratch("bad_plan.json")) << R"({"version": "splineplan/0"})";
  CHECK_THROWS_WITH_AS(planner::read_plan(scratch("bad_plan.json")), doctest::Contains("version"), Error);
}

TEST_CASE("plan gradients match finite differences") {
  const auto& model = small_vae();
  const std::size_t size = 40;
  synthetic::Rng rng(31);
  const Tensor target = planner::render_plan(two_stroke_plan(size), model, kParams);
  const Tensor params = kParams.to_tensor();
  std::normal_distribution<double> normal;
  std::size_t checked = 0;
  for (int attempt = 0; attempt < 40 && checked < 3; ++attempt) {
    auto a = action(0.2 + 0.3 * std::abs(normal(rng)), 0.3, normal(rng), {0.3, 0.6, 0.2});
    for (auto& v : a.z) v = 0.5 * normal(rng);
    for (auto& h : a.heights) h = 0.01 + 0.002 * normal(rng);
    const auto margins =
        render::raster_margins(render::to_tensor(planner::canvas_trajectory(a, model, kParams)), kParams, size, size);
    if (margins.winner_gap < 5e-3 || margins.projection < 2e-3 || margins.distance < 1e-4 || margins.edge < 1e-3) {
      continue;
    }
    Tensor z = Tensor::vector(a.z, true), delta = a.delta.to_tensor(true), heights = Tensor::vector(a.heights, true),
           color = Tensor::vector(a.color, true);
    auto loss = [&] {
      const Tensor traj = render::reorient(planner::stroke_trajectory(model, z, heights), delta, params);
      const Tensor img = planner::stamp(planner::solid_canvas(size, size, Eigen::Vector3d::Ones()),
                                        render::rasterize(traj, params, size, size), color);
      return planner::evaluate_loss({}, img, target);
    };
    auto f = [&] {
      grad::NoGradGuard ng;
      return loss().item();
    };
    grad::Tape::current().clear();
    grad::backward(loss());
    CHECK(max_relative_error(z.grad(), central_difference(f, z, 1e-7)) < 1e-3);
    CHECK(max_relative_error(delta.grad(), central_difference(f, delta, 1e-7)) < 1e-3);
    CHECK(max_relative_error(heights.grad(), central_difference(f, heights, 1e-7)) < 1e-3);
    CHECK(max_relative_error(color.grad(), central_difference(f, color, 1e-7)) < 1e-3);
    ++checked;
  }
  CHECK(checked == 3);
}

TEST_CASE("optimize contract") {
  const auto& model = small_vae();
  const auto truth = two_stroke_plan(32);
  const Tensor target = planner::render_plan(truth, model, kParams);
  std::mt19937_64 rng(3);
  const auto init = planner::init_plan(3, truth.canvas, 12, rng);

  planner::OptimizeConfig cfg;
  cfg.iterations = 0;
  auto r = planner::optimize(init, target, {}, model, kParams, cfg);
  CHECK(r.history.size() == 1);
  for (std::size_t s = 0; s < 3; ++s) {
    CHECK(r.plan.actions[s].z == init.actions[s].z);
    CHECK(r.plan.actions[s].color == init.actions[s].color);
  }

  cfg.iterations = 30;
  cfg.n_colors = 2;
  r = planner::optimize(init, target, {}, model, kParams, cfg);
  CHECK(r.history.size() == 31);
  CHECK(r.best_loss <= r.history[1]);
  CHECK(r.best_loss <= r.initial_loss);
  CHECK(r.best_iteration >= 27);  // only discretized plans are eligible after the pass
  CHECK(r.plan.palette.size() <= 2);
  std::set<std::tuple<double, double, double>> colors;
  for (const auto& a : r.plan.actions) {
    colors.insert({a.color.x(), a.color.y(), a.color.z()});
    CHECK(a.heights.minCoeff() >= cfg.heights.min);
    CHECK(a.heights.maxCoeff() <= cfg.heights.max);
    CHECK(a.color.minCoeff() >= 0.0);
    CHECK(a.color.maxCoeff() <= 1.0);
    CHECK(a.delta.dtheta > -std::numbers::pi);
    CHECK(a.delta.dtheta <= std::numbers::pi);
  }
  CHECK(colors.size() <= 2);

  const auto again = planner::optimize(init, target, {}, model, kParams, cfg);
  CHECK(again.history == r.history);

  CHECK_THROWS_AS(planner::optimize(init, Tensor::zeros({16, 16, 3}), {}, model, kParams, cfg), Error);
  Tensor bad = target.clone();
  bad.mutable_value()[5] = std::nan("");
  CHECK_THROWS_WITH_AS(planner::optimize(init, bad, {}, model, kParams, cfg), doctest::Contains("non-finite"), Error);
}

TEST_CASE("batching") {
  const auto& model = small_vae();
  const auto truth = two_stroke_plan(32);
  const Tensor target = planner::render_plan(truth, model, kParams);
  std::mt19937_64 rng(4);
  const auto init = planner::init_plan(4, truth.canvas, 12, rng);
  planner::OptimizeConfig cfg;
  cfg.iterations = 20;
  cfg.n_colors = 0;
  cfg.batch_size = 0;
  const auto full = planner::optimize(init, target, {}, model, kParams, cfg);
  cfg.batch_size = 4;
  const auto same = planner::optimize(init, target, {}, model, kParams, cfg);
  cfg.batch_size = 80;
  const auto larger = planner::optimize(init, target, {}, model, kParams, cfg);
  CHECK(same.history == full.history);
  CHECK(larger.history == full.history);

  // With one active stroke per iteration, the others keep their values until
  // their turn comes round. Every color is wrong; only stroke 0 may move.
  auto recolored = init;
  for (auto& a : recolored.actions) a.color = Eigen::Vector3d::Ones() - a.color;
  cfg.batch_size = 1;
  cfg.iterations = 1;
  cfg.position_lr = 0.0;
  cfg.latent_lr = 0.0;
  const auto one =
      planner::optimize(init, planner::render_plan(recolored, model, kParams), {}, model, kParams, cfg);
  REQUIRE(one.best_iteration == 1);
  CHECK(one.plan.actions[0].color != init.actions[0].color);
  for (std::size_t s = 1; s < 4; ++s) CHECK(one.plan.actions[s].color == init.actions[s].color);
}
