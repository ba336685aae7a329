#include "splinestroke/grad/ops.hpp"
#include "splinestroke/io/image.hpp"
#include "splinestroke/planner/compose.hpp"
#include "splinestroke/planner/loss.hpp"

#include "support/fd.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

using namespace splinestroke;
using grad::Tensor;
using testsupport::central_difference;
using testsupport::max_relative_error;

namespace {

Tensor random_tensor(grad::Shape shape, std::mt19937_64& rng, bool requires_grad, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  grad::Buffer v(static_cast<Eigen::Index>(grad::numel(shape)));
  for (auto& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "splinestroke_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("stamp examples") {
  const Tensor white = planner::solid_canvas(2, 2, Eigen::Vector3d::Ones());
  const Tensor black = Tensor::vector(Eigen::Vector3d::Zero());

  const Tensor none = planner::stamp(white, Tensor::zeros({2, 2}), black);
  CHECK((none.value() - white.value()).abs().maxCoeff() == 0.0);

  const Tensor full = planner::stamp(white, Tensor::full({2, 2}, 1.0), Tensor::vector(Eigen::Vector3d(0.2, 0.4, 0.6)));
  for (std::size_t p = 0; p < 4; ++p) {
    CHECK(full[3 * p] == 0.2);
    CHECK(full[3 * p + 1] == 0.4);
    CHECK(full[3 * p + 2] == 0.6);
  }

  const Tensor half = planner::stamp(white, Tensor::full({2, 2}, 0.5), black);
  CHECK((half.value() - 0.5).abs().maxCoeff() < 1e-15);
}

TEST_CASE("stamp stays in the convex hull of canvas and color") {
  std::mt19937_64 rng(3);
  const Tensor canvas = random_tensor({5, 6, 3}, rng, false);
  const Tensor alpha = random_tensor({5, 6}, rng, false);
  const Tensor color = random_tensor({3}, rng, false);
  const Tensor out = planner::stamp(canvas, alpha, color);
  for (Eigen::Index i = 0; i < out.value().size(); ++i) {
    const double a = canvas.value()[i], c = color.value()[i % 3];
    CHECK(out.value()[i] >= std::min(a, c) - 1e-15);
    CHECK(out.value()[i] <= std::max(a, c) + 1e-15);
  }
}

TEST_CASE("stamp gradients") {
  std::mt19937_64 rng(11);
  Tensor canvas = random_tensor({4, 3, 3}, rng, true);
  Tensor alpha = random_tensor({4, 3}, rng, true);
  Tensor color = random_tensor({3}, rng, true);
  const Tensor weights = random_tensor({4, 3, 3}, rng, false, -1.0, 1.0);
  auto f = [&] {
    grad::NoGradGuard ng;
    return grad::sum(planner::stamp(canvas, alpha, color) * weights).item();
  };
  grad::Tape::current().clear();
  grad::backward(grad::sum(planner::stamp(canvas, alpha, color) * weights));
  CHECK(max_relative_error(canvas.grad(), central_difference(f, canvas, 1e-6)) < 1e-6);
  CHECK(max_relative_error(alpha.grad(), central_difference(f, alpha, 1e-6)) < 1e-6);
  CHECK(max_relative_error(color.grad(), central_difference(f, color, 1e-6)) < 1e-6);
}

TEST_CASE("colorize") {
  const Tensor dark = Tensor::from({1, 2}, {0.0, 0.5});
  const auto layer = planner::colorize(dark, Tensor::vector(Eigen::Vector3d(1, 0.5, 0)));
  CHECK(layer.layer.shape() == grad::Shape{1, 2, 3});
  CHECK(layer.layer[3] == 0.5);
  CHECK(layer.layer[4] == 0.25);
  CHECK(layer.alpha.same_node(dark));
}

TEST_CASE("stamp shape errors") {
  const Tensor canvas = planner::solid_canvas(2, 2, Eigen::Vector3d::Ones());
  CHECK_THROWS_AS(planner::stamp(canvas, Tensor::zeros({2, 3}), Tensor::zeros({3})), grad::GradError);
  CHECK_THROWS_AS(planner::stamp(canvas, Tensor::zeros({2, 2}), Tensor::zeros({4})), grad::GradError);
}

TEST_CASE("gaussian blur") {
  std::mt19937_64 rng(5);
  // Rows of the blur are normalized, so constants are preserved exactly.
  const Tensor flat = Tensor::full({6, 7, 3}, 0.25);
  CHECK((planner::gaussian_blur(flat, 2.0).value() - 0.25).abs().maxCoeff() < 1e-14);

  Tensor img = random_tensor({6, 7, 3}, rng, true);
  const Tensor weights = random_tensor({6, 7, 3}, rng, false, -1.0, 1.0);
  auto f = [&] {
    grad::NoGradGuard ng;
    return grad::sum(planner::gaussian_blur(img, 1.5) * weights).item();
  };
  grad::Tape::current().clear();
  grad::backward(grad::sum(planner::gaussian_blur(img, 1.5) * weights));
  CHECK(max_relative_error(img.grad(), central_difference(f, img, 1e-6)) < 1e-6);
}

TEST_CASE("loss kinds") {
  CHECK(planner::parse_loss_kind("l2") == planner::LossKind::PixelL2);
  CHECK(planner::to_string(planner::parse_loss_kind("l1")) == "l1");
  CHECK_THROWS_AS(planner::parse_loss_kind("ssim"), Error);

  const Tensor a = Tensor::full({2, 2, 3}, 0.5);
  const Tensor b = Tensor::full({2, 2, 3}, 0.25);
  planner::LossSpec spec;
  CHECK(planner::evaluate_loss(spec, a, b).item() == doctest::Approx(0.0625));
  spec.kind = planner::LossKind::PixelL1;
  CHECK(planner::evaluate_loss(spec, a, b).item() == doctest::Approx(0.25));
  spec.blur_sigmas = {1.0, 2.0};
  spec.blur_weight_power = 2.0;
  CHECK(planner::evaluate_loss(spec, a, b).item() == doctest::Approx(0.25 * (1 + 1 + 4)));
  CHECK(planner::pixel_l2(a, b) == doctest::Approx(0.0625));
  CHECK_THROWS_AS(planner::evaluate_loss(spec, a, Tensor::zeros({2, 3, 3})), Error);
  spec.kind = planner::LossKind::Feature;
  CHECK_THROWS_AS(planner::evaluate_loss(spec, a, b), Error);
}

TEST_CASE("png round trip") {
  std::mt19937_64 rng(9);
  const Tensor img = io::quantize8(random_tensor({5, 7, 3}, rng, false));
  const auto path = scratch("roundtrip.png");
  io::write_png(path, img);
  const Tensor back = io::read_png(path);
  CHECK(back.shape() == img.shape());
  CHECK((back.value() - img.value()).abs().maxCoeff() < 1e-12);

  io::write_png(path, Tensor::full({3, 2}, 0.5));
  const Tensor gray = io::read_png(path);
  CHECK(gray.shape() == grad::Shape{3, 2, 3});
  CHECK((gray.value() - 128.0 / 255.0).abs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(io::read_png(scratch("missing.png")), Error);
}

TEST_CASE("bilinear resize") {
  const Tensor flat = Tensor::full({4, 4, 3}, 0.3);
  const Tensor up = io::resize_bilinear(flat, 9, 5);
  CHECK(up.shape() == grad::Shape{9, 5, 3});
  CHECK((up.value() - 0.3).abs().maxCoeff() < 1e-15);

  // A horizontal ramp sampled at pixel centers stays a ramp.
  Tensor ramp = Tensor::zeros({1, 4, 1});
  for (std::size_t j = 0; j < 4; ++j) ramp.mutable_value()[j] = (j + 0.5) / 4.0;
  const Tensor half = io::resize_bilinear(ramp, 1, 2);
  CHECK(half[0] == doctest::Approx(0.25));
  CHECK(half[1] == doctest::Approx(0.75));
}
