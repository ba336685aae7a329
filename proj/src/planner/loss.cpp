#include "splinestroke/planner/loss.hpp"

#include "splinestroke/grad/ops.hpp"

#include <cmath>

namespace splinestroke::planner {

namespace g = grad;
using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;

LossSpec default_loss(std::size_t canvas_width) {
  LossSpec spec;
  const double scale = static_cast<double>(canvas_width) / 128.0;
  spec.blur_sigmas = {4.0 * scale, 16.0 * scale, 64.0 * scale};
  spec.blur_weight_power = 1.5;
  return spec;
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "l1") return LossKind::PixelL1;
  if (name == "l2") return LossKind::PixelL2;
  if (name == "feature") return LossKind::Feature;
  throw Error("unknown loss kind '" + name + "' (expected l1, l2 or feature)");
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::PixelL1: return "l1";
    case LossKind::PixelL2: return "l2";
    case LossKind::Feature: return "feature";
  }
  return "?";
}

namespace {

Matrix blur_matrix(Index n, double sigma) {
  Matrix b(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) b(i, j) = std::exp(-0.5 * std::pow(static_cast<double>(i - j) / sigma, 2));
    b.row(i) /= b.row(i).sum();
  }
  return b;
}

/// out_c = L * X_c * R^T for every channel c of an [H,W,C] buffer.
g::Buffer apply_separable(const g::Buffer& in, Index h, Index w, Index c, const Matrix& left, const Matrix& right) {
  g::Buffer out(in.size());
  Matrix x(h, w);
  for (Index ch = 0; ch < c; ++ch) {
    for (Index i = 0; i < h; ++i)
      for (Index j = 0; j < w; ++j) x(i, j) = in[(i * w + j) * c + ch];
    const Matrix y = left * x * right.transpose();
    for (Index i = 0; i < h; ++i)
      for (Index j = 0; j < w; ++j) out[(i * w + j) * c + ch] = y(i, j);
  }
  return out;
}

Tensor pixel_term(LossKind kind, const Tensor& diff) {
  return kind == LossKind::PixelL1 ? g::abs(diff) : g::square(diff);
}

}  // namespace

Tensor gaussian_blur(const Tensor& image, double sigma) {
  if (image.dim() != 3) throw g::GradError("gaussian_blur: expected [H,W,C], got " + g::to_string(image.shape()));
  if (!(sigma > 0.0)) throw g::GradError("gaussian_blur: sigma must be positive");
  const Index h = static_cast<Index>(image.extent(0)), w = static_cast<Index>(image.extent(1)),
              c = static_cast<Index>(image.extent(2));
  auto bh = std::make_shared<Matrix>(blur_matrix(h, sigma));
  auto bw = std::make_shared<Matrix>(blur_matrix(w, sigma));
  auto in = image.node();
  return g::detail::make_result("gaussian_blur", image.shape(), apply_separable(image.value(), h, w, c, *bh, *bw),
                                {image}, [in, bh, bw, h, w, c](const g::Buffer& grad) {
                                  const Matrix lt = bh->transpose(), rt = bw->transpose();
                                  g::detail::accumulate(*in, apply_separable(grad, h, w, c, lt, rt));
                                });
}

PreparedTarget prepare_target(const LossSpec& spec, const Tensor& target) {
  g::NoGradGuard ng;
  PreparedTarget out{target.detach(), {}};
  if (spec.kind != LossKind::Feature) {
    for (double sigma : spec.blur_sigmas) out.blurred.push_back(gaussian_blur(out.image, sigma));
  }
  return out;
}

Tensor evaluate_loss(const LossSpec& spec, const Tensor& predicted, const Tensor& target) {
  return evaluate_loss(spec, predicted, prepare_target(spec, target));
}

Tensor evaluate_loss(const LossSpec& spec, const Tensor& predicted, const PreparedTarget& prepared) {
  const Tensor& target = prepared.image;
  if (predicted.shape() != target.shape()) {
    throw Error("loss: predicted " + g::to_string(predicted.shape()) + " and target " + g::to_string(target.shape()) +
                " differ");
  }
  Tensor loss;
  if (spec.kind == LossKind::Feature) {
    if (!spec.feature) throw Error("loss: feature kind selected but no feature loss installed");
    loss = spec.feature(predicted, target);
    if (loss.size() != 1) throw Error("loss: feature loss must return a scalar");
    return loss;
  }
  Tensor term = pixel_term(spec.kind, predicted - target);
  if (spec.weight) {
    const Tensor& w = *spec.weight;
    term = w.dim() == 2 ? term * g::reshape(w, {w.extent(0), w.extent(1), 1}) : term * w;
  }
  loss = g::mean(term);
  if (prepared.blurred.size() != spec.blur_sigmas.size()) throw Error("loss: target prepared for a different spec");
  for (std::size_t k = 0; k < spec.blur_sigmas.size(); ++k) {
    const double sigma = spec.blur_sigmas[k];
    const double w = std::pow(sigma, spec.blur_weight_power);
    loss = loss + w * g::mean(pixel_term(spec.kind, gaussian_blur(predicted, sigma) - prepared.blurred[k]));
  }
  return loss;
}

double pixel_l2(const Tensor& predicted, const Tensor& target) {
  if (predicted.shape() != target.shape()) throw Error("pixel_l2: shape mismatch");
  return (predicted.value() - target.value()).square().mean();
}

}  // namespace splinestroke::planner
