#include "splinestroke/planner/compose.hpp"

#include "splinestroke/grad/ops.hpp"

namespace splinestroke::planner {

namespace g = grad;
using Index = Eigen::Index;

namespace {

void require_color(const Tensor& color, const char* op) {
  if (color.size() != 3) throw g::GradError(std::string(op) + ": color must have 3 entries, got " + g::to_string(color.shape()));
}

}  // namespace

ColoredLayer colorize(const Tensor& darkness, const Tensor& color) {
  require_color(color, "colorize");
  if (darkness.dim() != 2) throw g::GradError("colorize: darkness must be [H,W], got " + g::to_string(darkness.shape()));
  const Tensor alpha = g::reshape(darkness, {darkness.extent(0), darkness.extent(1), 1});
  return {alpha * g::reshape(color, {3}), darkness};
}

Tensor stamp(const Tensor& canvas, const Tensor& darkness, const Tensor& color) {
  require_color(color, "stamp");
  if (canvas.dim() != 3 || canvas.extent(2) != 3 || darkness.dim() != 2 || canvas.extent(0) != darkness.extent(0) ||
      canvas.extent(1) != darkness.extent(1)) {
    throw g::GradError("stamp: shape mismatch canvas " + g::to_string(canvas.shape()) + " vs darkness " +
                       g::to_string(darkness.shape()));
  }
  const Index pixels = static_cast<Index>(darkness.size());
  const g::Buffer& cv = canvas.value();
  const g::Buffer& a = darkness.value();
  const Eigen::Array3d rgb(color[0], color[1], color[2]);
  g::Buffer out(cv.size());
  for (Index p = 0; p < pixels; ++p)
    for (Index ch = 0; ch < 3; ++ch) out[3 * p + ch] = (1.0 - a[p]) * cv[3 * p + ch] + a[p] * rgb[ch];

  auto cn = canvas.node(), an = darkness.node(), coln = color.node();
  return g::detail::make_result("stamp", canvas.shape(), std::move(out), {canvas, darkness, color},
                                [cn, an, coln, pixels](const g::Buffer& grad) {
                                  const g::Buffer& cv = cn->value;
                                  const g::Buffer& a = an->value;
                                  const Eigen::Array3d rgb(coln->value[0], coln->value[1], coln->value[2]);
                                  if (cn->requires_grad) {
                                    g::Buffer gc(cv.size());
                                    for (Index p = 0; p < pixels; ++p)
                                      for (Index ch = 0; ch < 3; ++ch) gc[3 * p + ch] = (1.0 - a[p]) * grad[3 * p + ch];
                                    g::detail::accumulate(*cn, gc);
                                  }
                                  if (an->requires_grad) {
                                    g::Buffer ga(pixels);
                                    for (Index p = 0; p < pixels; ++p) {
                                      double s = 0.0;
                                      for (Index ch = 0; ch < 3; ++ch) s += grad[3 * p + ch] * (rgb[ch] - cv[3 * p + ch]);
                                      ga[p] = s;
                                    }
                                    g::detail::accumulate(*an, ga);
                                  }
                                  if (coln->requires_grad) {
                                    g::Buffer gcol = g::Buffer::Zero(3);
                                    for (Index p = 0; p < pixels; ++p)
                                      for (Index ch = 0; ch < 3; ++ch) gcol[ch] += a[p] * grad[3 * p + ch];
                                    g::detail::accumulate(*coln, gcol);
                                  }
                                });
}

Tensor solid_canvas(std::size_t height, std::size_t width, const Eigen::Vector3d& rgb) {
  g::Buffer b(static_cast<Index>(height * width * 3));
  for (Index p = 0; p < static_cast<Index>(height * width); ++p) b.segment<3>(3 * p) = rgb.array();
  return Tensor({height, width, 3}, std::move(b));
}

}  // namespace splinestroke::planner
