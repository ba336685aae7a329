#include "splinestroke/grad/optim.hpp"

#include <cmath>

namespace splinestroke::grad {

void Adam::add(Tensor param, double lr_scale) {
  if (!param.is_leaf() || !param.requires_grad()) {
    throw GradError("Adam: parameters must be requires-grad leaves");
  }
  const auto n = param.value().size();
  slots_.push_back({std::move(param), lr_scale, Buffer::Zero(n), Buffer::Zero(n), 0});
}

void Adam::add(const std::vector<Tensor>& params, double lr_scale) {
  for (const auto& p : params) add(p, lr_scale);
}

void Adam::step() {
  for (auto& s : slots_) {
    if (!s.param.has_grad()) continue;
    const Buffer g = s.param.grad();
    ++s.steps;
    s.m = options_.beta1 * s.m + (1.0 - options_.beta1) * g;
    s.v = options_.beta2 * s.v + (1.0 - options_.beta2) * g.square();
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(s.steps));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(s.steps));
    const double lr = options_.lr * s.lr_scale;
    s.param.mutable_value() -= lr * (s.m / c1) / ((s.v / c2).sqrt() + options_.eps);
  }
}

void Adam::zero_grad() {
  for (auto& s : slots_) s.param.zero_grad();
}

}  // namespace splinestroke::grad
