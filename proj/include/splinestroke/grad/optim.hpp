#pragma once

#include "splinestroke/grad/tensor.hpp"

#include <vector>

namespace splinestroke::grad {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adaptive-moment gradient descent over leaf tensors.
///
/// Each parameter keeps its own step counter and is only updated when it
/// carries a gradient, so a parameter that sits out an iteration (frozen,
/// detached) resumes with consistent bias correction.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  /// `lr_scale` multiplies the global learning rate for this parameter.
  void add(Tensor param, double lr_scale = 1.0);
  void add(const std::vector<Tensor>& params, double lr_scale = 1.0);

  void step();
  void zero_grad();

  void set_lr(double lr) { options_.lr = lr; }
  double lr() const { return options_.lr; }
  std::size_t size() const { return slots_.size(); }

 private:
  struct Slot {
    Tensor param;
    double lr_scale;
    Buffer m, v;
    long steps = 0;
  };
  AdamOptions options_;
  std::vector<Slot> slots_;
};

}  // namespace splinestroke::grad
