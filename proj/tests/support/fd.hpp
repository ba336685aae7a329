#pragma once

// Central finite differences over the elements of leaf tensors. Test-only
// oracle: it evaluates the forward function and nothing else.

#include "splinestroke/grad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace testsupport {

using splinestroke::grad::Buffer;
using splinestroke::grad::Tensor;

inline Buffer central_difference(const std::function<double()>& f, Tensor& x, double step) {
  Buffer out(x.value().size());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double saved = x.value()[i];
    x.mutable_value()[i] = saved + step;
    const double fp = f();
    x.mutable_value()[i] = saved - step;
    const double fm = f();
    x.mutable_value()[i] = saved;
    out[i] = (fp - fm) / (2.0 * step);
  }
  return out;
}

inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  const double diff = std::abs(analytic - numeric);
  if (diff <= floor) return 0.0;
  return diff / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline double max_relative_error(const Buffer& analytic, const Buffer& numeric, double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) worst = std::max(worst, relative_error(analytic[i], numeric[i], floor));
  return worst;
}

}  // namespace testsupport
