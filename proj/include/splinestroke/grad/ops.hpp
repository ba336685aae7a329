#pragma once

#include "splinestroke/grad/tensor.hpp"

#include <vector>

namespace splinestroke::grad {

// Elementwise binary ops broadcast with numpy rules (trailing axes aligned,
// extent 1 stretches). Gradients are summed back over broadcast axes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
/// Pairwise min/max route the gradient to the winner; ties go to `a`.
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);
/// Elementwise power with a tensor exponent. The base must be non-negative;
/// the exponent gradient uses log(max(base, 1e-6)) and is exactly 0 where
/// base == 0.
Tensor pow(const Tensor& base, const Tensor& exponent);

Tensor pow(const Tensor& base, double exponent);
Tensor neg(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor square(const Tensor& x);
Tensor sin(const Tensor& x);
Tensor cos(const Tensor& x);
/// Gradient 1 strictly inside (lo, hi), 0 at and beyond the bounds.
Tensor clamp(const Tensor& x, double lo, double hi);

Tensor sum(const Tensor& x);
Tensor sum(const Tensor& x, std::size_t axis, bool keepdim = false);
Tensor mean(const Tensor& x);
Tensor mean(const Tensor& x, std::size_t axis, bool keepdim = false);
/// Full reductions; ties resolve to the lowest flat index.
Tensor min(const Tensor& x);
Tensor max(const Tensor& x);
/// Euclidean norm along `axis` (removed from the shape). The gradient is
/// zero where the norm is exactly zero.
Tensor l2_norm(const Tensor& x, std::size_t axis);

/// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& x, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
/// Elementwise choice by a constant mask; `a`, `b` and `mask` share a shape.
Tensor select(const Eigen::Array<bool, Eigen::Dynamic, 1>& mask, const Tensor& a, const Tensor& b);
/// Average pooling of an [H,W,C] tensor by `factor` along H and W. Edge
/// windows that overhang average over the pixels they cover.
Tensor avg_pool2d(const Tensor& x, std::size_t factor);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator+(const Tensor& a, double b) { return add(a, Tensor::scalar(b)); }
inline Tensor operator+(double a, const Tensor& b) { return add(Tensor::scalar(a), b); }
inline Tensor operator-(const Tensor& a, double b) { return sub(a, Tensor::scalar(b)); }
inline Tensor operator-(double a, const Tensor& b) { return sub(Tensor::scalar(a), b); }
inline Tensor operator*(const Tensor& a, double b) { return mul(a, Tensor::scalar(b)); }
inline Tensor operator*(double a, const Tensor& b) { return mul(Tensor::scalar(a), b); }
inline Tensor operator/(const Tensor& a, double b) { return div(a, Tensor::scalar(b)); }
inline Tensor operator/(double a, const Tensor& b) { return div(Tensor::scalar(a), b); }

/// Shape that `a` and `b` broadcast to; throws GradError naming `op`.
Shape broadcast_shape(const Shape& a, const Shape& b, const std::string& op);

}  // namespace splinestroke::grad
