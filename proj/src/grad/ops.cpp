#include "splinestroke/grad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace splinestroke::grad {

using detail::accumulate;
using detail::make_result;
using Index = Eigen::Index;

namespace {

constexpr double kPowLogFloor = 1e-6;

std::string shapes_msg(const std::string& op, const Tensor& a, const Tensor& b) {
  return op + " " + to_string(a.shape()) + " vs " + to_string(b.shape());
}

/// Flat input offsets for every output element of a broadcast.
struct BroadcastPlan {
  Shape out;
  bool same = false;
  std::vector<Index> ia, ib;
};

BroadcastPlan plan_broadcast(const Tensor& a, const Tensor& b, const std::string& op) {
  BroadcastPlan plan;
  plan.out = broadcast_shape(a.shape(), b.shape(), op);
  if (a.shape() == b.shape()) {
    plan.same = true;
    return plan;
  }
  const std::size_t rank = plan.out.size();
  auto strides_for = [&](const Shape& s) {
    std::vector<Index> st(rank, 0);
    Index acc = 1;
    for (std::size_t k = 0; k < s.size(); ++k) {
      const std::size_t axis = s.size() - 1 - k;
      const std::size_t oaxis = rank - 1 - k;
      st[oaxis] = s[axis] == 1 ? 0 : acc;
      acc *= static_cast<Index>(s[axis]);
    }
    return st;
  };
  const auto sa = strides_for(a.shape());
  const auto sb = strides_for(b.shape());
  const std::size_t n = numel(plan.out);
  plan.ia.resize(n);
  plan.ib.resize(n);
  std::vector<std::size_t> counter(rank, 0);
  Index oa = 0, ob = 0;
  for (std::size_t k = 0; k < n; ++k) {
    plan.ia[k] = oa;
    plan.ib[k] = ob;
    for (std::size_t d = rank; d-- > 0;) {
      ++counter[d];
      oa += sa[d];
      ob += sb[d];
      if (counter[d] < plan.out[d]) break;
      oa -= sa[d] * static_cast<Index>(counter[d]);
      ob -= sb[d] * static_cast<Index>(counter[d]);
      counter[d] = 0;
    }
  }
  return plan;
}

template <class Fwd, class Da, class Db>
Tensor binary(const std::string& op, const Tensor& a, const Tensor& b, Fwd f, Da da, Db db) {
  auto plan = std::make_shared<BroadcastPlan>(plan_broadcast(a, b, op));
  const Index n = static_cast<Index>(numel(plan->out));
  const Buffer& av = a.value();
  const Buffer& bv = b.value();
  Buffer out(n);
  if (plan->same) {
    for (Index k = 0; k < n; ++k) out[k] = f(av[k], bv[k]);
  } else {
    for (Index k = 0; k < n; ++k) out[k] = f(av[plan->ia[k]], bv[plan->ib[k]]);
  }
  Shape shape = plan->out;
  auto an = a.node();
  auto bn = b.node();
  Buffer outv = out;
  return make_result(op, std::move(shape), std::move(out), {a, b},
                     [an, bn, plan, outv, da, db](const Buffer& g) {
                       const Buffer& x = an->value;
                       const Buffer& y = bn->value;
                       const Index m = g.size();
                       if (an->requires_grad) {
                         Buffer ga = Buffer::Zero(x.size());
                         for (Index k = 0; k < m; ++k) {
                           const Index i = plan->same ? k : plan->ia[k];
                           const Index j = plan->same ? k : plan->ib[k];
                           ga[i] += g[k] * da(x[i], y[j], outv[k]);
                         }
                         accumulate(*an, ga);
                       }
                       if (bn->requires_grad) {
                         Buffer gb = Buffer::Zero(y.size());
                         for (Index k = 0; k < m; ++k) {
                           const Index i = plan->same ? k : plan->ia[k];
                           const Index j = plan->same ? k : plan->ib[k];
                           gb[j] += g[k] * db(x[i], y[j], outv[k]);
                         }
                         accumulate(*bn, gb);
                       }
                     });
}

template <class Fwd, class Df>
Tensor unary(const std::string& op, const Tensor& x, Fwd f, Df df) {
  const Buffer& xv = x.value();
  Buffer out = xv.unaryExpr(f);
  auto xn = x.node();
  Buffer outv = out;
  return make_result(op, x.shape(), std::move(out), {x}, [xn, outv, df](const Buffer& g) {
    const Buffer& v = xn->value;
    Buffer gx(v.size());
    for (Index k = 0; k < v.size(); ++k) gx[k] = g[k] * df(v[k], outv[k]);
    accumulate(*xn, gx);
  });
}

/// outer x axis x inner decomposition of a row-major shape.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis, const std::string& op) {
  if (axis >= s.size()) throw GradError(op + ": axis " + std::to_string(axis) + " out of range for " + to_string(s));
  AxisSplit r;
  for (std::size_t d = 0; d < axis; ++d) r.outer *= s[d];
  r.extent = s[axis];
  for (std::size_t d = axis + 1; d < s.size(); ++d) r.inner *= s[d];
  return r;
}

Shape reduced_shape(const Shape& s, std::size_t axis, bool keepdim) {
  Shape out = s;
  if (keepdim) {
    out[axis] = 1;
  } else {
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  return out;
}

template <bool IsMax>
Tensor extreme(const std::string& op, const Tensor& x) {
  const Buffer& v = x.value();
  if (v.size() == 0) throw GradError(op + ": empty tensor");
  Index best = 0;
  for (Index k = 1; k < v.size(); ++k) {
    if (IsMax ? v[k] > v[best] : v[k] < v[best]) best = k;
  }
  auto xn = x.node();
  return make_result(op, {}, Buffer::Constant(1, v[best]), {x}, [xn, best](const Buffer& g) {
    Buffer gx = Buffer::Zero(xn->value.size());
    gx[best] = g[0];
    accumulate(*xn, gx);
  });
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b, const std::string& op) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t k = 0; k < rank; ++k) {
    const std::size_t ea = k < a.size() ? a[a.size() - 1 - k] : 1;
    const std::size_t eb = k < b.size() ? b[b.size() - 1 - k] : 1;
    if (ea != eb && ea != 1 && eb != 1) {
      throw GradError(op + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
    }
    out[rank - 1 - k] = ea == 1 ? eb : ea;
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  if ((b.value() == 0.0).any()) throw GradError("div: division by zero in " + shapes_msg("div", a, b));
  return binary(
      "div", a, b, [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
      [](double x, double y, double) { return -x / (y * y); });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  return binary(
      "minimum", a, b, [](double x, double y) { return x <= y ? x : y; },
      [](double x, double y, double) { return x <= y ? 1.0 : 0.0; },
      [](double x, double y, double) { return x <= y ? 0.0 : 1.0; });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  return binary(
      "maximum", a, b, [](double x, double y) { return x >= y ? x : y; },
      [](double x, double y, double) { return x >= y ? 1.0 : 0.0; },
      [](double x, double y, double) { return x >= y ? 0.0 : 1.0; });
}

Tensor pow(const Tensor& base, const Tensor& exponent) {
  if ((base.value() < 0.0).any()) {
    throw GradError("pow: negative base with tensor exponent in " + shapes_msg("pow", base, exponent));
  }
  return binary(
      "pow", base, exponent, [](double x, double e) { return std::pow(x, e); },
      [](double x, double e, double) { return x > 0.0 ? e * std::pow(x, e - 1.0) : 0.0; },
      [](double x, double, double y) {
        return x > 0.0 ? y * std::log(std::max(x, kPowLogFloor)) : 0.0;
      });
}

Tensor pow(const Tensor& base, double exponent) {
  if (exponent != std::floor(exponent) && (base.value() < 0.0).any()) {
    throw GradError("pow: negative base with non-integer exponent, shape " + to_string(base.shape()));
  }
  return unary(
      "pow", base, [exponent](double x) { return std::pow(x, exponent); },
      [exponent](double x, double) {
        if (x == 0.0 && exponent < 1.0) return 0.0;
        return exponent * std::pow(x, exponent - 1.0);
      });
}

Tensor neg(const Tensor& x) {
  return unary("neg", x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor tanh(const Tensor& x) {
  return unary("tanh", x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& x) {
  return unary("exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  if ((x.value() <= 0.0).any()) throw GradError("log: non-positive input, shape " + to_string(x.shape()));
  return unary("log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor sqrt(const Tensor& x) {
  if ((x.value() < 0.0).any()) throw GradError("sqrt: negative input, shape " + to_string(x.shape()));
  return unary(
      "sqrt", x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor abs(const Tensor& x) {
  return unary(
      "abs", x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& x) {
  return unary("square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sin(const Tensor& x) {
  return unary("sin", x, [](double v) { return std::sin(v); }, [](double v, double) { return std::cos(v); });
}

Tensor cos(const Tensor& x) {
  return unary("cos", x, [](double v) { return std::cos(v); }, [](double v, double) { return -std::sin(v); });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (!(lo <= hi)) throw GradError("clamp: lo > hi");
  return unary(
      "clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& x) {
  auto xn = x.node();
  return make_result("sum", {}, Buffer::Constant(1, x.value().sum()), {x}, [xn](const Buffer& g) {
    accumulate(*xn, Buffer::Constant(xn->value.size(), g[0]));
  });
}

Tensor sum(const Tensor& x, std::size_t axis, bool keepdim) {
  const auto sp = split_axis(x.shape(), axis, "sum");
  const Buffer& v = x.value();
  Buffer out = Buffer::Zero(static_cast<Index>(sp.outer * sp.inner));
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t a = 0; a < sp.extent; ++a)
      for (std::size_t i = 0; i < sp.inner; ++i)
        out[static_cast<Index>(o * sp.inner + i)] += v[static_cast<Index>((o * sp.extent + a) * sp.inner + i)];
  auto xn = x.node();
  return make_result("sum", reduced_shape(x.shape(), axis, keepdim), std::move(out), {x},
                     [xn, sp](const Buffer& g) {
                       Buffer gx(xn->value.size());
                       for (std::size_t o = 0; o < sp.outer; ++o)
                         for (std::size_t a = 0; a < sp.extent; ++a)
                           for (std::size_t i = 0; i < sp.inner; ++i)
                             gx[static_cast<Index>((o * sp.extent + a) * sp.inner + i)] =
                                 g[static_cast<Index>(o * sp.inner + i)];
                       accumulate(*xn, gx);
                     });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw GradError("mean: empty tensor");
  return sum(x) / static_cast<double>(x.size());
}

Tensor mean(const Tensor& x, std::size_t axis, bool keepdim) {
  const auto e = x.extent(axis);
  if (e == 0) throw GradError("mean: empty axis");
  return sum(x, axis, keepdim) / static_cast<double>(e);
}

Tensor min(const Tensor& x) { return extreme<false>("min", x); }
Tensor max(const Tensor& x) { return extreme<true>("max", x); }

Tensor l2_norm(const Tensor& x, std::size_t axis) {
  const auto sp = split_axis(x.shape(), axis, "l2_norm");
  const Buffer& v = x.value();
  Buffer out = Buffer::Zero(static_cast<Index>(sp.outer * sp.inner));
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t a = 0; a < sp.extent; ++a)
      for (std::size_t i = 0; i < sp.inner; ++i) {
        const double e = v[static_cast<Index>((o * sp.extent + a) * sp.inner + i)];
        out[static_cast<Index>(o * sp.inner + i)] += e * e;
      }
  out = out.sqrt();
  auto xn = x.node();
  Buffer norms = out;
  return make_result("l2_norm", reduced_shape(x.shape(), axis, false), std::move(out), {x},
                     [xn, sp, norms](const Buffer& g) {
                       const Buffer& v = xn->value;
                       Buffer gx = Buffer::Zero(v.size());
                       for (std::size_t o = 0; o < sp.outer; ++o)
                         for (std::size_t i = 0; i < sp.inner; ++i) {
                           const Index r = static_cast<Index>(o * sp.inner + i);
                           if (norms[r] == 0.0) continue;
                           const double s = g[r] / norms[r];
                           for (std::size_t a = 0; a < sp.extent; ++a) {
                             const Index k = static_cast<Index>((o * sp.extent + a) * sp.inner + i);
                             gx[k] = s * v[k];
                           }
                         }
                       accumulate(*xn, gx);
                     });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.dim() != 2 || b.dim() != 2 || a.extent(1) != b.extent(0)) {
    throw GradError("matmul: shape mismatch " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Index m = static_cast<Index>(a.extent(0));
  const Index k = static_cast<Index>(a.extent(1));
  const Index n = static_cast<Index>(b.extent(1));
  Buffer out(m * n);
  {
    Eigen::Map<const RowMat> A(a.value().data(), m, k);
    Eigen::Map<const RowMat> B(b.value().data(), k, n);
    Eigen::Map<RowMat> C(out.data(), m, n);
    C.noalias() = A * B;
  }
  auto an = a.node();
  auto bn = b.node();
  return make_result("matmul", {static_cast<std::size_t>(m), static_cast<std::size_t>(n)}, std::move(out), {a, b},
                     [an, bn, m, k, n](const Buffer& g) {
                       Eigen::Map<const RowMat> G(g.data(), m, n);
                       Eigen::Map<const RowMat> A(an->value.data(), m, k);
                       Eigen::Map<const RowMat> B(bn->value.data(), k, n);
                       if (an->requires_grad) {
                         Buffer ga(m * k);
                         Eigen::Map<RowMat>(ga.data(), m, k).noalias() = G * B.transpose();
                         accumulate(*an, ga);
                       }
                       if (bn->requires_grad) {
                         Buffer gb(k * n);
                         Eigen::Map<RowMat>(gb.data(), k, n).noalias() = A.transpose() * G;
                         accumulate(*bn, gb);
                       }
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw GradError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  }
  auto xn = x.node();
  return make_result("reshape", std::move(shape), x.value(), {x},
                     [xn](const Buffer& g) { accumulate(*xn, g); });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw GradError("concat: no inputs");
  const Shape& s0 = parts.front().shape();
  if (axis >= s0.size()) throw GradError("concat: axis out of range for " + to_string(s0));
  Shape out_shape = s0;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == s0[d];
    if (!ok) throw GradError("concat: shape mismatch " + to_string(s0) + " vs " + to_string(s));
    out_shape[axis] += s[axis];
  }
  const auto sp = split_axis(out_shape, axis, "concat");
  Buffer out(static_cast<Index>(numel(out_shape)));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t e = p.shape()[axis];
    const Buffer& v = p.value();
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t a = 0; a < e; ++a)
        for (std::size_t i = 0; i < sp.inner; ++i)
          out[static_cast<Index>((o * sp.extent + off + a) * sp.inner + i)] =
              v[static_cast<Index>((o * e + a) * sp.inner + i)];
    off += e;
  }
  std::vector<std::shared_ptr<detail::Node>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return make_result("concat", out_shape, std::move(out), parts, [nodes, offsets, sp, axis](const Buffer& g) {
    for (std::size_t pi = 0; pi < nodes.size(); ++pi) {
      auto& nd = *nodes[pi];
      if (!nd.requires_grad) continue;
      const std::size_t e = nd.shape[axis];
      Buffer gp(nd.value.size());
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t a = 0; a < e; ++a)
          for (std::size_t i = 0; i < sp.inner; ++i)
            gp[static_cast<Index>((o * e + a) * sp.inner + i)] =
                g[static_cast<Index>((o * sp.extent + offsets[pi] + a) * sp.inner + i)];
      accumulate(nd, gp);
    }
  });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const auto sp = split_axis(x.shape(), axis, "slice");
  if (begin > end || end > sp.extent) {
    throw GradError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) + ") out of bounds for " +
                    to_string(x.shape()));
  }
  Shape out_shape = x.shape();
  const std::size_t e = end - begin;
  out_shape[axis] = e;
  const Buffer& v = x.value();
  Buffer out(static_cast<Index>(numel(out_shape)));
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t a = 0; a < e; ++a)
      for (std::size_t i = 0; i < sp.inner; ++i)
        out[static_cast<Index>((o * e + a) * sp.inner + i)] =
            v[static_cast<Index>((o * sp.extent + begin + a) * sp.inner + i)];
  auto xn = x.node();
  return make_result("slice", std::move(out_shape), std::move(out), {x}, [xn, sp, begin, e](const Buffer& g) {
    Buffer gx = Buffer::Zero(xn->value.size());
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t a = 0; a < e; ++a)
        for (std::size_t i = 0; i < sp.inner; ++i)
          gx[static_cast<Index>((o * sp.extent + begin + a) * sp.inner + i)] =
              g[static_cast<Index>((o * e + a) * sp.inner + i)];
    accumulate(*xn, gx);
  });
}

Tensor select(const Eigen::Array<bool, Eigen::Dynamic, 1>& mask, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() || static_cast<std::size_t>(mask.size()) != a.size()) {
    throw GradError("select: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()) +
                    " with mask of " + std::to_string(mask.size()));
  }
  Buffer out = mask.select(a.value(), b.value());
  auto an = a.node();
  auto bn = b.node();
  Eigen::Array<bool, Eigen::Dynamic, 1> m = mask;
  return make_result("select", a.shape(), std::move(out), {a, b}, [an, bn, m](const Buffer& g) {
    accumulate(*an, m.select(g, Buffer::Zero(g.size())));
    accumulate(*bn, m.select(Buffer::Zero(g.size()), g));
  });
}

Tensor avg_pool2d(const Tensor& x, std::size_t factor) {
  if (x.dim() != 3 || factor == 0) throw GradError("avg_pool2d: expected [H,W,C] input, got " + to_string(x.shape()));
  const std::size_t H = x.extent(0), W = x.extent(1), C = x.extent(2);
  const std::size_t oh = (H + factor - 1) / factor, ow = (W + factor - 1) / factor;
  const Buffer& v = x.value();
  Buffer out = Buffer::Zero(static_cast<Index>(oh * ow * C));
  Buffer counts = Buffer::Zero(static_cast<Index>(oh * ow));
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c) {
      const std::size_t cell = (r / factor) * ow + c / factor;
      counts[static_cast<Index>(cell)] += 1.0;
      for (std::size_t ch = 0; ch < C; ++ch)
        out[static_cast<Index>(cell * C + ch)] += v[static_cast<Index>((r * W + c) * C + ch)];
    }
  for (std::size_t cell = 0; cell < oh * ow; ++cell)
    for (std::size_t ch = 0; ch < C; ++ch) out[static_cast<Index>(cell * C + ch)] /= counts[static_cast<Index>(cell)];
  auto xn = x.node();
  return make_result("avg_pool2d", {oh, ow, C}, std::move(out), {x}, [xn, H, W, C, factor, ow, counts](const Buffer& g) {
    Buffer gx(xn->value.size());
    for (std::size_t r = 0; r < H; ++r)
      for (std::size_t c = 0; c < W; ++c) {
        const std::size_t cell = (r / factor) * ow + c / factor;
        const double inv = 1.0 / counts[static_cast<Index>(cell)];
        for (std::size_t ch = 0; ch < C; ++ch)
          gx[static_cast<Index>((r * W + c) * C + ch)] = g[static_cast<Index>(cell * C + ch)] * inv;
      }
    accumulate(*xn, gx);
  });
}

}  // namespace splinestroke::grad
