#include "splinestroke/render/traj2stroke.hpp"

#include "splinestroke/grad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

namespace splinestroke::render {

namespace g = grad;
using Index = Eigen::Index;

RendererParams RendererParams::from_values(const std::array<double, kParamCount>& v) {
  return {v[kMx], v[kMy], v[kBx], v[kBy], v[kAlpha], v[kBeta], v[kC]};
}

Tensor RendererParams::to_tensor(bool requires_grad) const {
  const auto v = values();
  return Tensor::from({kParamCount}, std::vector<double>(v.begin(), v.end()), requires_grad);
}

RendererParams RendererParams::from_tensor(const Tensor& t) {
  if (t.size() != kParamCount) throw Error("renderer params: expected 7 values, got " + std::to_string(t.size()));
  std::array<double, kParamCount> v{};
  for (std::size_t i = 0; i < kParamCount; ++i) v[i] = t[i];
  return from_values(v);
}

nlohmann::json RendererParams::to_json() const {
  nlohmann::json j;
  const auto v = values();
  for (std::size_t i = 0; i < kParamCount; ++i) j[kParamNames[i]] = v[i];
  return j;
}

RendererParams RendererParams::from_json(const nlohmann::json& j) {
  std::array<double, kParamCount> v{};
  for (std::size_t i = 0; i < kParamCount; ++i) {
    if (!j.contains(kParamNames[i])) throw Error(std::string("renderer params: missing '") + kParamNames[i] + "'");
    v[i] = j.at(kParamNames[i]).get<double>();
  }
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(kParamNames.begin(), kParamNames.end(), [&](const char* n) { return key == n; }) ==
        kParamNames.end()) {
      throw Error("renderer params: unknown key '" + key + "'");
    }
  }
  auto p = from_values(v);
  if (!(p.c > 0.0)) throw Error("renderer params: c must be positive");
  return p;
}

void RendererParams::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << to_json().dump(2) << '\n';
}

RendererParams RendererParams::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open renderer checkpoint " + path.string());
  return from_json(nlohmann::json::parse(is));
}

double wrap_angle(double radians) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(radians, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

Tensor PoseOffset::to_tensor(bool requires_grad) const {
  return Tensor::from({3}, {dx, dy, dtheta}, requires_grad);
}

PoseOffset PoseOffset::from_tensor(const Tensor& t) {
  if (t.size() != 3) throw Error("pose offset: expected 3 values");
  return {t[0], t[1], t[2]};
}

Tensor coordinate_grid(std::size_t height, std::size_t width) {
  g::Buffer b(static_cast<Index>(height * width * 2));
  for (std::size_t i = 0; i < height; ++i)
    for (std::size_t j = 0; j < width; ++j) {
      const Index k = static_cast<Index>((i * width + j) * 2);
      b[k] = (static_cast<double>(j) + 0.5) / static_cast<double>(width);
      b[k + 1] = (static_cast<double>(i) + 0.5) / static_cast<double>(height);
    }
  return Tensor({height, width, 2}, std::move(b));
}

// ---------------------------------------------------------------------------
// Graph-expression maps

namespace {

/// Projection coefficient (G - u).(v - u) / |v - u|^2 as an [H,W] tensor.
Tensor projection_coefficient(const Tensor& a, const Tensor& e) {
  return g::sum(a * e, 2) / g::sum(g::square(e));
}

bool degenerate(const Tensor& u, const Tensor& v) {
  const double dx = v[0] - u[0], dy = v[1] - u[1];
  return std::sqrt(dx * dx + dy * dy) < kDegenerateLength;
}

Tensor as_scalar(const Tensor& t) { return t.size() == 1 && t.dim() != 0 ? g::reshape(t, {}) : t; }

}  // namespace

Tensor distance_map(const Tensor& u, const Tensor& v, const Tensor& grid) {
  const Tensor a = grid - u;
  const Tensor du = g::l2_norm(a, 2);
  if (degenerate(u, v)) return du;
  const Tensor e = v - u;
  const Tensor coef = projection_coefficient(a, e);
  const std::size_t H = grid.extent(0), W = grid.extent(1);
  const Tensor rejection = a - g::reshape(coef, {H, W, 1}) * e;
  const Tensor line = g::l2_norm(rejection, 2);
  const Tensor dv = g::l2_norm(grid - v, 2);
  const Eigen::Array<bool, Eigen::Dynamic, 1> inside = (coef.value() >= 0.0) && (coef.value() <= 1.0);
  return g::minimum(g::minimum(g::select(inside, line, du), du), dv);
}

Tensor height_map(const Tensor& u, const Tensor& v, const Tensor& h_u, const Tensor& h_v, const Tensor& grid) {
  const Tensor hu = as_scalar(h_u);
  const Tensor hv = as_scalar(h_v);
  if (degenerate(u, v)) return hu + Tensor::zeros({grid.extent(0), grid.extent(1)});
  const Tensor t = g::clamp(projection_coefficient(grid - u, v - u), 0.0, 1.0);
  return (1.0 - t) * hu + t * hv;
}

Tensor thickness_map(const Tensor& height, const Tensor& alpha, const Tensor& beta) {
  return g::clamp(as_scalar(alpha) * height + as_scalar(beta), kThicknessFloor,
                  std::numeric_limits<double>::infinity());
}

Tensor segment_darkness(const Tensor& distance, const Tensor& thickness, const Tensor& c) {
  return g::pow(g::clamp(1.0 - distance / thickness, 0.0, 1.0), as_scalar(c));
}

Tensor reorient(const Tensor& traj, const Tensor& delta, const Tensor& params) {
  if (traj.dim() != 2 || traj.extent(1) != 3) throw Error("reorient: trajectory must be [n,3]");
  if (delta.size() != 3 || params.size() != kParamCount) throw Error("reorient: expected [3] offset and [7] params");
  const Tensor x = g::slice(traj, 1, 0, 1);
  const Tensor y = g::slice(traj, 1, 1, 2);
  const Tensor h = g::slice(traj, 1, 2, 3);
  const Tensor theta = g::slice(delta, 0, 2, 3);
  const Tensor cs = g::cos(theta);
  const Tensor sn = g::sin(theta);
  const Tensor xr = x * cs - y * sn;
  const Tensor yr = x * sn + y * cs;
  auto p = [&](std::size_t slot) { return g::slice(params, 0, slot, slot + 1); };
  const Tensor xc = p(kMx) * xr + p(kBx) + g::slice(delta, 0, 0, 1);
  const Tensor yc = p(kMy) * yr + p(kBy) + g::slice(delta, 0, 1, 2);
  return g::concat({xc, yc, h}, 1);
}

Tensor render_stroke_reference(const Tensor& traj, const Tensor& delta, const Tensor& params, std::size_t height,
                               std::size_t width) {
  const Tensor pts = reorient(traj, delta, params);
  const std::size_t n = pts.extent(0);
  if (n < 2) throw Error("render_stroke: need at least 2 points");
  const Tensor grid = coordinate_grid(height, width);
  auto point = [&](std::size_t i) { return g::reshape(g::slice(g::slice(pts, 0, i, i + 1), 1, 0, 2), {2}); };
  auto h = [&](std::size_t i) { return g::reshape(g::slice(g::slice(pts, 0, i, i + 1), 1, 2, 3), {}); };
  auto slot = [&](std::size_t s) { return g::reshape(g::slice(params, 0, s, s + 1), {}); };
  Tensor out;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const Tensor u = point(k), v = point(k + 1);
    const Tensor dist = distance_map(u, v, grid);
    const Tensor thick = thickness_map(height_map(u, v, h(k), h(k + 1), grid), slot(kAlpha), slot(kBeta));
    const Tensor dark = segment_darkness(dist, thick, slot(kC));
    out = out.defined() ? g::maximum(out, dark) : dark;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fused kernel

namespace {

struct Segment {
  Eigen::Vector2d u, v, e;
  double hu, hv, len2;
  bool degenerate;
};

enum class Nearest { Line, U, V };

/// Every intermediate of one pixel/segment evaluation needed for backward.
struct PixelEval {
  Eigen::Vector2d a, rejection, pv;
  double coef = 0.0;
  double distance = 0.0;
  Nearest nearest = Nearest::U;
  double t_param = 0.0;
  bool t_active = false;
  double height = 0.0;
  double thickness = 0.0;
  bool thickness_active = false;
  double base = 0.0;
  bool base_active = false;
  double darkness = 0.0;
};

struct Kernel {
  double alpha, beta, c;

  PixelEval eval(const Segment& s, const Eigen::Vector2d& p) const {
    PixelEval r;
    r.a = p - s.u;
    const double du = r.a.norm();
    if (s.degenerate) {
      r.distance = du;
      r.nearest = Nearest::U;
      r.height = s.hu;
    } else {
      r.coef = r.a.dot(s.e) / s.len2;
      r.pv = p - s.v;
      const double dv = r.pv.norm();
      if (r.coef >= 0.0 && r.coef <= 1.0) {
        r.rejection = r.a - r.coef * s.e;
        r.distance = r.rejection.norm();
        r.nearest = Nearest::Line;
        if (du < r.distance) {
          r.distance = du;
          r.nearest = Nearest::U;
        }
      } else {
        r.distance = du;
        r.nearest = Nearest::U;
      }
      if (dv < r.distance) {
        r.distance = dv;
        r.nearest = Nearest::V;
      }
      r.t_param = std::clamp(r.coef, 0.0, 1.0);
      r.t_active = r.coef > 0.0 && r.coef < 1.0;
      r.height = (1.0 - r.t_param) * s.hu + r.t_param * s.hv;
    }
    const double raw_thickness = alpha * r.height + beta;
    r.thickness_active = raw_thickness > kThicknessFloor;
    r.thickness = r.thickness_active ? raw_thickness : kThicknessFloor;
    const double raw_base = 1.0 - r.distance / r.thickness;
    r.base_active = raw_base > 0.0 && raw_base < 1.0;
    r.base = std::clamp(raw_base, 0.0, 1.0);
    r.darkness = r.base > 0.0 ? std::pow(r.base, c) : 0.0;
    return r;
  }

  double max_thickness(const Segment& s) const {
    auto t = [&](double h) { return std::max(alpha * h + beta, kThicknessFloor); };
    return std::max(t(s.hu), t(s.hv));
  }
};

struct Grads {
  Eigen::Vector2d u = Eigen::Vector2d::Zero(), v = Eigen::Vector2d::Zero();
  double hu = 0, hv = 0, alpha = 0, beta = 0, c = 0;
};

void backprop_pixel(const Kernel& k, const Segment& s, const PixelEval& r, double g_dark, Grads& out) {
  if (r.base <= 0.0) return;
  out.c += g_dark * r.darkness * std::log(std::max(r.base, kPowBaseFloor));
  if (!r.base_active) return;
  const double g_base = g_dark * k.c * std::pow(r.base, k.c - 1.0);
  const double g_distance = -g_base / r.thickness;
  const double g_thickness = g_base * r.distance / (r.thickness * r.thickness);

  double g_height = 0.0;
  if (r.thickness_active) {
    g_height = g_thickness * k.alpha;
    out.alpha += g_thickness * r.height;
    out.beta += g_thickness;
  }

  Eigen::Vector2d g_a = Eigen::Vector2d::Zero();
  Eigen::Vector2d g_e = Eigen::Vector2d::Zero();

  if (s.degenerate) {
    out.hu += g_height;
  } else {
    out.hu += g_height * (1.0 - r.t_param);
    out.hv += g_height * r.t_param;
    const double g_coef = r.t_active ? g_height * (s.hv - s.hu) : 0.0;
    if (g_coef != 0.0) {
      g_a += g_coef * s.e / s.len2;
      g_e += g_coef * (r.a / s.len2 - 2.0 * r.coef * s.e / s.len2);
    }
  }

  switch (r.nearest) {
    case Nearest::Line: {
      const double n = r.rejection.norm();
      if (n > 0.0) {
        const Eigen::Vector2d g_rej = g_distance * r.rejection / n;
        const Eigen::Vector2d dcoef_de = r.a / s.len2 - 2.0 * r.coef * s.e / s.len2;
        const double e_dot = s.e.dot(g_rej);
        // rejection = a - coef(a, e) * e
        g_a += g_rej - (e_dot / s.len2) * s.e;
        g_e += -r.coef * g_rej - e_dot * dcoef_de;
      }
      break;
    }
    case Nearest::U: {
      const double n = r.a.norm();
      if (n > 0.0) g_a += g_distance * r.a / n;
      break;
    }
    case Nearest::V: {
      const double n = r.pv.norm();
      if (n > 0.0) out.v -= g_distance * r.pv / n;
      break;
    }
  }
  // a = p - u, e = v - u
  out.u -= g_a + g_e;
  out.v += g_e;
}

struct PixelRange {
  Index begin, end;  // half-open
};

PixelRange covered(double lo, double hi, std::size_t extent) {
  const double w = static_cast<double>(extent);
  const Index b = static_cast<Index>(std::floor(lo * w - 0.5)) - 1;
  const Index e = static_cast<Index>(std::ceil(hi * w - 0.5)) + 2;
  return {std::clamp<Index>(b, 0, static_cast<Index>(extent)), std::clamp<Index>(e, 0, static_cast<Index>(extent))};
}

std::vector<Segment> segments_of(const g::Buffer& pts, Index n) {
  std::vector<Segment> segs;
  segs.reserve(static_cast<std::size_t>(n - 1));
  for (Index k = 0; k + 1 < n; ++k) {
    Segment s;
    s.u = {pts[3 * k], pts[3 * k + 1]};
    s.v = {pts[3 * k + 3], pts[3 * k + 4]};
    s.hu = pts[3 * k + 2];
    s.hv = pts[3 * k + 5];
    s.e = s.v - s.u;
    s.len2 = s.e.squaredNorm();
    s.degenerate = std::sqrt(s.len2) < kDegenerateLength;
    segs.push_back(s);
  }
  return segs;
}

}  // namespace

Tensor rasterize(const Tensor& canvas_traj, const Tensor& params, std::size_t height, std::size_t width) {
  if (canvas_traj.dim() != 2 || canvas_traj.extent(1) != 3) {
    throw Error("rasterize: trajectory must be [n,3], got " + g::to_string(canvas_traj.shape()));
  }
  if (canvas_traj.extent(0) < 2) throw Error("rasterize: need at least 2 points");
  if (params.size() != kParamCount) throw Error("rasterize: params must have 7 entries");
  if (!(params[kC] > 0.0)) throw Error("rasterize: darkness exponent c must be positive");
  const Index n = static_cast<Index>(canvas_traj.extent(0));
  const Kernel kernel{params[kAlpha], params[kBeta], params[kC]};
  const auto segs = segments_of(canvas_traj.value(), n);

  const Index H = static_cast<Index>(height), W = static_cast<Index>(width);
  g::Buffer image = g::Buffer::Zero(H * W);
  auto winner = std::make_shared<std::vector<int>>(static_cast<std::size_t>(H * W), -1);
  for (std::size_t k = 0; k < segs.size(); ++k) {
    const Segment& s = segs[k];
    const double pad = kernel.max_thickness(s);
    const auto cols = covered(std::min(s.u.x(), s.v.x()) - pad, std::max(s.u.x(), s.v.x()) + pad, width);
    const auto rows = covered(std::min(s.u.y(), s.v.y()) - pad, std::max(s.u.y(), s.v.y()) + pad, height);
    for (Index i = rows.begin; i < rows.end; ++i) {
      const double py = (static_cast<double>(i) + 0.5) / static_cast<double>(height);
      for (Index j = cols.begin; j < cols.end; ++j) {
        const Eigen::Vector2d p((static_cast<double>(j) + 0.5) / static_cast<double>(width), py);
        const double d = kernel.eval(s, p).darkness;
        const Index idx = i * W + j;
        if (d > image[idx]) {
          image[idx] = d;
          (*winner)[static_cast<std::size_t>(idx)] = static_cast<int>(k);
        }
      }
    }
  }

  auto tn = canvas_traj.node();
  auto pn = params.node();
  return g::detail::make_result(
      "rasterize", {height, width}, std::move(image), {canvas_traj, params},
      [tn, pn, winner, height, width, n](const g::Buffer& grad) {
        const Kernel k{pn->value[kAlpha], pn->value[kBeta], pn->value[kC]};
        const auto segs = segments_of(tn->value, n);
        std::vector<Grads> per_seg(segs.size());
        const Index W = static_cast<Index>(width);
        for (Index idx = 0; idx < grad.size(); ++idx) {
          const int w = (*winner)[static_cast<std::size_t>(idx)];
          if (w < 0 || grad[idx] == 0.0) continue;
          const Index i = idx / W, j = idx % W;
          const Eigen::Vector2d p((static_cast<double>(j) + 0.5) / static_cast<double>(width),
                                  (static_cast<double>(i) + 0.5) / static_cast<double>(height));
          const Segment& s = segs[static_cast<std::size_t>(w)];
          backprop_pixel(k, s, k.eval(s, p), grad[idx], per_seg[static_cast<std::size_t>(w)]);
        }
        if (tn->requires_grad) {
          g::Buffer gt = g::Buffer::Zero(3 * n);
          for (std::size_t s = 0; s < per_seg.size(); ++s) {
            const Index a = static_cast<Index>(s), b = a + 1;
            gt[3 * a] += per_seg[s].u.x();
            gt[3 * a + 1] += per_seg[s].u.y();
            gt[3 * a + 2] += per_seg[s].hu;
            gt[3 * b] += per_seg[s].v.x();
            gt[3 * b + 1] += per_seg[s].v.y();
            gt[3 * b + 2] += per_seg[s].hv;
          }
          g::detail::accumulate(*tn, gt);
        }
        if (pn->requires_grad) {
          g::Buffer gp = g::Buffer::Zero(kParamCount);
          for (const auto& s : per_seg) {
            gp[kAlpha] += s.alpha;
            gp[kBeta] += s.beta;
            gp[kC] += s.c;
          }
          g::detail::accumulate(*pn, gp);
        }
      });
}

RasterMargins raster_margins(const Tensor& canvas_traj, const RendererParams& params, std::size_t height,
                             std::size_t width) {
  if (canvas_traj.dim() != 2 || canvas_traj.extent(1) != 3 || canvas_traj.extent(0) < 2) {
    throw Error("raster_margins: trajectory must be [n,3] with n >= 2");
  }
  const Index n = static_cast<Index>(canvas_traj.extent(0));
  const Kernel kernel{params.alpha, params.beta, params.c};
  const auto segs = segments_of(canvas_traj.value(), n);
  RasterMargins m;
  for (Index k = 0; k < n; ++k) {
    m.thickness = std::min(m.thickness, params.alpha * canvas_traj.value()[3 * k + 2] + params.beta - kThicknessFloor);
  }
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      const Eigen::Vector2d p((static_cast<double>(j) + 0.5) / static_cast<double>(width),
                              (static_cast<double>(i) + 0.5) / static_cast<double>(height));
      double best = 0.0, second = 0.0, closest_raw = -std::numeric_limits<double>::infinity();
      int winner = -1;
      PixelEval win;
      for (std::size_t k = 0; k < segs.size(); ++k) {
        const PixelEval r = kernel.eval(segs[k], p);
        closest_raw = std::max(closest_raw, 1.0 - r.distance / r.thickness);
        if (r.darkness > best) {
          second = best;
          best = r.darkness;
          winner = static_cast<int>(k);
          win = r;
        } else if (r.darkness > second && r.darkness != best) {
          second = r.darkness;
        }
      }
      if (winner < 0) {
        m.edge = std::min(m.edge, std::abs(closest_raw));
        continue;
      }
      if (second > 0.0) m.winner_gap = std::min(m.winner_gap, best - second);
      m.edge = std::min(m.edge, win.base);
      m.distance = std::min(m.distance, win.distance);
      const Segment& s = segs[static_cast<std::size_t>(winner)];
      if (!s.degenerate && s.hu != s.hv) m.projection = std::min({m.projection, std::abs(win.coef), std::abs(1.0 - win.coef)});
    }
  }
  return m;
}

Tensor render_stroke(const Tensor& traj, const Tensor& delta, const Tensor& params, std::size_t height,
                     std::size_t width) {
  return rasterize(reorient(traj, delta, params), params, height, width);
}

Tensor to_tensor(const trajectory::Trajectory& traj, bool requires_grad) {
  const auto n = static_cast<std::size_t>(traj.points.rows());
  g::Buffer b = Eigen::Map<const g::Buffer>(traj.points.data(), traj.points.size());
  return Tensor({n, 3}, std::move(b), requires_grad);
}

trajectory::Trajectory to_trajectory(const Tensor& t) {
  if (t.dim() != 2 || t.extent(1) != 3) throw Error("to_trajectory: expected [n,3] tensor");
  trajectory::Trajectory out;
  out.points = Eigen::Map<const trajectory::Points>(t.value().data(), static_cast<Index>(t.extent(0)), 3);
  return out;
}

Tensor render_stroke(const trajectory::Trajectory& traj, const PoseOffset& delta, const RendererParams& params,
                     std::size_t height, std::size_t width) {
  g::NoGradGuard guard;
  return render_stroke(to_tensor(traj), delta.to_tensor(), params.to_tensor(), height, width);
}

}  // namespace splinestroke::render
