#include "splinestroke/render/training.hpp"

#include "splinestroke/grad/ops.hpp"
#include "splinestroke/grad/optim.hpp"
#include "splinestroke/io/image.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

namespace splinestroke::render {

namespace g = grad;
using Index = Eigen::Index;
using nlohmann::json;

Eigen::Vector3d estimate_stroke_color(const Tensor& before, const Tensor& after) {
  const Index pixels = static_cast<Index>(before.size() / 3);
  Eigen::ArrayXd change(pixels);
  for (Index p = 0; p < pixels; ++p) {
    change[p] = (after.value().segment<3>(3 * p) - before.value().segment<3>(3 * p)).matrix().norm();
  }
  const double peak = change.maxCoeff();
  if (peak == 0.0) throw Error("estimate_stroke_color: before and after images are identical");
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  double count = 0;
  for (Index p = 0; p < pixels; ++p) {
    if (change[p] >= 0.9 * peak) {
      sum += after.value().segment<3>(3 * p).matrix();
      ++count;
    }
  }
  return sum / count;
}

namespace {

/// mean(w * |(1 - d) * before + d * color - after|), w = 1 + sw * d with the
/// weight held constant. Gradient flows to `dark` only.
Tensor weighted_stamp_l1(const Tensor& before, const Tensor& after, const Tensor& dark, const Eigen::Vector3d& color,
                         double stroke_weight) {
  const Index pixels = static_cast<Index>(dark.size());
  const g::Buffer& b = before.value();
  const g::Buffer& a = after.value();
  const g::Buffer& d = dark.value();
  double total = 0.0;
  for (Index p = 0; p < pixels; ++p) {
    const double w = 1.0 + stroke_weight * d[p];
    for (Index ch = 0; ch < 3; ++ch) {
      total += w * std::abs((1.0 - d[p]) * b[3 * p + ch] + d[p] * color[ch] - a[3 * p + ch]);
    }
  }
  const double norm = 1.0 / static_cast<double>(3 * pixels);
  auto bn = before.node(), an = after.node(), dn = dark.node();
  return g::detail::make_result(
      "weighted_stamp_l1", {}, g::Buffer::Constant(1, total * norm), {dark},
      [bn, an, dn, color, stroke_weight, norm, pixels](const g::Buffer& grad) {
        const g::Buffer& b = bn->value;
        const g::Buffer& a = an->value;
        const g::Buffer& d = dn->value;
        g::Buffer gd = g::Buffer::Zero(pixels);
        for (Index p = 0; p < pixels; ++p) {
          if (d[p] == 0.0) continue;
          const double w = 1.0 + stroke_weight * d[p];
          double s = 0.0;
          for (Index ch = 0; ch < 3; ++ch) {
            const double r = (1.0 - d[p]) * b[3 * p + ch] + d[p] * color[ch] - a[3 * p + ch];
            if (r != 0.0) s += (r > 0.0 ? 1.0 : -1.0) * (color[ch] - b[3 * p + ch]);
          }
          gd[p] = grad[0] * norm * w * s;
        }
        g::detail::accumulate(*dn, gd);
      });
}

}  // namespace

Tensor renderer_loss(const std::vector<StrokeTriple>& data, const std::vector<Eigen::Vector3d>& colors,
                     const Tensor& params, double stroke_weight) {
  Tensor total;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& d = data[i];
    const std::size_t H = d.before.extent(0), W = d.before.extent(1);
    const Tensor dark = render_stroke(to_tensor(d.trajectory), d.delta.to_tensor(), params, H, W);
    const Tensor term = weighted_stamp_l1(d.before, d.after, dark, colors[i], stroke_weight);
    total = total.defined() ? total + term : term;
  }
  return total / static_cast<double>(data.size());
}

namespace {

void validate(const std::vector<StrokeTriple>& data) {
  if (data.empty()) throw Error("train_renderer: empty dataset");
  const g::Shape& shape = data.front().before.shape();
  if (shape.size() != 3 || shape[2] != 3) throw Error("train_renderer: images must be [H,W,3]");
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].before.shape() != shape || data[i].after.shape() != shape) {
      throw Error("train_renderer: image dimensions of triple " + std::to_string(i) + " (" +
                  g::to_string(data[i].after.shape()) + ") differ from " + g::to_string(shape));
    }
  }
}

}  // namespace

RendererTrainResult train_renderer(const std::vector<StrokeTriple>& data, const RendererTrainConfig& config) {
  validate(data);
  std::vector<Eigen::Vector3d> colors;
  for (const auto& d : data) colors.push_back(d.color ? *d.color : estimate_stroke_color(d.before, d.after));

  Tensor params = config.init.to_tensor(true);
  // One slot per scalar so each gets its own step scale.
  std::vector<Tensor> slots;
  g::Adam adam(g::AdamOptions{config.lr});
  const auto init = config.init.values();
  for (std::size_t k = 0; k < kParamCount; ++k) {
    slots.push_back(Tensor::scalar(init[k], true));
    adam.add(slots.back(), std::max(std::abs(init[k]), config.min_scale));
  }

  RendererTrainResult result;
  result.params = config.init;
  auto& tape = g::Tape::current();
  for (std::size_t epoch = 0; epoch <= config.epochs; ++epoch) {
    tape.clear();
    for (auto& s : slots) s.zero_grad();
    const Tensor packed = g::concat({g::reshape(slots[0], {1}), g::reshape(slots[1], {1}), g::reshape(slots[2], {1}),
                                     g::reshape(slots[3], {1}), g::reshape(slots[4], {1}), g::reshape(slots[5], {1}),
                                     g::reshape(slots[6], {1})},
                                    0);
    const bool last = epoch == config.epochs;
    Tensor loss;
    if (last) {
      g::NoGradGuard ng;
      loss = renderer_loss(data, colors, packed, config.stroke_weight);
    } else {
      loss = renderer_loss(data, colors, packed, config.stroke_weight);
    }
    const double value = loss.item();
    if (!std::isfinite(value)) throw Error("train_renderer: non-finite loss at epoch " + std::to_string(epoch));
    if (epoch == 0) {
      result.initial_loss = result.best_loss = value;
    } else if (value < result.best_loss) {
      result.best_loss = value;
      result.best_epoch = epoch;
      result.params = RendererParams::from_tensor(packed);
    }
    if (config.on_epoch) config.on_epoch(epoch, value);
    if (last) break;
    g::backward(loss);
    const double progress = static_cast<double>(epoch) / static_cast<double>(config.epochs);
    adam.set_lr(config.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
    adam.step();
    // keep the dropoff exponent in its domain
    if (slots[kC].value()[0] < 1e-3) slots[kC].mutable_value()[0] = 1e-3;
  }
  tape.clear();
  return result;
}

void save_triple(const std::filesystem::path& dir, std::size_t index, const StrokeTriple& triple) {
  std::filesystem::create_directories(dir);
  json pts = json::array();
  const auto& p = triple.trajectory.points;
  for (Index i = 0; i < p.rows(); ++i) pts.push_back({p(i, 0), p(i, 1), p(i, 2)});
  json j = {{"points", pts}, {"delta", {triple.delta.dx, triple.delta.dy, triple.delta.dtheta}}};
  if (triple.color) j["color"] = {triple.color->x(), triple.color->y(), triple.color->z()};
  const std::string stem = std::to_string(index);
  std::ofstream os(dir / (stem + ".traj.json"));
  if (!os) throw Error("cannot write triple " + stem + " into " + dir.string());
  os << j.dump() << '\n';
  io::write_png(dir / (stem + ".before.png"), triple.before);
  io::write_png(dir / (stem + ".after.png"), triple.after);
}

std::vector<StrokeTriple> load_triples(const std::filesystem::path& root) {
  const std::filesystem::path dir = std::filesystem::is_directory(root / "triples") ? root / "triples" : root;
  if (!std::filesystem::is_directory(dir)) throw Error("triples directory not found: " + root.string());
  std::map<std::size_t, std::filesystem::path> found;
  const std::string suffix = ".traj.json";
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) continue;
    const std::string stem = name.substr(0, name.size() - suffix.size());
    if (stem.find_first_not_of("0123456789") != std::string::npos) continue;
    found[std::stoul(stem)] = entry.path();
  }
  std::vector<StrokeTriple> out;
  for (const auto& [idx, path] : found) {
    const std::string stem = std::to_string(idx);
    StrokeTriple t;
    try {
      std::ifstream is(path);
      const json j = json::parse(is);
      const auto& pts = j.at("points");
      t.trajectory.points.resize(static_cast<Index>(pts.size()), 3);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto v = pts[i].get<std::vector<double>>();
        if (v.size() != 3) throw Error("points must be [x,y,h]");
        t.trajectory.points.row(static_cast<Index>(i)) << v[0], v[1], v[2];
      }
      const auto d = j.at("delta").get<std::vector<double>>();
      if (d.size() != 3) throw Error("delta must be [dx,dy,dtheta]");
      t.delta = {d[0], d[1], d[2]};
      if (j.contains("color")) {
        const auto c = j["color"].get<std::vector<double>>();
        if (c.size() != 3) throw Error("color must be [r,g,b]");
        t.color = Eigen::Vector3d(c[0], c[1], c[2]);
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error("triple " + stem + ": " + e.what());
    }
    for (const char* which : {"before", "after"}) {
      const auto img = dir / (stem + "." + which + ".png");
      if (!std::filesystem::exists(img)) throw Error("triple " + stem + ": missing " + which + " image " + img.string());
    }
    t.before = io::read_png(dir / (stem + ".before.png"));
    t.after = io::read_png(dir / (stem + ".after.png"));
    out.push_back(std::move(t));
  }
  if (out.empty()) throw Error("no triples found in " + dir.string());
  return out;
}

}  // namespace splinestroke::render
