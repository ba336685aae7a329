#include "splinestroke/planner/plan.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace splinestroke::planner {

using nlohmann::json;
using Index = Eigen::Index;

namespace {

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd to_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

Eigen::Vector3d to_rgb(const json& j) {
  const Eigen::VectorXd v = to_vec(j);
  if (v.size() != 3) throw Error("plan: colors must have 3 components");
  return v;
}

}  // namespace

void write_plan(const std::filesystem::path& path, const ExportedPlan& exported) {
  const PaintingPlan& plan = exported.plan;
  if (exported.trajectories.size() != plan.actions.size()) throw Error("write_plan: one trajectory per stroke required");
  json strokes = json::array();
  for (std::size_t i = 0; i < plan.actions.size(); ++i) {
    const auto& a = plan.actions[i];
    json pts = json::array();
    const auto& p = exported.trajectories[i].points;
    for (Index r = 0; r < p.rows(); ++r) pts.push_back({p(r, 0), p(r, 1), p(r, 2)});
    strokes.push_back({{"order", i},
                       {"z", vec(a.z)},
                       {"delta", {a.delta.dx, a.delta.dy, a.delta.dtheta}},
                       {"heights", vec(a.heights)},
                       {"color", vec(a.color)},
                       {"trajectory", pts}});
  }
  json palette = json::array();
  for (const auto& c : plan.palette) palette.push_back(vec(c));
  const json doc = {{"version", kPlanVersion},
                    {"canvas",
                     {{"height", plan.canvas.height},
                      {"width", plan.canvas.width},
                      {"background", vec(plan.canvas.background)}}},
                    {"vae_ref", plan.vae_ref},
                    {"renderer_ref", plan.renderer_ref},
                    {"palette", palette},
                    {"strokes", strokes}};
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << doc.dump(1) << '\n';
  if (!os) throw Error("failed writing plan " + path.string());
}

ExportedPlan read_plan(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open plan " + path.string());
  ExportedPlan out;
  try {
    const json doc = json::parse(is);
    if (doc.at("version").get<std::string>() != kPlanVersion) {
      throw Error("unsupported plan version '" + doc.at("version").get<std::string>() + "'");
    }
    const auto& c = doc.at("canvas");
    out.plan.canvas = {c.at("height").get<std::size_t>(), c.at("width").get<std::size_t>(), to_rgb(c.at("background"))};
    out.plan.vae_ref = doc.at("vae_ref").get<std::string>();
    out.plan.renderer_ref = doc.at("renderer_ref").get<std::string>();
    for (const auto& p : doc.at("palette")) out.plan.palette.push_back(to_rgb(p));
    std::vector<std::pair<std::size_t, std::size_t>> order;
    const auto& strokes = doc.at("strokes");
    for (const auto& s : strokes) {
      StrokeAction a;
      a.z = to_vec(s.at("z"));
      const Eigen::VectorXd d = to_vec(s.at("delta"));
      if (d.size() != 3) throw Error("stroke delta must have 3 components");
      a.delta = {d[0], d[1], d[2]};
      a.heights = to_vec(s.at("heights"));
      a.color = to_rgb(s.at("color"));
      trajectory::Trajectory t;
      const auto& pts = s.at("trajectory");
      t.points.resize(static_cast<Index>(pts.size()), 3);
      for (std::size_t r = 0; r < pts.size(); ++r) {
        const auto v = pts[r].get<std::vector<double>>();
        if (v.size() != 3) throw Error("trajectory rows must be [x,y,h]");
        t.points.row(static_cast<Index>(r)) << v[0], v[1], v[2];
      }
      order.emplace_back(s.at("order").get<std::size_t>(), out.plan.actions.size());
      out.plan.actions.push_back(std::move(a));
      out.trajectories.push_back(std::move(t));
    }
    std::sort(order.begin(), order.end());
    ExportedPlan sorted = out;
    for (std::size_t i = 0; i < order.size(); ++i) {
      sorted.plan.actions[i] = out.plan.actions[order[i].second];
      sorted.trajectories[i] = out.trajectories[order[i].second];
    }
    return sorted;
  } catch (const Error& e) {
    throw Error("plan " + path.string() + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error("plan " + path.string() + ": " + e.what());
  }
}

std::string palette_report(const std::vector<Eigen::Vector3d>& palette) {
  std::ostringstream os;
  os << "# " << palette.size() << " paint colors (r g b in [0,1], hex)\n";
  for (std::size_t i = 0; i < palette.size(); ++i) {
    const auto& c = palette[i];
    char hex[8];
    auto byte = [](double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
    std::snprintf(hex, sizeof hex, "#%02x%02x%02x", byte(c.x()), byte(c.y()), byte(c.z()));
    os << i << ' ' << c.x() << ' ' << c.y() << ' ' << c.z() << ' ' << hex << '\n';
  }
  return os.str();
}

}  // namespace splinestroke::planner
