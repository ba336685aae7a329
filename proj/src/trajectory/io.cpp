#include "splinestroke/trajectory/io.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <string>

namespace splinestroke::trajectory {

namespace {

using nlohmann::json;

Eigen::Vector3d vec3(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw TrajectoryError("expected a 3-vector");
  return {v[0], v[1], v[2]};
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw TrajectoryError("cannot open " + path.string());
  return is;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw TrajectoryError("cannot open " + path.string() + " for writing");
  return os;
}

bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

}  // namespace

std::vector<PoseRecord> read_pose_stream(std::istream& is) {
  std::vector<PoseRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (blank(line)) continue;
    PoseRecord rec;
    try {
      const json j = json::parse(line);
      rec.pen.t = j.at("t").get<double>();
      rec.pen.position = vec3(j.at("pen").at("pos"));
      const auto q = j.at("pen").at("quat").get<std::vector<double>>();
      if (q.size() != 4) throw TrajectoryError("quat must have 4 components [w,x,y,z]");
      rec.pen.orientation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
      const auto& markers = j.at("canvas_markers");
      if (!markers.is_array() || markers.size() != 3) throw TrajectoryError("canvas_markers must hold 3 points");
      for (std::size_t k = 0; k < 3; ++k) rec.canvas_markers[k] = vec3(markers[k]);
    } catch (const std::exception& e) {
      throw TrajectoryError("pose stream line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!out.empty() && !(rec.pen.t > out.back().pen.t)) {
      throw TrajectoryError("pose stream line " + std::to_string(lineno) + ": timestamps must strictly increase");
    }
    out.push_back(rec);
  }
  return out;
}

std::vector<PoseRecord> read_pose_stream(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_pose_stream(is);
}

void write_pose_stream(const std::filesystem::path& path, const std::vector<PoseRecord>& records) {
  auto os = open_out(path);
  for (const auto& r : records) {
    const auto& q = r.pen.orientation;
    json j = {{"t", r.pen.t},
              {"pen",
               {{"pos", {r.pen.position.x(), r.pen.position.y(), r.pen.position.z()}},
                {"quat", {q.w(), q.x(), q.y(), q.z()}}}},
              {"canvas_markers", json::array()}};
    for (const auto& m : r.canvas_markers) j["canvas_markers"].push_back({m.x(), m.y(), m.z()});
    os << j.dump() << '\n';
  }
}

std::vector<Trajectory> read_dataset(std::istream& is) {
  std::vector<Trajectory> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (blank(line)) continue;
    try {
      const json j = json::parse(line);
      const auto& pts = j.at("points");
      Trajectory t;
      t.points.resize(static_cast<Eigen::Index>(pts.size()), 3);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto v = pts[i].get<std::vector<double>>();
        if (v.size() != 3) throw TrajectoryError("points must be [x,y,h] triples");
        t.points.row(static_cast<Eigen::Index>(i)) << v[0], v[1], v[2];
      }
      if (!t.points.allFinite()) throw TrajectoryError("non-finite coordinate");
      out.push_back(std::move(t));
    } catch (const std::exception& e) {
      throw TrajectoryError("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Trajectory> read_dataset(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_dataset(is);
}

void write_dataset(std::ostream& os, const std::vector<Trajectory>& trajectories) {
  for (const auto& t : trajectories) {
    json pts = json::array();
    for (Eigen::Index i = 0; i < t.points.rows(); ++i) pts.push_back({t.points(i, 0), t.points(i, 1), t.points(i, 2)});
    os << json{{"points", pts}}.dump() << '\n';
  }
}

void write_dataset(const std::filesystem::path& path, const std::vector<Trajectory>& trajectories) {
  auto os = open_out(path);
  write_dataset(os, trajectories);
}

std::vector<Trajectory> ingest(const std::vector<PoseRecord>& stream, const IngestOptions& options) {
  std::vector<Eigen::Vector3d> canvas_points;
  canvas_points.reserve(stream.size());
  for (const auto& rec : stream) {
    const CanvasFrame frame = canvas_frame(rec.canvas_markers);
    canvas_points.push_back(to_canvas(frame, pen_tip(rec.pen, options.pen_length, options.tip_axis)));
  }
  std::vector<Trajectory> out;
  for (const auto& raw : extract_strokes(canvas_points, options.extract)) {
    out.push_back(resample(standardize(raw).trajectory, options.n));
  }
  return out;
}

}  // namespace splinestroke::trajectory
