#include "splinestroke/trajectory/io.hpp"
#include "splinestroke/trajectory/trajectory.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace splinestroke::trajectory;

namespace {

Trajectory make(std::initializer_list<std::array<double, 3>> pts) {
  Trajectory t;
  t.points.resize(static_cast<Eigen::Index>(pts.size()), 3);
  Eigen::Index i = 0;
  for (const auto& p : pts) t.points.row(i++) << p[0], p[1], p[2];
  return t;
}

/// Smooth random curve: bounded turning per step, like densely sampled mocap.
Trajectory random_smooth(std::mt19937_64& rng, int count) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Trajectory t;
  t.points.resize(count, 3);
  Eigen::Vector2d p(u(rng), u(rng));
  double heading = u(rng) * std::numbers::pi;
  double turn = 0.0;
  for (int i = 0; i < count; ++i) {
    t.points.row(i) << p.x(), p.y(), 0.01 * (1.0 + u(rng));
    turn = 0.8 * turn + 0.05 * u(rng);
    heading += turn;
    p += (0.01 + 0.02 * (1.0 + u(rng))) * Eigen::Vector2d(std::cos(heading), std::sin(heading));
  }
  return t;
}

Trajectory random_jagged(std::mt19937_64& rng, int count) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Trajectory t;
  t.points.resize(count, 3);
  for (int i = 0; i < count; ++i) t.points.row(i) << u(rng), u(rng), u(rng);
  return t;
}

}  // namespace

TEST_CASE("pen_tip") {
  PoseSample pose;
  pose.position = {0, 0, 1};
  Eigen::Vector3d tip = pen_tip(pose, 0.15, {0, 0, -1});
  CHECK((tip - Eigen::Vector3d(0, 0, 0.85)).norm() < 1e-12);

  PoseSample rot;
  rot.orientation = Eigen::Quaterniond(std::cos(std::numbers::pi / 4), 0, 0, std::sin(std::numbers::pi / 4));
  CHECK((pen_tip(rot, 1.0, {1, 0, 0}) - Eigen::Vector3d(0, 1, 0)).norm() < 1e-12);

  pose.position = {0.3, -0.2, 0.5};
  CHECK(pen_tip(pose, 0.0, {0, 0, -1}) == pose.position);

  PoseSample bad;
  bad.orientation = Eigen::Quaterniond(1.0, 0.1, 0, 0);
  CHECK_THROWS_AS(pen_tip(bad, 0.1, {0, 0, -1}), TrajectoryError);
}

TEST_CASE("canvas_frame") {
  auto f = canvas_frame({Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 1, 0)});
  CHECK(f.x_axis.isApprox(Eigen::Vector3d::UnitX()));
  CHECK(f.y_axis.isApprox(Eigen::Vector3d::UnitY()));
  CHECK(f.normal.isApprox(Eigen::Vector3d::UnitZ()));
  CHECK(f.width == 1.0);
  CHECK(f.height == 1.0);

  auto g = canvas_frame({Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(2, 0, 0), Eigen::Vector3d(0, 0.5, 0)});
  CHECK(g.width == 2.0);
  CHECK(g.height == 0.5);
  CHECK(g.x_axis.isApprox(Eigen::Vector3d::UnitX()));

  const Eigen::Matrix3d r = Eigen::AngleAxisd(std::numbers::pi / 4, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  auto h = canvas_frame({Eigen::Vector3d::Zero(), r * Eigen::Vector3d::UnitX(), r * Eigen::Vector3d::UnitY()});
  CHECK((h.x_axis - r.col(0)).norm() < 1e-12);
  CHECK((h.y_axis - r.col(1)).norm() < 1e-12);
  CHECK(std::abs(h.x_axis.dot(h.y_axis)) < 1e-6);
  CHECK(std::abs(h.normal.dot(h.x_axis)) < 1e-6);
  CHECK((h.normal - h.x_axis.cross(h.y_axis)).norm() < 1e-12);

  CHECK_THROWS_AS(canvas_frame({Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(2, 0, 0)}),
                  TrajectoryError);
}

TEST_CASE("extract_strokes") {
  auto sample = [](double h) { return Eigen::Vector3d(0.5, 0.5, h); };
  std::vector<Eigen::Vector3d> none(20, sample(0.1));
  CHECK(extract_strokes(none).empty());

  std::vector<Eigen::Vector3d> one(5, sample(0.1));
  for (int i = 0; i < 10; ++i) one.push_back(sample(0.001));
  for (int i = 0; i < 5; ++i) one.push_back(sample(0.1));
  auto s1 = extract_strokes(one);
  REQUIRE(s1.size() == 1);
  CHECK(s1[0].size() == 10);

  std::vector<Eigen::Vector3d> two;
  for (int i = 0; i < 4; ++i) two.push_back(sample(0.0));
  two.push_back(sample(0.2));
  for (int i = 0; i < 6; ++i) two.push_back(sample(-0.001));
  auto s2 = extract_strokes(two);
  REQUIRE(s2.size() == 2);
  CHECK(s2[0].size() == 4);
  CHECK(s2[1].size() == 6);

  std::vector<Eigen::Vector3d> blip = {sample(0.1), sample(0.0), sample(0.0), sample(0.1)};
  CHECK(extract_strokes(blip).empty());
  CHECK_THROWS_AS(extract_strokes(blip, {.contact_threshold = 0.0}), TrajectoryError);
}

TEST_CASE("extract_strokes partitions the contact samples") {
  std::mt19937_64 rng(21);
  std::bernoulli_distribution contact(0.6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Eigen::Vector3d> s;
    for (int i = 0; i < 60; ++i) s.emplace_back(i, trial, contact(rng) ? 0.0 : 1.0);
    // Count contact samples in runs of at least min_samples.
    std::size_t expected = 0, run = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
      if (i < s.size() && s[i].z() < kDefaultContactThreshold) {
        ++run;
      } else {
        if (run >= kDefaultMinSamples) expected += run;
        run = 0;
      }
    }
    std::size_t got = 0;
    std::vector<double> seen;
    for (const auto& t : extract_strokes(s)) {
      got += t.size();
      for (Eigen::Index i = 0; i < t.points.rows(); ++i) seen.push_back(t.points(i, 0));
    }
    CHECK(got == expected);
    std::sort(seen.begin(), seen.end());
    CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
  }
}

TEST_CASE("standardize examples") {
  auto a = standardize(make({{0, 0, 0}, {0, 2, 0}}));
  CHECK((a.trajectory.points.row(0)).norm() < 1e-12);
  CHECK(std::abs(a.trajectory.points(1, 0) - 2.0) < 1e-12);
  CHECK(std::abs(a.trajectory.points(1, 1)) < 1e-12);
  CHECK(a.angle == doctest::Approx(-std::numbers::pi / 2));

  auto b = standardize(make({{1, 1, 0.3}, {2, 1, 0.4}}));
  CHECK(b.trajectory.points.isApprox(make({{0, 0, 0.3}, {1, 0, 0.4}}).points));
  CHECK(b.angle == 0.0);

  auto fixed = make({{0, 0, 0}, {0.5, 0.2, 0}, {3, 0, 0}});
  CHECK(standardize(fixed).trajectory.points == fixed.points);

  auto loop = standardize(make({{1, 1, 0}, {2, 2, 0}, {1, 1, 0}}));
  CHECK(loop.angle == 0.0);
  CHECK(loop.trajectory.points.isApprox(make({{0, 0, 0}, {1, 1, 0}, {0, 0, 0}}).points));
  CHECK_THROWS_AS(standardize(make({{0, 0, 0}})), TrajectoryError);
}

TEST_CASE("standardize is an idempotent rigid motion (1000 random trajectories)") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> count(2, 40);
  for (int trial = 0; trial < 1000; ++trial) {
    const Trajectory t = random_jagged(rng, count(rng));
    const Standardized s = standardize(t);
    const Points& p = s.trajectory.points;
    CHECK(p.row(0).head<2>().norm() == 0.0);
    CHECK(p(p.rows() - 1, 1) == 0.0);
    CHECK(p(p.rows() - 1, 0) >= 0.0);
    CHECK((p.col(2) - t.points.col(2)).norm() == 0.0);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      for (Eigen::Index j = i + 1; j < p.rows(); ++j)
        worst = std::max(worst, std::abs((s.trajectory.planar(i) - s.trajectory.planar(j)).norm() -
                                         (t.planar(i) - t.planar(j)).norm()));
    CHECK(worst < 1e-9);
    const Standardized twice = standardize(s.trajectory);
    CHECK((twice.trajectory.points - p).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("resample examples") {
  auto r = resample(make({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}), 5);
  CHECK(r.points.isApprox(make({{0, 0, 0}, {0.5, 0, 0}, {1, 0, 0}, {1.5, 0, 0}, {2, 0, 0}}).points));

  auto eq = make({{0, 0, 0.1}, {0, 1, 0.2}, {0, 2, 0.3}, {0, 3, 0.4}});
  CHECK((resample(eq, 4).points - eq.points).cwiseAbs().maxCoeff() < 1e-12);

  auto h = resample(make({{0, 0, 0}, {2, 0, 1}}), 3);
  CHECK(h.points(1, 2) == doctest::Approx(0.5));

  auto still = resample(make({{0.3, 0.3, 0.1}, {0.3, 0.3, 0.2}}), 6);
  CHECK(still.size() == 6);
  for (Eigen::Index i = 0; i < 6; ++i) CHECK(still.points.row(i) == make({{0.3, 0.3, 0.1}}).points.row(0));

  CHECK(resample(make({{0, 0, 0}, {1, 0, 0}})).size() == kDefaultPointCount);
  CHECK(kDefaultPointCount == 32);
  CHECK_THROWS_AS(resample(eq, 1), TrajectoryError);
}

TEST_CASE("resample preserves endpoints and arc length for densely sampled strokes") {
  std::mt19937_64 rng(123);
  std::uniform_int_distribution<int> count(2, 60);
  for (int trial = 0; trial < 1000; ++trial) {
    const Trajectory t = random_smooth(rng, count(rng));
    for (std::size_t n : {t.size(), t.size() + 7, 4 * t.size()}) {
      const Trajectory r = resample(t, n);
      REQUIRE(r.size() == n);
      CHECK(r.points.row(0) == t.points.row(0));
      CHECK(r.points.row(r.points.rows() - 1) == t.points.row(t.points.rows() - 1));
      CHECK(std::abs(arc_length(r) - arc_length(t)) <= 0.01 * arc_length(t));
    }
  }
}

TEST_CASE("dataset and pose stream io") {
  std::vector<Trajectory> ds = {make({{0, 0, 0}, {0.1, 0.2, 0.003}}), make({{0, 0, 0}, {1.0 / 3.0, 0, 0}})};
  std::stringstream ss;
  write_dataset(ss, ds);
  auto back = read_dataset(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[1].points == ds[1].points);

  std::stringstream bad("{\"points\": [[0,0,0]]}\nnot json\n");
  CHECK_THROWS_WITH_AS(read_dataset(bad), doctest::Contains("line 2"), TrajectoryError);

  std::stringstream stream(
      R"({"t": 0.0, "pen": {"pos": [0,0,0.2], "quat": [1,0,0,0]}, "canvas_markers": [[0,0,0],[1,0,0],[0,1,0]]})"
      "\n"
      R"({"t": 0.0, "pen": {"pos": [0,0,0.2], "quat": [1,0,0,0]}, "canvas_markers": [[0,0,0],[1,0,0],[0,1,0]]})"
      "\n");
  CHECK_THROWS_WITH_AS(read_pose_stream(stream), doctest::Contains("line 2"), TrajectoryError);
}

TEST_CASE("ingest builds standardized fixed-length strokes") {
  std::vector<PoseRecord> stream;
  const std::array<Eigen::Vector3d, 3> markers = {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(0.4, 0, 0),
                                                  Eigen::Vector3d(0, 0.4, 0)};
  double t = 0.0;
  auto push = [&](double x, double y, double z) {
    PoseRecord r;
    r.pen.t = (t += 0.01);
    r.pen.position = {x, y, z + 0.15};  // tip axis -z, length 0.15
    r.canvas_markers = markers;
    stream.push_back(r);
  };
  for (int i = 0; i < 5; ++i) push(0.1, 0.1, 0.05);
  for (int i = 0; i < 20; ++i) push(0.1 + 0.005 * i, 0.1 + 0.002 * i, 0.0);
  for (int i = 0; i < 5; ++i) push(0.2, 0.2, 0.05);
  for (int i = 0; i < 15; ++i) push(0.2, 0.2 + 0.004 * i, 0.0);
  auto strokes = ingest(stream);
  REQUIRE(strokes.size() == 2);
  for (const auto& s : strokes) {
    CHECK(s.size() == 32);
    CHECK(s.points.row(0).head<2>().norm() == 0.0);
    CHECK(s.points(31, 1) == 0.0);
  }
  // second stroke: straight 0.056 m line -> 0.14 normalized
  CHECK(strokes[1].points(31, 0) == doctest::Approx(0.056 / 0.4));
  IngestOptions opts;
  opts.n = 16;
  CHECK(ingest(stream, opts)[0].size() == 16);
}
