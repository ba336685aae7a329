#include "splinestroke/planner/kmeans.hpp"

#include <algorithm>
#include <limits>

namespace splinestroke::planner {

namespace {

std::size_t nearest(const Eigen::Vector3d& p, const std::vector<Eigen::Vector3d>& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = (p - centroids[c]).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

}  // namespace

KMeansResult kmeans(const std::vector<Eigen::Vector3d>& points, std::size_t k, std::mt19937_64& rng,
                    std::size_t max_iterations, double tolerance) {
  if (k == 0) throw Error("kmeans: k must be at least 1");
  KMeansResult r;
  if (points.empty()) return r;

  std::vector<Eigen::Vector3d> distinct;
  for (const auto& p : points) {
    if (std::none_of(distinct.begin(), distinct.end(), [&](const Eigen::Vector3d& q) { return q == p; })) {
      distinct.push_back(p);
    }
  }
  if (k >= distinct.size()) {
    r.centroids = distinct;
    for (const auto& p : points) r.assignment.push_back(nearest(p, r.centroids));
    return r;
  }

  // k-means++ seeding
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  r.centroids.push_back(points[pick(rng)]);
  std::vector<double> d2(points.size());
  while (r.centroids.size() < k) {
    for (std::size_t i = 0; i < points.size(); ++i) d2[i] = (points[i] - r.centroids[nearest(points[i], r.centroids)]).squaredNorm();
    std::discrete_distribution<std::size_t> weighted(d2.begin(), d2.end());
    r.centroids.push_back(points[weighted(rng)]);
  }

  r.assignment.assign(points.size(), 0);
  for (r.iterations = 1; r.iterations <= max_iterations; ++r.iterations) {
    for (std::size_t i = 0; i < points.size(); ++i) r.assignment[i] = nearest(points[i], r.centroids);
    std::vector<Eigen::Vector3d> sums(k, Eigen::Vector3d::Zero());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      sums[r.assignment[i]] += points[i];
      ++counts[r.assignment[i]];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      const Eigen::Vector3d next = sums[c] / static_cast<double>(counts[c]);
      shift = std::max(shift, (next - r.centroids[c]).norm());
      r.centroids[c] = next;
    }
    if (shift <= tolerance) break;
  }
  r.iterations = std::min(r.iterations, max_iterations);
  for (std::size_t i = 0; i < points.size(); ++i) r.assignment[i] = nearest(points[i], r.centroids);
  return r;
}

PaintingPlan discretize_colors(const PaintingPlan& plan, std::size_t k, std::mt19937_64& rng) {
  std::vector<Eigen::Vector3d> colors;
  for (const auto& a : plan.actions) colors.push_back(a.color);
  const KMeansResult km = kmeans(colors, k, rng);
  PaintingPlan out = plan;
  for (std::size_t i = 0; i < out.actions.size(); ++i) out.actions[i].color = km.centroids[km.assignment[i]];
  out.palette.clear();
  for (std::size_t c = 0; c < km.centroids.size(); ++c) {
    if (std::find(km.assignment.begin(), km.assignment.end(), c) != km.assignment.end()) {
      out.palette.push_back(km.centroids[c]);
    }
  }
  return out;
}

}  // namespace splinestroke::planner
