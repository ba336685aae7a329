#pragma once

#include "splinestroke/planner/plan.hpp"

#include <random>

namespace splinestroke::planner {

struct KMeansResult {
  std::vector<Eigen::Vector3d> centroids;
  std::vector<std::size_t> assignment;
  std::size_t iterations = 0;
};

/// Lloyd iterations from a k-means++ seeding. Stops after `max_iterations`
/// or once no centroid moves more than `tolerance`. When k is at least the
/// number of distinct points, each distinct point is its own centroid.
KMeansResult kmeans(const std::vector<Eigen::Vector3d>& points, std::size_t k, std::mt19937_64& rng,
                    std::size_t max_iterations = 100, double tolerance = 1e-6);

/// Replaces each stroke color by its cluster centroid and stores the
/// centroids as the plan's palette.
PaintingPlan discretize_colors(const PaintingPlan& plan, std::size_t k, std::mt19937_64& rng);

}  // namespace splinestroke::planner
